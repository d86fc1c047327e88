"""Image and physics metrics over pairs of DSF grids."""
from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
import scipy.optimize
import scipy.stats
from scipy.interpolate import RegularGridInterpolator

from .errors import AlignmentError, NormalizationError
from .spectrum import DsfGrid, line_scan, max1_normalize

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))
WEIGHT_HALF_WIDTH = 0.25


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, DsfGrid) else np.asarray(x, dtype=np.float64)


def align(grid: DsfGrid, q_axis, omega_axis) -> DsfGrid:
    """Bilinear resampling of ``grid`` onto new axes (no extrapolation)."""
    q_axis = np.asarray(q_axis, dtype=np.float64)
    omega_axis = np.asarray(omega_axis, dtype=np.float64)
    tol = 1e-12
    if (
        q_axis[0] < grid.q_axis[0] - tol
        or q_axis[-1] > grid.q_axis[-1] + tol
        or omega_axis[0] < grid.omega_axis[0] - tol
        or omega_axis[-1] > grid.omega_axis[-1] + tol
    ):
        raise AlignmentError("target axes extend beyond the source grid")
    interp = RegularGridInterpolator((grid.q_axis, grid.omega_axis), grid.values, method="linear")
    qq, ww = np.meshgrid(
        np.clip(q_axis, grid.q_axis[0], grid.q_axis[-1]),
        np.clip(omega_axis, grid.omega_axis[0], grid.omega_axis[-1]),
        indexing="ij",
    )
    values = interp(np.stack([qq, ww], axis=-1))
    return DsfGrid(
        values, q_axis, omega_axis, grid.normalization, grid.temperature, grid.channel,
        len(q_axis), grid.steps, grid.dt, dict(grid.meta, aligned="bilinear"),
    )


def _pair(a, b, allow_align: bool):
    if isinstance(a, DsfGrid) and isinstance(b, DsfGrid):
        same = a.values.shape == b.values.shape and np.allclose(a.q_axis, b.q_axis) and np.allclose(
            a.omega_axis, b.omega_axis
        )
        if not same:
            if not allow_align:
                raise AlignmentError("grid axes differ; enable alignment")
            b = align(b, a.q_axis, a.omega_axis)
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise AlignmentError(f"grid shapes differ: {va.shape} vs {vb.shape}")
    return va, vb


# ---------------------------------------------------------------------------
# image metrics


def mse(a, b, allow_align: bool = False) -> float:
    va, vb = _pair(a, b, allow_align)
    return float(np.mean((va - vb) ** 2))


def wasserstein(a, b, omega_axis=None, allow_align: bool = False) -> float:
    """Per-``q`` earth mover's distance between ``w`` profiles, averaged over columns.

    Values are clipped at 0 and every column normalized to unit mass; columns
    where either side has no mass are skipped.
    """
    va, vb = _pair(a, b, allow_align)
    if omega_axis is None:
        omega_axis = a.omega_axis if isinstance(a, DsfGrid) else np.arange(va.shape[1], dtype=float)
    va = np.clip(va, 0, None)
    vb = np.clip(vb, 0, None)
    dists = []
    for ra, rb in zip(va, vb):
        if ra.sum() <= 0 or rb.sum() <= 0:
            continue
        dists.append(scipy.stats.wasserstein_distance(omega_axis, omega_axis, ra, rb))
    skipped = va.shape[0] - len(dists)
    if not dists:
        raise NormalizationError("all columns have zero mass")
    if skipped:
        logger.info("wasserstein: skipped %d zero-mass columns", skipped)
    return float(np.mean(dists))


def _window_sums(x: np.ndarray, w: int) -> np.ndarray:
    """Sums over every full ``w x w`` window (stride 1)."""
    c = np.pad(np.cumsum(np.cumsum(x, axis=0), axis=1), ((1, 0), (1, 0)))
    return c[w:, w:] - c[:-w, w:] - c[w:, :-w] + c[:-w, :-w]


def ssim(a, b, window: int = SSIM_WINDOW, allow_align: bool = False) -> float:
    """Mean SSIM over all full uniform ``window x window`` patches.

    Data range 1 (grids are expected max1-normalized); local variances use
    the sample (``N - 1``) normalization.
    """
    x, y = _pair(a, b, allow_align)
    if min(x.shape) < window:
        raise ValueError(f"grid {x.shape} smaller than the {window}x{window} window")
    npx = window * window
    mx = _window_sums(x, window) / npx
    my = _window_sums(y, window) / npx
    cov_norm = npx / (npx - 1)
    vx = cov_norm * (_window_sums(x * x, window) / npx - mx * mx)
    vy = cov_norm * (_window_sums(y * y, window) / npx - my * my)
    vxy = cov_norm * (_window_sums(x * y, window) / npx - mx * my)
    num = (2 * mx * my + SSIM_C1) * (2 * vxy + SSIM_C2)
    den = (mx**2 + my**2 + SSIM_C1) * (vx + vy + SSIM_C2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# physics metrics


def thermal_factor(omega: np.ndarray, temperature: float) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.float64)
    if temperature == 0:
        return np.ones_like(omega)
    if math.isinf(temperature):
        return np.zeros_like(omega)
    x = omega / temperature
    return np.tanh(x / 2) * (1 - np.exp(-x))


def nqfi(dsf: DsfGrid, q: float | None = None, temperature: float | None = None):
    """Normalized QFI per ``q`` (or at the nearest ``q``) from a sum-rule normalized grid.

    ``4 * trapz_{w >= 0} h(w, T) max(S, 0)`` with ``h = tanh(w/2T)(1 - e^{-w/T})``.
    """
    if dsf.normalization != "sum_rule":
        raise NormalizationError("nQFI needs a sum-rule normalized spectrum")
    temperature = dsf.temperature if temperature is None else temperature
    pos = dsf.omega_axis >= 0
    w = dsf.omega_axis[pos]
    integrand = np.clip(dsf.values[:, pos], 0, None) * thermal_factor(w, temperature)[None, :]
    per_q = 4 * np.trapezoid(integrand, w, axis=1)
    if q is None:
        return per_q
    return float(per_q[int(np.argmin(np.abs(dsf.q_axis - q)))])


def concurrence(czz) -> np.ndarray:
    czz = np.asarray(czz, dtype=np.float64)
    return 2 * np.maximum(0.0, 2 * np.abs(czz) - np.abs(0.25 + czz))


@dataclass
class TwoTangle:
    r: np.ndarray
    czz: np.ndarray
    concurrence: np.ndarray
    tau2: float
    warning: str | None = None


def equal_time_correlations(dsf: DsfGrid, r_max: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``C(r) = (1/n) sum_q e^{iqr} sum_w dw S(q, w)`` for ``r = 0..r_max``."""
    n = len(dsf.q_axis)
    r_max = n // 2 if r_max is None else r_max
    integrated = dsf.domega * dsf.values.sum(axis=1)
    r = np.arange(r_max + 1)
    czz = (np.exp(1j * np.outer(r, dsf.q_axis)) @ integrated).real / n
    return r, czz


def two_tangle(dsf_zz: DsfGrid, r_max: int | None = None, isotropic: bool = True) -> TwoTangle:
    """Concurrences ``C_r`` and ``tau2 = 2 sum_{r>0} C_r^2`` from the ZZ spectrum.

    The spectrum should be sum-rule normalized so that ``C(0) = 1/4``.  The
    concurrence formula holds at the isotropic point; other models get a
    warning attached to the result.
    """
    if dsf_zz.normalization != "sum_rule":
        raise NormalizationError("two-tangle needs a sum-rule normalized spectrum")
    r, czz = equal_time_correlations(dsf_zz, r_max)
    conc = concurrence(czz)
    tau2 = float(2 * np.sum(conc[1:] ** 2))
    warn = None if isotropic else "concurrence formula assumes an isotropic model"
    if warn:
        warnings.warn(warn, stacklevel=2)
    return TwoTangle(r, czz, conc, tau2, warn)


# ---------------------------------------------------------------------------
# peak fits


@dataclass
class PeakFit:
    q: float
    center: float
    amplitude: float
    sigma: float
    offset: float
    spectral_weight: float
    fit_residual: float
    converged: bool = True
    position_error_pct: float | None = None

    @property
    def fwhm(self) -> float:
        return FWHM_PER_SIGMA * self.sigma


def _gauss(w, amp, center, sigma, offset):
    return amp * np.exp(-0.5 * ((w - center) / sigma) ** 2) + offset


def window_weight(omega, values, center: float, half_width: float = WEIGHT_HALF_WIDTH) -> float:
    """Trapezoidal integral of the piecewise-linear scan over ``center +- half_width``."""
    lo, hi = center - half_width, center + half_width
    inner = (omega > lo) & (omega < hi)
    w = np.concatenate([[lo], omega[inner], [hi]])
    v = np.interp(w, omega, values, left=0.0, right=0.0)
    return float(np.trapezoid(v, w))


def fit_peak(
    omega,
    intensities,
    window: tuple[float, float] | None = None,
    q: float = float("nan"),
    reference_center: float | None = None,
) -> PeakFit:
    """Least-squares Gaussian plus constant baseline on the points inside ``window``."""
    omega = np.asarray(omega, dtype=np.float64)
    y = np.asarray(intensities, dtype=np.float64)
    sel = np.ones_like(omega, dtype=bool) if window is None else (omega >= window[0]) & (omega <= window[1])
    w, v = omega[sel], y[sel]
    if len(w) < 5:
        raise ValueError(f"peak fit needs at least 5 points in the window, got {len(w)}")
    i0 = int(np.argmax(v))
    base = float(np.min(v))
    amp0 = float(v[i0] - base)
    half = v >= base + amp0 / 2
    width0 = max((w[half].max() - w[half].min()) / FWHM_PER_SIGMA, np.min(np.diff(w)))
    p0 = [amp0, w[i0], width0, base]
    converged = True
    try:
        popt, _ = scipy.optimize.curve_fit(_gauss, w, v, p0=p0, maxfev=20000)
    except (RuntimeError, scipy.optimize.OptimizeWarning):
        popt, converged = np.array(p0), False
    amp, center, sigma, offset = popt
    sigma = abs(sigma)
    resid = float(np.sqrt(np.mean((_gauss(w, amp, center, sigma, offset) - v) ** 2)))
    weight = window_weight(omega, y, center)
    fit = PeakFit(q, float(center), float(amp), float(sigma), float(offset), weight, resid, converged)
    if reference_center is not None:
        fit.position_error_pct = 100 * abs(fit.center - reference_center) / fit.fwhm
    return fit


def fit_line_scan(dsf: DsfGrid, q_target: float, window=None, reference_center=None) -> PeakFit:
    omega, vals, q = line_scan(dsf, q_target)
    if window is None:
        window = (0.0, float(omega[-1]))
    return fit_peak(omega, vals, window, q, reference_center)


# ---------------------------------------------------------------------------
# reports


@dataclass
class MetricsReport:
    mse: float
    wasserstein: float
    ssim: float
    nqfi_a: np.ndarray | None = None
    nqfi_b: np.ndarray | None = None
    q_axis: np.ndarray | None = None
    tau2_a: float | None = None
    tau2_b: float | None = None
    peaks_a: list = field(default_factory=list)
    peaks_b: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def scalars(self) -> dict:
        out = {"mse": self.mse, "wasserstein": self.wasserstein, "ssim": self.ssim}
        if self.tau2_a is not None:
            out["tau2_a"] = self.tau2_a
            out["tau2_b"] = self.tau2_b
        for label, peaks in (("a", self.peaks_a), ("b", self.peaks_b)):
            for p in peaks:
                tag = f"peak_{label}_q{p.q:.6f}"
                out[f"{tag}_center"] = p.center
                out[f"{tag}_fwhm"] = p.fwhm
                out[f"{tag}_weight"] = p.spectral_weight
                if p.position_error_pct is not None:
                    out[f"{tag}_position_error_pct"] = p.position_error_pct
        return out

    def to_text(self) -> str:
        lines = [f"{k} = {v:.17g}" for k, v in self.scalars().items()]
        lines += [f"meta.{k} = {v}" for k, v in sorted(self.meta.items())]
        return "\n".join(lines) + "\n"

    def csv_row(self, fh: TextIO, header: bool = True) -> None:
        vals = self.scalars()
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(list(vals))
        w.writerow([f"{v:.17g}" for v in vals.values()])

    def write_nqfi_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "nqfi_a", "nqfi_b"])
        if self.q_axis is None:
            return
        for q, x, y in zip(self.q_axis, self.nqfi_a, self.nqfi_b):
            w.writerow([f"{q:.17g}", f"{x:.17g}", f"{y:.17g}"])

    def write_peaks_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["grid", "q", "center", "amplitude", "sigma", "fwhm", "offset", "spectral_weight",
                    "fit_residual", "converged", "position_error_pct"])
        for label, peaks in (("a", self.peaks_a), ("b", self.peaks_b)):
            for p in peaks:
                err = "" if p.position_error_pct is None else f"{p.position_error_pct:.17g}"
                w.writerow([label] + [f"{x:.17g}" for x in (p.q, p.center, p.amplitude, p.sigma, p.fwhm,
                                                             p.offset, p.spectral_weight, p.fit_residual)]
                           + [int(p.converged), err])


def compare(
    a: DsfGrid,
    b: DsfGrid,
    q_points: Sequence[float] = (np.pi, np.pi / 2),
    allow_align: bool = False,
    isotropic: bool = True,
) -> MetricsReport:
    """Full comparison of grid ``b`` against reference ``a``.

    Image metrics use per-grid max1 copies; nQFI and two-tangle are computed
    when both grids carry sum-rule normalization; peak fits at ``q_points``
    (``b``'s centers are scored against ``a``'s).
    """
    if isinstance(b, DsfGrid) and (
        a.values.shape != b.values.shape or not np.allclose(a.omega_axis, b.omega_axis)
        or not np.allclose(a.q_axis, b.q_axis)
    ):
        if not allow_align:
            raise AlignmentError("grid axes differ; enable alignment")
        b = align(b, a.q_axis, a.omega_axis)
    ma, mb = max1_normalize(a), max1_normalize(b)
    report = MetricsReport(
        mse=mse(ma, mb),
        wasserstein=wasserstein(ma, mb),
        ssim=ssim(ma, mb) if min(a.values.shape) >= SSIM_WINDOW else float("nan"),
        meta={"wasserstein_mode": "per-q column average", "ssim_window": "uniform 11x11",
              "max1": "per grid"},
    )
    if a.normalization == "sum_rule" and b.normalization == "sum_rule":
        report.q_axis = a.q_axis
        report.nqfi_a, report.nqfi_b = nqfi(a), nqfi(b)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ta, tb = two_tangle(a, isotropic=isotropic), two_tangle(b, isotropic=isotropic)
        report.tau2_a, report.tau2_b = ta.tau2, tb.tau2
    for q in q_points:
        try:
            pa = fit_line_scan(ma, q)
            pb = fit_line_scan(mb, q, reference_center=pa.center)
        except ValueError as exc:
            report.meta[f"peak_q{q:.6f}"] = f"skipped: {exc}"
            continue
        report.peaks_a.append(pa)
        report.peaks_b.append(pb)
    return report
