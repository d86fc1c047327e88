"""Space-time Fourier transform of RGF grids, DSF construction and resolution figures.

Transform convention (no prefactor):

    G(q, w) = sum_j sum_k exp(-i q (j - jc)) exp(i w k dt) G(j, k)

with ``q = 2 pi m / n`` covering ``(-pi, pi]`` and ``w = 2 pi l / (L dt)``
covering ``[-pi/dt, pi/dt)``, where ``L`` is the number of time samples after
optional zero padding (``steps + 1`` by default).  On these grids the
transform is a unitary DFT up to the factor ``sqrt(n L)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, TextIO

import numpy as np

from .errors import AliasingError, NormalizationError, StructuralError
from .rgf import RgfGrid

SPIN_S = 0.5
SUM_RULE = SPIN_S * (SPIN_S + 1)


def q_axis(n: int) -> np.ndarray:
    m = np.arange(n) - (n - 1) // 2
    return 2 * np.pi * m / n


def omega_axis(length: int, dt: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(length, dt))


def time_window(samples: int, kind: str | None) -> np.ndarray:
    """Weights for ``k = 0..samples-1``; ``"hann"`` is the decaying half of a Hann window."""
    if kind in (None, "none"):
        return np.ones(samples)
    if kind == "hann":
        k = np.arange(samples)
        return 0.5 * (1 + np.cos(np.pi * k / samples))
    raise ValueError(f"unknown window {kind!r}")


@dataclass
class FourierGrid:
    """Complex ``G(q, w)`` with its axes."""

    values: np.ndarray
    q_axis: np.ndarray
    omega_axis: np.ndarray
    n: int
    steps: int
    dt: float
    units: str
    channel: str


def spacetime_fourier(grid: RgfGrid, window: str | None = None, pad_to: int | None = None) -> FourierGrid:
    """Double sum over sites and time samples (see module docstring)."""
    n, samples = grid.values.shape
    length = samples if pad_to is None else int(pad_to)
    if length < samples:
        raise StructuralError(f"pad length {length} shorter than {samples} samples")
    qs = q_axis(n)
    ws = omega_axis(length, grid.dt)
    rel = np.arange(n) - grid.jc
    space = np.exp(-1j * np.outer(qs, rel))  # (q, j)
    k = np.arange(samples)
    time = np.exp(1j * grid.dt * np.outer(k, ws))  # (k, w)
    data = grid.values * time_window(samples, window)[None, :]
    values = space @ data @ time
    return FourierGrid(values, qs, ws, n, grid.steps, grid.dt, grid.units, grid.alpha + grid.beta)


# ---------------------------------------------------------------------------
# DSF grids


@dataclass
class DsfGrid:
    """Real ``S(q, w)``; rows follow ``q_axis``, columns ``omega_axis``."""

    values: np.ndarray
    q_axis: np.ndarray
    omega_axis: np.ndarray
    normalization: str = "raw"
    temperature: float = 0.0
    channel: str = "ZZ"
    n: int = 0
    steps: int = 0
    dt: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.q_axis = np.asarray(self.q_axis, dtype=np.float64)
        self.omega_axis = np.asarray(self.omega_axis, dtype=np.float64)
        if self.values.shape != (len(self.q_axis), len(self.omega_axis)):
            raise StructuralError(
                f"DSF values {self.values.shape} do not match axes ({len(self.q_axis)}, {len(self.omega_axis)})"
            )
        for name, ax in (("q", self.q_axis), ("omega", self.omega_axis)):
            if len(ax) > 1 and np.any(np.diff(ax) <= 0):
                raise StructuralError(f"{name} axis must be strictly increasing")
        if self.n == 0:
            self.n = len(self.q_axis)

    @property
    def domega(self) -> float:
        return float(self.omega_axis[1] - self.omega_axis[0]) if len(self.omega_axis) > 1 else 1.0

    def with_values(self, values, normalization: str | None = None, **meta) -> "DsfGrid":
        return replace(
            self,
            values=np.asarray(values, dtype=np.float64),
            normalization=normalization or self.normalization,
            meta=dict(self.meta, **meta),
        )

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", self.n])
        w.writerow(["steps", self.steps])
        w.writerow(["dt", f"{self.dt:.17g}"])
        w.writerow(["normalization", self.normalization])
        w.writerow(["temperature", f"{self.temperature:.17g}"])
        w.writerow(["channel", self.channel])
        for key in sorted(self.meta):
            w.writerow([f"meta.{key}", self.meta[key]])
        w.writerow(["q_axis"] + [f"{x:.17g}" for x in self.q_axis])
        w.writerow(["omega_axis"] + [f"{x:.17g}" for x in self.omega_axis])
        for row in self.values:
            w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def read_csv(cls, fh: TextIO) -> "DsfGrid":
        head: dict[str, str] = {}
        meta: dict[str, str] = {}
        qs = ws = None
        rows = []
        for rec in csv.reader(fh):
            if not rec:
                continue
            key = rec[0]
            if key == "q_axis":
                qs = [float(x) for x in rec[1:]]
            elif key == "omega_axis":
                ws = [float(x) for x in rec[1:]]
            elif qs is not None and ws is not None:
                rows.append([float(x) for x in rec])
            elif key.startswith("meta."):
                meta[key[5:]] = rec[1]
            elif len(rec) == 2:
                head[key] = rec[1]
            else:
                raise StructuralError(f"malformed DSF header row {rec[:3]}")
        if qs is None or ws is None:
            raise StructuralError("DSF file lacks axis rows")
        values = np.array(rows, dtype=np.float64).reshape(len(qs), len(ws))
        return cls(
            values,
            qs,
            ws,
            head.get("normalization", "raw"),
            float(head.get("temperature", 0.0)),
            head.get("channel", "ZZ"),
            int(head.get("n", len(qs))),
            int(head.get("steps", 0)),
            float(head.get("dt", 0.0)),
            meta,
        )


def bose_factor(omega: np.ndarray, temperature: float) -> np.ndarray:
    """``1 + n_B(w)``; at ``T = 0`` this is 1 for ``w > 0`` and 0 otherwise."""
    omega = np.asarray(omega, dtype=np.float64)
    out = np.zeros_like(omega)
    pos = omega > 0
    if temperature == 0:
        out[pos] = 1.0
        return out
    nz = omega != 0
    out[nz] = -1.0 / np.expm1(-omega[nz] / temperature)
    return out


def dsf_from_rgf(gq: FourierGrid, temperature: float = 0.0) -> DsfGrid:
    """``S = -(1/pi) (1 + n_B(w)) Im G(q, w)`` in spin units.

    Pauli-unit input is divided by 4 first.  The ``w = 0`` bin is set to 0
    (the Bose factor diverges there).
    """
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    scale = 0.25 if gq.units == "pauli" else 1.0
    pref = bose_factor(gq.omega_axis, temperature)
    values = -(1 / np.pi) * pref[None, :] * scale * gq.values.imag
    return DsfGrid(
        values,
        gq.q_axis,
        gq.omega_axis,
        "raw",
        temperature,
        gq.channel,
        gq.n,
        gq.steps,
        gq.dt,
        {"units_converted": "pauli/4" if gq.units == "pauli" else "none", "clipped": 0},
    )


def dsf_pipeline(
    grid: RgfGrid,
    temperature: float = 0.0,
    mirror: bool | None = None,
    window: str | None = None,
    pad_to: int | None = None,
) -> DsfGrid:
    """RGF grid to raw DSF; mirror averaging defaults to on for even ``n``."""
    from .rgf import mirror_symmetrize

    if mirror is None:
        mirror = grid.n % 2 == 0
    if mirror:
        grid = mirror_symmetrize(grid)
    return dsf_from_rgf(spacetime_fourier(grid, window, pad_to), temperature)


# ---------------------------------------------------------------------------
# normalization


def sum_rule_integral(grids: Mapping[str, DsfGrid] | DsfGrid, isotropic: bool = False) -> float:
    """``(1/n) sum_q sum_w dw sum_alpha S_alpha(q, w)``.

    With a single grid and ``isotropic=True`` the channel is counted three
    times (valid only for SU(2)-symmetric models).
    """
    if isinstance(grids, DsfGrid):
        if not isotropic:
            raise NormalizationError("a single channel needs isotropic=True for the sum rule")
        grids = {grids.channel: grids}
        mult = 3.0
    else:
        mult = 1.0
        if not isotropic and len(grids) < 3:
            raise NormalizationError(f"sum rule needs XX, YY and ZZ channels, got {sorted(grids)}")
        if isotropic and len(grids) == 1:
            mult = 3.0
    total = 0.0
    for g in grids.values():
        total += g.domega * g.values.sum() / g.values.shape[0]
    return mult * total


def sum_rule_normalize(grids, isotropic: bool = False):
    """Rescale so that the sum-rule integral equals ``S(S+1) = 0.75``.

    Accepts one grid (with ``isotropic=True``) or a mapping of channel grids;
    returns the same shape of input with ``normalization="sum_rule"`` and
    the applied factor in ``meta["sum_rule_scale"]``.
    """
    total = sum_rule_integral(grids, isotropic)
    if total == 0 or not math.isfinite(total):
        raise NormalizationError("total spectral weight is zero")
    scale = SUM_RULE / total

    def one(g: DsfGrid) -> DsfGrid:
        prior = float(g.meta.get("sum_rule_scale", 1.0))
        return g.with_values(
            g.values * scale,
            "sum_rule",
            sum_rule_scale=f"{prior * scale:.17g}",
            sum_rule_isotropic=int(isotropic),
        )

    if isinstance(grids, DsfGrid):
        return one(grids)
    return {k: one(g) for k, g in grids.items()}


def max1_normalize(grid: DsfGrid) -> DsfGrid:
    peak = float(np.max(grid.values))
    if peak <= 0:
        raise NormalizationError("grid has no positive maximum")
    return grid.with_values(grid.values / peak, "max1", max1_scale=f"{1 / peak:.17g}")


def line_scan(grid: DsfGrid, q_target: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Nearest-``q`` column: ``(omega_axis, intensities, chosen q)``."""
    if not grid.q_axis[0] - 1e-12 <= q_target <= grid.q_axis[-1] + 1e-12:
        raise ValueError(f"q={q_target} outside axis range")
    idx = int(np.argmin(np.abs(grid.q_axis - q_target)))
    return grid.omega_axis.copy(), grid.values[idx].copy(), float(grid.q_axis[idx])


# ---------------------------------------------------------------------------
# resolution


@dataclass
class ResolutionReport:
    dimensionality: int
    n: int
    steps: int
    dt: float
    energy: float
    dk: float
    domega: float
    product: float
    ny: int | None = None
    gates: float | None = None
    depth: float | None = None
    product_from_gates: float | None = None
    product_from_depth: float | None = None

    def to_text(self) -> str:
        lines = []
        for key, val in self.__dict__.items():
            if val is None:
                continue
            lines.append(f"{key} = {val:.17g}" if isinstance(val, float) else f"{key} = {val}")
        return "\n".join(lines) + "\n"


def resolution_report(
    n: int,
    steps: int,
    dt: float,
    e_max: float | None = None,
    dimensionality: int = 1,
    gates: float | None = None,
    depth: float | None = None,
    ny: int | None = None,
) -> ResolutionReport:
    """Momentum/energy resolution and their gate-budget forms.

    1D (periodic chain, first-order steps of ``3n`` gates, depth 6 per step):
    ``dk dw = 4 pi^2 / (N n dt) = 12 pi E / G = 24 pi E / (D n)``.
    2D (``n x ny``, ``6 n ny`` gates and depth 12 per step):
    ``dkx dky dw = 48 pi^2 E / G = 96 pi^2 E / (n ny D)``.
    ``E`` is ``e_max`` if given, else the Nyquist limit ``pi / dt``.
    """
    if min(n, steps) <= 0 or dt <= 0:
        raise ValueError("n, steps and dt must be positive")
    if e_max is not None and np.pi / dt < e_max:
        raise AliasingError(f"pi/dt = {np.pi / dt:.6g} is below the required energy {e_max:.6g}")
    energy = float(e_max) if e_max is not None else np.pi / dt
    domega = 2 * np.pi / (steps * dt)
    if dimensionality == 1:
        dk = 2 * np.pi / n
        product = dk * domega
        pg = 12 * np.pi * energy / gates if gates else None
        pd = 24 * np.pi * energy / (depth * n) if depth else None
    elif dimensionality == 2:
        ny = n if ny is None else ny
        dk = (2 * np.pi / n) * (2 * np.pi / ny)
        product = dk * domega
        pg = 48 * np.pi**2 * energy / gates if gates else None
        pd = 96 * np.pi**2 * energy / (n * ny * depth) if depth else None
    else:
        raise ValueError("dimensionality must be 1 or 2")
    return ResolutionReport(dimensionality, n, steps, dt, energy, dk, domega, product, ny, gates, depth, pg, pd)
