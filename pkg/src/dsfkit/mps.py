"""Finite matrix-product states with TEBD-style gate application.

Tensors have shape ``(left bond, 2, right bond)``.  The state is kept in
mixed-canonical form around ``center`` whenever possible; two-site gates are
applied on adjacent sites and split by SVD with truncation to ``chi_max``.
"""
from __future__ import annotations

import io
import logging
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .circuit import PAULI, Gate, TrotterPlan, build_plan
from .errors import ConvergenceError, StructuralError
from .exact import Statevector

logger = logging.getLogger(__name__)

MAGIC = b"DSFMPS1\x00"


def _as_real_if_possible(op: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(op) and not np.any(op.imag):
        return np.ascontiguousarray(op.real)
    return op


class MPS:
    def __init__(
        self,
        tensors: Sequence[np.ndarray],
        chi_max: int = 256,
        truncation_tol: float = 1e-10,
        center: int | None = None,
    ):
        self.tensors = [np.asarray(t) for t in tensors]
        self.n = len(self.tensors)
        if self.n == 0:
            raise StructuralError("MPS needs at least one site")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise StructuralError("boundary bonds must have dimension 1")
        for a, b in zip(self.tensors, self.tensors[1:]):
            if a.shape[2] != b.shape[0]:
                raise StructuralError("bond dimensions of neighbouring tensors disagree")
        self.chi_max = int(chi_max)
        self.truncation_tol = float(truncation_tol)
        self.center = center
        self.discarded_weight = 0.0
        self.overflow_count = 0
        self.warnings: list[str] = []

    # -- construction ---------------------------------------------------

    @classmethod
    def product(cls, site_states: Sequence[np.ndarray], **kw) -> "MPS":
        tensors = []
        for v in site_states:
            v = np.asarray(v, dtype=np.float64 if np.isrealobj(v) else np.complex128)
            tensors.append((v / np.linalg.norm(v)).reshape(1, 2, 1))
        return cls(tensors, center=0, **kw)

    @classmethod
    def basis(cls, bits: Sequence[int], **kw) -> "MPS":
        return cls.product([np.eye(2)[int(b)] for b in bits], **kw)

    @classmethod
    def neel(cls, n: int, **kw) -> "MPS":
        return cls.basis([i % 2 for i in range(n)], **kw)

    @classmethod
    def singlet_product(cls, n: int, **kw) -> "MPS":
        if n % 2:
            raise StructuralError("singlet product state needs even n")
        left = np.zeros((1, 2, 2))
        left[0, 0, 0] = left[0, 1, 1] = 1.0
        right = np.zeros((2, 2, 1))
        right[0, 1, 0] = 1 / np.sqrt(2)
        right[1, 0, 0] = -1 / np.sqrt(2)
        tensors = [left if i % 2 == 0 else right for i in range(n)]
        return cls(tensors, center=n - 1, **kw)

    @classmethod
    def from_statevector(cls, state: Statevector, chi_max: int = 256, truncation_tol: float = 1e-10) -> "MPS":
        n = state.n
        rest = state.data.reshape(1, -1)
        tensors = []
        discarded = 0.0
        for i in range(n - 1):
            dl = rest.shape[0]
            mat = rest.reshape(dl * 2, -1)
            u, s, vh = np.linalg.svd(mat, full_matrices=False)
            k, w = _truncation(s, chi_max, truncation_tol)
            discarded += w
            tensors.append(u[:, :k].reshape(dl, 2, k))
            rest = s[:k, None] * vh[:k]
        tensors.append(rest.reshape(rest.shape[0], 2, 1))
        mps = cls(tensors, chi_max=chi_max, truncation_tol=truncation_tol, center=n - 1)
        mps.discarded_weight = discarded
        mps.normalize()
        return mps

    def copy(self) -> "MPS":
        out = MPS([t.copy() for t in self.tensors], self.chi_max, self.truncation_tol, self.center)
        out.discarded_weight = self.discarded_weight
        out.overflow_count = self.overflow_count
        out.warnings = list(self.warnings)
        return out

    def to_statevector(self) -> Statevector:
        psi = self.tensors[0].reshape(2, -1)
        for t in self.tensors[1:]:
            psi = np.tensordot(psi, t, axes=(psi.ndim - 1, 0)).reshape(-1, t.shape[2])
        return Statevector(self.n, psi.reshape(-1))

    # -- canonical form -------------------------------------------------

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def _shift_right(self, k: int) -> None:
        a = self.tensors[k]
        dl, d, dr = a.shape
        q, r = np.linalg.qr(a.reshape(dl * d, dr))
        self.tensors[k] = q.reshape(dl, d, q.shape[1])
        self.tensors[k + 1] = np.tensordot(r, self.tensors[k + 1], axes=(1, 0))

    def _shift_left(self, k: int) -> None:
        a = self.tensors[k]
        dl, d, dr = a.shape
        q, r = np.linalg.qr(a.reshape(dl, d * dr).T)
        self.tensors[k] = q.T.reshape(q.shape[1], d, dr)
        self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], r.T, axes=(2, 0))

    def canonicalize(self, center: int = 0) -> "MPS":
        """Left-canonical left of ``center``, right-canonical right of it, norm 1."""
        for k in range(center):
            self._shift_right(k)
        for k in range(self.n - 1, center, -1):
            self._shift_left(k)
        self.center = center
        self.normalize()
        return self

    def move_center(self, target: int) -> None:
        if self.center is None:
            self.canonicalize(target)
            return
        while self.center < target:
            self._shift_right(self.center)
            self.center += 1
        while self.center > target:
            self._shift_left(self.center)
            self.center -= 1

    def norm(self) -> float:
        if self.center is not None:
            return float(np.linalg.norm(self.tensors[self.center]))
        return float(np.sqrt(abs(overlap(self, self))))

    def normalize(self) -> None:
        if self.center is None:
            self.canonicalize(0)
            return
        nrm = np.linalg.norm(self.tensors[self.center])
        self.tensors[self.center] = self.tensors[self.center] / nrm

    # -- gates ----------------------------------------------------------

    def apply_one_site(self, op: np.ndarray, site: int) -> None:
        op = _as_real_if_possible(op)
        self.tensors[site] = np.einsum("st,atb->asb", op, self.tensors[site])

    def apply_two_site(self, op: np.ndarray, site: int, absorb: str = "right", normalize: bool = True) -> float:
        """Apply a 4x4 ``op`` on ``(site, site + 1)``; returns the discarded weight."""
        if self.center is None or self.center not in (site, site + 1):
            self.move_center(site)
        a, b = self.tensors[site], self.tensors[site + 1]
        dl, dr = a.shape[0], b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))  # (dl, 2, 2, dr)
        op = _as_real_if_possible(op).reshape(2, 2, 2, 2)
        theta = np.einsum("stuv,auvb->astb", op, theta)
        u, s, vh = _svd(theta.reshape(dl * 2, 2 * dr))
        k, w = _truncation(s, self.chi_max, self.truncation_tol)
        if w > self.truncation_tol and k == self.chi_max:
            self.overflow_count += 1
        s = s[:k]
        if normalize:
            s = s / np.linalg.norm(s)
        if absorb == "right":
            self.tensors[site] = u[:, :k].reshape(dl, 2, k)
            self.tensors[site + 1] = (s[:, None] * vh[:k]).reshape(k, 2, dr)
            self.center = site + 1
        else:
            self.tensors[site] = (u[:, :k] * s[None, :]).reshape(dl, 2, k)
            self.tensors[site + 1] = vh[:k].reshape(k, 2, dr)
            self.center = site
        self.discarded_weight += w
        return w

    # -- measurements ---------------------------------------------------

    def expect_one_site(self, op: np.ndarray, site: int) -> complex:
        self.move_center(site)
        a = self.tensors[site]
        return complex(np.vdot(a, np.einsum("st,atb->asb", op, a)))

    def expect_all(self, op: np.ndarray) -> np.ndarray:
        """``<op_j>`` for every site, sweeping the center left to right."""
        out = np.empty(self.n, dtype=np.complex128)
        start = 0 if self.center is None else self.center
        order = list(range(start, -1, -1)) + list(range(start + 1, self.n))
        for j in order:
            out[j] = self.expect_one_site(op, j)
        return out

    def expect_window(self, op: np.ndarray, start: int, width: int) -> complex:
        """Expectation of a ``2**width`` square operator on sites ``start..start+width-1``."""
        self.move_center(start)
        theta = self.tensors[start]
        for k in range(start + 1, start + width):
            theta = np.tensordot(theta, self.tensors[k], axes=(theta.ndim - 1, 0))
        dl, dr = theta.shape[0], theta.shape[-1]
        theta = theta.reshape(dl, 2**width, dr)
        return complex(np.vdot(theta, np.einsum("st,atb->asb", op, theta)))

    # -- serialization --------------------------------------------------

    def write(self, fh: BinaryIO) -> None:
        """Binary container: header, per-site dims, row-major complex128 data."""
        center = -1 if self.center is None else self.center
        fh.write(MAGIC)
        fh.write(struct.pack("<IIdid", self.n, self.chi_max, self.truncation_tol, center, self.discarded_weight))
        for t in self.tensors:
            fh.write(struct.pack("<III", *t.shape))
        for t in self.tensors:
            fh.write(np.ascontiguousarray(t, dtype="<c16").tobytes())

    @classmethod
    def read(cls, fh: BinaryIO) -> "MPS":
        if fh.read(len(MAGIC)) != MAGIC:
            raise StructuralError("not an MPS checkpoint")
        head = struct.calcsize("<IIdid")
        n, chi, tol, center, disc = struct.unpack("<IIdid", fh.read(head))
        shapes = [struct.unpack("<III", fh.read(12)) for _ in range(n)]
        tensors = []
        for shp in shapes:
            count = int(np.prod(shp))
            buf = fh.read(16 * count)
            if len(buf) != 16 * count:
                raise StructuralError("truncated MPS checkpoint")
            tensors.append(np.frombuffer(buf, dtype="<c16").reshape(shp).astype(np.complex128))
        mps = cls(tensors, chi, tol, None if center < 0 else center)
        mps.discarded_weight = disc
        return mps

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.write(buf)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "MPS":
        return cls.read(io.BytesIO(data))


def _svd(mat: np.ndarray):
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def _truncation(s: np.ndarray, chi_max: int, tol: float) -> tuple[int, float]:
    """Keep the fewest values holding ``1 - tol`` of the weight, capped at ``chi_max``."""
    w = s**2
    total = w.sum()
    if total == 0:
        return 1, 0.0
    tail = np.cumsum(w[::-1])[::-1] / total  # tail[k] = weight of s[k:]
    k = int(np.searchsorted(-tail, -tol, side="right"))
    k = max(1, min(k, chi_max, len(s)))
    discarded = float(tail[k]) if k < len(s) else 0.0
    return k, discarded


def overlap(a: MPS, b: MPS) -> complex:
    """``<a|b>`` by transfer-matrix contraction."""
    if a.n != b.n:
        raise StructuralError(f"MPS sizes differ: {a.n} vs {b.n}")
    env = np.ones((1, 1))
    for ta, tb in zip(a.tensors, b.tensors):
        env = np.tensordot(env, tb, axes=(1, 0))  # (Da, 2, Db')
        env = np.tensordot(ta.conj(), env, axes=([0, 1], [0, 1]))  # (Da', Db')
    return complex(env[0, 0])


# ---------------------------------------------------------------------------
# gate lists


def apply_gates(mps: MPS, gates: Sequence[Gate], normalize: bool = True) -> MPS:
    """Apply gates in order; two-site gates must act on adjacent positions."""
    mats = [(g, _as_real_if_possible(g.matrix())) for g in gates]
    for idx, (g, m) in enumerate(mats):
        if not g.two_qubit:
            mps.apply_one_site(m, g.sites[0])
            continue
        i, j = g.sites
        if j != i + 1:
            raise StructuralError(f"MPS gates must act on adjacent sites, got {g.sites}")
        nxt = next((h.sites[0] for h, _ in mats[idx + 1 :] if h.two_qubit), i + 1)
        mps.apply_two_site(m, i, absorb="right" if nxt > i else "left", normalize=normalize)
    return mps


def tebd_evolve(state: MPS, model, plan: TrotterPlan) -> MPS:
    """Apply ``plan.steps`` Trotter steps to a copy of ``state``.

    Uses exactly the gate sequence of the statevector engine; the returned
    state carries the cumulative discarded weight.
    """
    plan.check_model(model)
    if state.n != plan.n:
        raise StructuralError("state and plan sizes differ")
    out = state.copy()
    gates = plan.step_gates
    for _ in range(plan.steps):
        apply_gates(out, gates)
    if out.overflow_count:
        out.warnings.append(f"bond cap {out.chi_max} reached in {out.overflow_count} splits")
    return out


# ---------------------------------------------------------------------------
# energy and ground states


def _local_terms(model) -> dict[int, tuple[int, np.ndarray]]:
    """Per starting site, the summed operator on the window ``[i, i + width)``."""
    width = model.max_range + 1
    out: dict[int, tuple[int, np.ndarray]] = {}
    for t in model.terms:
        i = t.site_indices[0]
        w = min(width, model.n - i)
        ops = dict(t.sites)
        mat = np.ones((1, 1), dtype=np.complex128)
        for s in range(i, i + w):
            mat = np.kron(mat, PAULI[ops.get(s, "I")])
        if i in out:
            out[i] = (w, out[i][1] + t.coefficient * mat)
        else:
            out[i] = (w, t.coefficient * mat)
    return {i: (w, _as_real_if_possible(m)) for i, (w, m) in out.items()}


def mps_energy(state: MPS, model, local_terms=None) -> float:
    terms = local_terms if local_terms is not None else _local_terms(model)
    total = 0.0
    for i in sorted(terms, reverse=state.center is not None and state.center > state.n // 2):
        w, op = terms[i]
        total += state.expect_window(op, i, w).real
    return float(total)


@dataclass
class GroundStateResult:
    state: MPS
    energy: float
    trajectory: list = field(default_factory=list)


def mps_ground_state(
    model,
    chi_max: int = 128,
    convergence_tol: float = 1e-8,
    truncation_tol: float = 1e-10,
    taus: Sequence[float] = (0.1, 0.01, 0.001),
    initial: str | MPS = "singlet_product",
    max_steps: int = 20000,
    check_every: int = 5,
    chi_ramp: Sequence[int] = (),
    return_info: bool = False,
):
    """Ground state by second-order imaginary-time TEBD.

    Each step size in ``taus`` is run until the energy slope ``|dE/dtau|``
    falls below ``convergence_tol``.  ``chi_ramp`` lists smaller bond caps used
    (at the first step size) before ``chi_max``, which is much cheaper for
    long chains.
    """
    if chi_max < 1:
        raise ValueError("chi_max must be positive")
    if isinstance(initial, MPS):
        state = initial.copy()
    elif initial == "singlet_product" and model.n % 2 == 0:
        state = MPS.singlet_product(model.n)
    elif initial in ("neel", "singlet_product"):
        state = MPS.neel(model.n)
    else:
        raise ValueError(f"unknown initial state {initial!r}")
    state.truncation_tol = truncation_tol
    state.canonicalize(0)
    local = _local_terms(model)
    trajectory = [mps_energy(state, model, local)]
    stages = [(taus[0], c) for c in chi_ramp if c < chi_max] + [(t, chi_max) for t in taus]
    for tau, chi in stages:
        state.chi_max = chi
        gates = build_plan(model, -1j * tau, 1, order=2).step_gates
        e_prev = trajectory[-1]
        converged = False
        for it in range(1, max_steps + 1):
            apply_gates(state, gates)
            if it % check_every == 0:
                e = mps_energy(state, model, local)
                trajectory.append(e)
                slope = abs(e - e_prev) / (tau * check_every)
                e_prev = e
                if slope < convergence_tol:
                    converged = True
                    break
        logger.info("imaginary-time stage tau=%g chi=%d: %d steps, E=%.12f", tau, chi, it, e_prev)
        if not converged:
            raise ConvergenceError(
                f"imaginary-time search did not converge at tau={tau}", trajectory=trajectory
            )
    state.discarded_weight = 0.0
    state.overflow_count = 0
    energy = trajectory[-1]
    if return_info:
        return GroundStateResult(state, energy, trajectory)
    return state


def bond_convergence_scan(
    model,
    chis: Sequence[int],
    steps: int,
    dt: float,
    order: int = 2,
    observable: tuple[int, int] | None = None,
    ground_state: MPS | None = None,
    gs_chi: int = 128,
    truncation_tol: float = 1e-10,
    substeps: int = 1,
) -> dict:
    """Central-site response ``<Z_i(t)>`` after perturbing site ``j`` for each bond cap.

    ``observable`` is ``(i, j)`` (default both at the center site).  Returns
    ``{"chis", "times", "series": {chi: array}, "residuals": {chi: max abs
    deviation from the largest chi}, "discarded": {chi: weight}}``.
    ``substeps > 1`` splits every interval ``dt`` into finer Trotter steps,
    approaching the continuous-time correlator instead of the circuit.
    """
    from .rgf import center_site, perturbation_unitary

    chis = list(chis)
    if chis != sorted(chis):
        raise ValueError("chis must be ascending")
    i_site, j_site = observable if observable is not None else (center_site(model.n),) * 2
    if ground_state is None:
        ground_state = mps_ground_state(model, chi_max=gs_chi, truncation_tol=truncation_tol)
    plan = build_plan(model, dt / substeps, 1, order)
    gates = plan.step_gates * substeps
    zop = PAULI["Z"]
    series: dict[int, np.ndarray] = {}
    discarded: dict[int, float] = {}
    perturbed = ground_state.copy()
    perturbed.apply_one_site(perturbation_unitary("Z"), j_site)
    for chi in chis:
        psi = perturbed.copy()
        psi.chi_max = chi
        psi.truncation_tol = truncation_tol
        psi.discarded_weight = 0.0
        vals = [psi.expect_one_site(zop, i_site).real]
        for _ in range(steps):
            apply_gates(psi, gates)
            vals.append(psi.expect_one_site(zop, i_site).real)
        series[chi] = np.array(vals)
        discarded[chi] = psi.discarded_weight
        logger.info("bond scan chi=%d done, discarded weight %.3e", chi, psi.discarded_weight)
    ref = series[chis[-1]]
    residuals = {chi: float(np.max(np.abs(series[chi] - ref))) for chi in chis}
    return {
        "chis": chis,
        "times": dt * np.arange(steps + 1),
        "series": series,
        "residuals": residuals,
        "discarded": discarded,
    }


# ---------------------------------------------------------------------------
# sampling


def sample_bitstrings(state: MPS, shots: int, rng: np.random.Generator, chunk: int = 4096) -> np.ndarray:
    """Draw computational-basis samples, shape ``(shots, n)`` of 0/1."""
    psi = state.copy()
    psi.canonicalize(0)
    out = np.empty((shots, psi.n), dtype=np.uint8)
    for lo in range(0, shots, chunk):
        m = min(chunk, shots - lo)
        env = np.ones((m, 1), dtype=np.complex128)
        for i, a in enumerate(psi.tensors):
            v0 = env @ a[:, 0, :]
            v1 = env @ a[:, 1, :]
            p0 = np.sum(np.abs(v0) ** 2, axis=1)
            p1 = np.sum(np.abs(v1) ** 2, axis=1)
            bit = rng.random(m) * (p0 + p1) >= p0
            out[lo : lo + m, i] = bit
            norm = np.sqrt(np.where(bit, p1, p0))[:, None]
            env = np.where(bit[:, None], v1, v0) / norm
    return out
