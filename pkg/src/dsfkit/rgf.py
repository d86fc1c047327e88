"""Local-perturbation protocol for the retarded Green's function.

The ground state is rotated at the center site by ``U = (1 - i sigma^beta)/sqrt2``,
evolved step by step, and ``<sigma^alpha_j>`` is read out on every site.  For
a parity-symmetric ground state this equals ``(i/2) <[sigma^beta_c,
sigma^alpha_j(t)]>``, i.e. four times the spin-units retarded function

    G(j, t) = -(i/2) <[S^alpha_j(t), S^beta_c]>.

Grids produced by the protocol are in pauli units; ``RgfGrid.to_spin_units``
divides by four.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterator, TextIO

import numpy as np

from .circuit import PAULI, TrotterPlan
from .errors import SizeLimitError, StructuralError
from .exact import (
    Statevector,
    apply_gates as sv_apply_gates,
    apply_one_site,
    exact_evolve,
    expect_pauli_all,
)
from .model import SpinChainModel, hamiltonian_dense

logger = logging.getLogger(__name__)

ORACLE_LIMIT = 12
BACKGROUND_TOL = 1e-10


def center_site(n: int) -> int:
    """``n/2 - 1`` for even ``n`` (left member of the mirror pair), ``n//2`` for odd."""
    return n // 2 - 1 if n % 2 == 0 else n // 2


def perturbation_unitary(axis: str) -> np.ndarray:
    """``(1 - i sigma^axis) / sqrt2``; its square is ``-i sigma^axis``."""
    return (PAULI["I"] - 1j * PAULI[axis.upper()]) / np.sqrt(2)


@dataclass
class RgfGrid:
    """``values[j, k]`` = G(site j, time k*dt) relative to perturbation site ``jc``."""

    values: np.ndarray
    dt: float
    jc: int
    alpha: str = "Z"
    beta: str = "Z"
    units: str = "pauli"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.ndim != 2:
            raise StructuralError("RGF values must be a (sites, times) matrix")
        if self.units not in ("pauli", "spin"):
            raise StructuralError(f"unknown units {self.units!r}")
        if not 0 <= self.jc < self.values.shape[0]:
            raise StructuralError(f"center site {self.jc} outside chain")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def steps(self) -> int:
        return self.values.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def to_spin_units(self) -> "RgfGrid":
        if self.units == "spin":
            return self
        return replace(self, values=self.values / 4, units="spin", meta=dict(self.meta))

    # -- csv ---------------------------------------------------------------

    def write_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", self.n])
        w.writerow(["dt", f"{self.dt:.17g}"])
        w.writerow(["steps", self.steps])
        w.writerow(["jc", self.jc])
        w.writerow(["alpha", self.alpha])
        w.writerow(["beta", self.beta])
        w.writerow(["convention", self.units])
        for key in sorted(self.meta):
            w.writerow([f"meta.{key}", self.meta[key]])
        w.writerow(["data"])
        for row in self.values:
            w.writerow([f"{x:.17g}" for v in row for x in (v.real, v.imag)])

    @classmethod
    def read_csv(cls, fh: TextIO) -> "RgfGrid":
        head: dict[str, str] = {}
        meta: dict[str, str] = {}
        rows = []
        reader = csv.reader(fh)
        for rec in reader:
            if not rec:
                continue
            if rec[0] == "data":
                break
            if len(rec) != 2:
                raise StructuralError(f"malformed RGF header row {rec}")
            if rec[0].startswith("meta."):
                meta[rec[0][5:]] = rec[1]
            else:
                head[rec[0]] = rec[1]
        for rec in reader:
            if rec:
                rows.append([float(x) for x in rec])
        try:
            n, steps = int(head["n"]), int(head["steps"])
            arr = np.array(rows, dtype=np.float64)
            if arr.shape != (n, 2 * (steps + 1)):
                raise StructuralError(f"RGF data shape {arr.shape} does not match n={n}, steps={steps}")
            return cls(
                arr[:, 0::2] + 1j * arr[:, 1::2],
                float(head["dt"]),
                int(head["jc"]),
                head["alpha"],
                head["beta"],
                head["convention"],
                meta,
            )
        except KeyError as exc:
            raise StructuralError(f"RGF header lacks {exc}") from None


# ---------------------------------------------------------------------------
# protocol


def _engine_of(state) -> str:
    from .mps import MPS

    if isinstance(state, MPS):
        return "mps"
    if isinstance(state, Statevector):
        return "exact"
    raise StructuralError(f"unsupported state type {type(state).__name__}")


def _measure(state, axis: str) -> np.ndarray:
    if isinstance(state, Statevector):
        return expect_pauli_all(state, axis)
    return state.expect_all(PAULI[axis]).real


def protocol_states(
    ground_state,
    model: SpinChainModel,
    plan: TrotterPlan,
    beta: str = "Z",
    jc: int | None = None,
    exact_evolution: bool = False,
) -> Iterator[tuple[int, object]]:
    """Yield ``(k, state)`` for ``k = 0..plan.steps`` after the center rotation.

    The yielded state object is reused between iterations; copy it if it must
    outlive the step.
    """
    plan.check_model(model)
    jc = center_site(model.n) if jc is None else jc
    u = perturbation_unitary(beta)
    psi = ground_state.copy()
    if isinstance(psi, Statevector):
        apply_one_site(psi, u, jc)
    else:
        psi.apply_one_site(u, jc)
    yield 0, psi
    if exact_evolution:
        if not isinstance(psi, Statevector):
            raise StructuralError("exact evolution needs a statevector")
        for k in range(1, plan.steps + 1):
            psi = exact_evolve(model, psi, float(np.real(plan.dt)))
            yield k, psi
        return
    gates = plan.step_gates
    for k in range(1, plan.steps + 1):
        if isinstance(psi, Statevector):
            sv_apply_gates(psi, gates)
        else:
            from .mps import apply_gates as mps_apply_gates

            mps_apply_gates(psi, gates)
        yield k, psi


def run_protocol(
    ground_state,
    model: SpinChainModel,
    plan: TrotterPlan,
    alpha: str = "Z",
    beta: str = "Z",
    engine: str | None = None,
    jc: int | None = None,
    exact_evolution: bool = False,
    subtract_background: bool = True,
    chi_max: int = 256,
    truncation_tol: float = 1e-10,
) -> RgfGrid:
    """Assemble ``<sigma^alpha_j(t_k)>`` after the rotation at ``jc`` (pauli units).

    ``engine`` may convert a statevector ground state to an MPS (``"mps"``);
    by default the engine follows the type of ``ground_state``.
    """
    from .mps import MPS

    alpha, beta = alpha.upper(), beta.upper()
    if ground_state.n != model.n:
        raise StructuralError("ground state and model sizes differ")
    if abs(ground_state.norm() - 1) > 1e-8:
        raise StructuralError(f"ground state is not normalized (norm {ground_state.norm():.12g})")
    engine = engine or _engine_of(ground_state)
    if engine == "mps" and isinstance(ground_state, Statevector):
        ground_state = MPS.from_statevector(ground_state, chi_max, truncation_tol)
    elif engine == "exact" and not isinstance(ground_state, Statevector):
        ground_state = ground_state.to_statevector()
    elif engine not in ("exact", "mps"):
        raise StructuralError(f"unknown engine {engine!r}")
    if isinstance(ground_state, MPS):
        ground_state = ground_state.copy()
        ground_state.chi_max = chi_max
        ground_state.truncation_tol = truncation_tol
        ground_state.discarded_weight = 0.0
    jc = center_site(model.n) if jc is None else jc
    if not 0 <= jc < model.n:
        raise StructuralError(f"center site {jc} outside chain")

    background = np.zeros(model.n)
    if subtract_background:
        background = _measure(ground_state.copy(), alpha)
        if np.max(np.abs(background)) <= BACKGROUND_TOL:
            background = np.zeros(model.n)
    values = np.zeros((model.n, plan.steps + 1), dtype=np.complex128)
    last = None
    for k, psi in protocol_states(ground_state, model, plan, beta, jc, exact_evolution):
        values[:, k] = _measure(psi, alpha) - background
        last = psi
    meta = {"engine": engine, "background_subtracted": int(bool(np.any(background)))}
    if isinstance(last, MPS):
        meta["discarded_weight"] = f"{last.discarded_weight:.6e}"
        meta["chi_max"] = chi_max
    return RgfGrid(values, float(np.real(plan.dt)), jc, alpha, beta, "pauli", meta)


# ---------------------------------------------------------------------------
# oracle


def _spin_op(n: int, site: int, axis: str) -> np.ndarray:
    left = np.eye(1 << site)
    right = np.eye(1 << (n - site - 1))
    return np.kron(np.kron(left, PAULI[axis.upper()] / 2), right)


def oracle_rgf_grid(
    model: SpinChainModel,
    alpha: str,
    beta: str,
    j: int,
    times,
    units: str = "spin",
) -> np.ndarray:
    """``-(i/2) <[S^alpha_i(t), S^beta_j]>`` for every site ``i`` and time.

    Evaluated in the eigenbasis of the dense Hamiltonian, in the lowest
    eigenstate.  Returns an ``(n, len(times))`` complex matrix; ``units="pauli"``
    multiplies by four.
    """
    n = model.n
    if n > ORACLE_LIMIT:
        raise SizeLimitError(f"dense oracle limited to n <= {ORACLE_LIMIT}")
    energies, vecs = np.linalg.eigh(hamiltonian_dense(model))
    g = vecs[:, 0]
    e0 = energies[0]
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    phase = np.exp(1j * np.outer(energies - e0, times))  # (dim, T)
    b_g = vecs.conj().T @ (_spin_op(n, j, beta) @ g)  # <m|B|g>
    out = np.empty((n, len(times)), dtype=np.complex128)
    for i in range(n):
        a_g = vecs.conj().T @ (_spin_op(n, i, alpha) @ g)  # <m|A|g>
        # <g|A(t) B|g> = sum_m <g|A|m><m|B|g> e^{-i(Em-E0)t}
        ab = (a_g.conj() * b_g) @ phase.conj()
        # <g|B A(t)|g> = sum_m <g|B|m><m|A|g> e^{+i(Em-E0)t}
        ba = (b_g.conj() * a_g) @ phase
        out[i] = -0.5j * (ab - ba)
    if units == "pauli":
        out *= 4
    elif units != "spin":
        raise ValueError(f"unknown units {units!r}")
    return out


def oracle_rgf(model, alpha, beta, i, j, t, units="spin") -> complex:
    return complex(oracle_rgf_grid(model, alpha, beta, j, [t], units)[i, 0])


# ---------------------------------------------------------------------------
# symmetrization


def mirror_symmetrize(grid: RgfGrid) -> RgfGrid:
    """Average with the run perturbed at the mirror site ``n - 1 - jc``.

    Reflecting the chain sends the response at offset ``r = j - jc`` from one
    member of the central pair to offset ``-r`` from the other.  The average
    is taken in relative coordinates modulo ``n``, which makes it commute
    exactly with reflecting ``q`` after the spatial transform.
    """
    if grid.n % 2:
        warnings.warn("mirror symmetrization needs even n; grid returned unchanged", stacklevel=2)
        return grid
    j = np.arange(grid.n)
    mirrored = grid.values[(2 * grid.jc - j) % grid.n]
    meta = dict(grid.meta, mirrored=1)
    return replace(grid, values=0.5 * (grid.values + mirrored), meta=meta)
