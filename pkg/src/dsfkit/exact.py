"""Dense statevector engine: ground states, exact and Trotterized evolution."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse.linalg

from .circuit import PAULI, Gate, TrotterPlan
from .errors import ConvergenceError, SizeLimitError, StructuralError
from .model import DENSE_LIMIT, PauliSumOperator, SpinChainModel, hamiltonian_sparse

logger = logging.getLogger(__name__)

STATEVECTOR_CAP = 24
NORM_TOL = 1e-10


@dataclass
class Statevector:
    """Amplitudes of an ``n``-qubit state; site 0 is the most significant bit."""

    n: int
    data: np.ndarray

    def __post_init__(self):
        if self.n > STATEVECTOR_CAP:
            raise SizeLimitError(f"statevector capped at {STATEVECTOR_CAP} qubits, got {self.n}")
        self.data = np.asarray(self.data, dtype=np.complex128).reshape(-1)
        if self.data.size != 1 << self.n:
            raise StructuralError(f"{self.data.size} amplitudes do not match n={self.n}")

    @classmethod
    def basis(cls, bits: Sequence[int]) -> "Statevector":
        n = len(bits)
        data = np.zeros(1 << n, dtype=np.complex128)
        data[int("".join(str(int(b)) for b in bits), 2) if n else 0] = 1.0
        return cls(n, data)

    @classmethod
    def product(cls, site_states: Sequence[np.ndarray]) -> "Statevector":
        data = np.ones(1, dtype=np.complex128)
        for v in site_states:
            data = np.kron(data, np.asarray(v, dtype=np.complex128))
        return cls(len(site_states), data / np.linalg.norm(data))

    def copy(self) -> "Statevector":
        return Statevector(self.n, self.data.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.data) ** 2


def neel_bits(n: int) -> list[int]:
    return [i % 2 for i in range(n)]


def singlet_product_state(n: int) -> Statevector:
    """Singlets ``(|01> - |10>)/sqrt2`` on pairs (0,1), (2,3), ..."""
    if n % 2:
        raise StructuralError("singlet product state needs even n")
    pair = np.array([0, 1, -1, 0], dtype=np.complex128) / np.sqrt(2)
    data = np.ones(1, dtype=np.complex128)
    for _ in range(n // 2):
        data = np.kron(data, pair)
    return Statevector(n, data)


def neel_state(n: int) -> Statevector:
    return Statevector.basis(neel_bits(n))


# ---------------------------------------------------------------------------
# gate application


def apply_one_site(state: Statevector, op: np.ndarray, site: int) -> Statevector:
    n = state.n
    psi = state.data.reshape(1 << site, 2, 1 << (n - site - 1))
    state.data = np.matmul(op, psi).reshape(-1)
    return state


def apply_two_site(state: Statevector, op: np.ndarray, sites: tuple[int, int]) -> Statevector:
    i, j = sites
    n = state.n
    if j == i + 1:
        psi = state.data.reshape(1 << i, 4, 1 << (n - i - 2))
        state.data = np.matmul(op, psi).reshape(-1)
        return state
    psi = state.data.reshape((2,) * n)
    psi = np.moveaxis(psi, (i, j), (0, 1)).reshape(4, -1)
    psi = (op @ psi).reshape((2, 2) + (2,) * (n - 2))
    state.data = np.moveaxis(psi, (0, 1), (i, j)).reshape(-1)
    return state


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    if gate.two_qubit:
        return apply_two_site(state, gate.matrix(), gate.sites)
    return apply_one_site(state, gate.matrix(), gate.sites[0])


def apply_gates(state: Statevector, gates: Iterable[Gate]) -> Statevector:
    for g in gates:
        apply_gate(state, g)
    return state


# ---------------------------------------------------------------------------
# ground states


def lanczos_ground_state(
    model: SpinChainModel, tol: float = 1e-12, maxiter: int | None = None, seed: int = 0
) -> tuple[Statevector, float]:
    """Lowest eigenpair via implicitly restarted Lanczos (ARPACK).

    The start vector is seeded, so repeated calls are bit-identical.
    """
    if model.n > STATEVECTOR_CAP:
        raise SizeLimitError(f"Lanczos limited to n <= {STATEVECTOR_CAP}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    op = PauliSumOperator(model)
    dim = op.dim
    if dim <= 64:
        H = op.to_sparse().toarray()
        vals, vecs = np.linalg.eigh(H)
        return Statevector(model.n, vecs[:, 0]), float(vals[0])
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(dim)
    if not op.real:
        v0 = v0 + 1j * rng.standard_normal(dim)
    try:
        vals, vecs = scipy.sparse.linalg.eigsh(
            op.linear_operator(), k=1, which="SA", tol=tol, v0=v0, maxiter=maxiter
        )
    except scipy.sparse.linalg.ArpackNoConvergence as exc:
        residual = None
        if len(exc.eigenvalues):
            v = exc.eigenvectors[:, 0]
            residual = float(np.linalg.norm(op.matvec(v) - exc.eigenvalues[0] * v))
        raise ConvergenceError("Lanczos did not converge", residual=residual) from exc
    vec = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    return Statevector(model.n, vec), float(vals[0])


def low_energy_manifold(
    model: SpinChainModel, k: int = 2, gap_tol: float = 1e-2, tol: float = 1e-12, seed: int = 0
) -> tuple[list[Statevector], np.ndarray]:
    """Eigenstates within ``gap_tol`` of the ground energy among the ``k`` lowest.

    Used as the fidelity reference when the ground state is (quasi-)degenerate,
    as for Ising-like chains whose two Neel-like states split only
    exponentially in ``n``.
    """
    op = PauliSumOperator(model)
    if op.dim <= 64:
        vals, vecs = np.linalg.eigh(op.to_sparse().toarray())
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(op.dim)
        vals, vecs = scipy.sparse.linalg.eigsh(op.linear_operator(), k=k, which="SA", tol=tol, v0=v0)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    keep = vals - vals[0] <= gap_tol
    states = [Statevector(model.n, vecs[:, i]) for i in np.flatnonzero(keep)]
    return states, vals[keep]


# ---------------------------------------------------------------------------
# evolution


def exact_evolve(model: SpinChainModel, state: Statevector, t: float) -> Statevector:
    """``exp(-i H t) |state>`` through the sparse matrix exponential action."""
    if model.n > DENSE_LIMIT:
        raise SizeLimitError(f"exact propagator limited to n <= {DENSE_LIMIT}, got {model.n}")
    if model.n != state.n:
        raise StructuralError("state and model sizes differ")
    if t == 0:
        return state.copy()
    H = hamiltonian_sparse(model).astype(np.complex128)
    out = scipy.sparse.linalg.expm_multiply(-1j * t * H, state.data)
    return Statevector(state.n, out)


def trotter_step(state: Statevector, plan: TrotterPlan) -> Statevector:
    return apply_gates(state, plan.step_gates)


def trotter_evolve(model: SpinChainModel, state: Statevector, plan: TrotterPlan) -> Statevector:
    """Apply ``plan.steps`` Trotter steps to a copy of ``state``."""
    plan.check_model(model)
    if state.n != plan.n:
        raise StructuralError("state and plan sizes differ")
    out = state.copy()
    gates = plan.step_gates
    for _ in range(plan.steps):
        apply_gates(out, gates)
    return out


# ---------------------------------------------------------------------------
# measurement


def expect_one_site(state: Statevector, op: np.ndarray, site: int) -> complex:
    n = state.n
    psi = state.data.reshape(1 << site, 2, 1 << (n - site - 1))
    return complex(np.vdot(psi, np.matmul(op, psi)))


def expect_pauli(state: Statevector, site: int, axis: str) -> float:
    if not 0 <= site < state.n:
        raise IndexError(f"site {site} outside chain of {state.n}")
    return float(expect_one_site(state, PAULI[axis.upper()], site).real)


def expect_pauli_all(state: Statevector, axis: str) -> np.ndarray:
    """``<sigma^axis_j>`` for every site ``j``."""
    n = state.n
    axis = axis.upper()
    if axis == "Z":
        probs = state.probabilities().reshape((2,) * n)
        out = np.empty(n)
        for j in range(n):
            marg = probs.sum(axis=tuple(a for a in range(n) if a != j))
            out[j] = marg[0] - marg[1]
        return out
    return np.array([expect_pauli(state, j, axis) for j in range(n)])


def energy(model: SpinChainModel, state: Statevector) -> float:
    op = PauliSumOperator(model)
    return float(np.vdot(state.data, op.matvec(state.data)).real)


def fidelity(a: Statevector, b: Statevector) -> float:
    return float(abs(np.vdot(a.data, b.data)) ** 2)
