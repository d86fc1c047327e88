"""Sampled global-depolarization noise with finite-shot readout.

For time step ``k`` and measured site ``j`` the two-qubit gates in the
backward light cone of the measurement are collected, and the survival
probability is ``prod(1 - p_i)`` over their (frozen, per-gate) error rates.
Each shot then comes from the clean distribution with that probability and
is a uniformly random bitstring otherwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import PAULI, Gate, TrotterPlan, backward_lightcone_gates
from .errors import StructuralError
from .exact import Statevector, apply_one_site
from .rgf import RgfGrid, center_site, protocol_states

logger = logging.getLogger(__name__)

MAX_GATE_ERROR = 0.5

# rotations taking the X / Y eigenbases to the computational basis
BASIS_CHANGE = {
    "Z": PAULI["I"],
    "X": np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2),
    "Y": np.array([[1, -1j], [1, 1j]], dtype=np.complex128) / np.sqrt(2),
}


@dataclass(frozen=True)
class NoiseSpec:
    two_qubit_error_mean: float
    two_qubit_error_std: float | None = None  # default mean / 5
    shots: int = 128000
    seed: int = 0
    extra_depolarization: float = 0.0

    def __post_init__(self):
        if not 0 <= self.two_qubit_error_mean < 1:
            raise ValueError("mean two-qubit error must lie in [0, 1)")
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if not 0 <= self.extra_depolarization < 1:
            raise ValueError("extra depolarization must lie in [0, 1)")

    @property
    def std(self) -> float:
        if self.two_qubit_error_std is None:
            return self.two_qubit_error_mean / 5
        return self.two_qubit_error_std


def circuit_gates(plan: TrotterPlan, k: int, prep_gates: Sequence[Gate] = ()) -> list[Gate]:
    """Preparation gates followed by ``k`` Trotter steps."""
    return list(prep_gates) + list(plan.step_gates) * k


def lightcone_gate_count(
    plan: TrotterPlan, measured_site: int, k: int, prep_gates: Sequence[Gate] = ()
) -> int:
    """Two-qubit gates in the backward light cone of a measurement after ``k`` steps."""
    return len(backward_lightcone_gates(circuit_gates(plan, k, prep_gates), measured_site))


def survival_probability(gate_errors) -> float:
    errs = np.asarray(list(gate_errors), dtype=np.float64)
    if errs.size and (np.any(errs < 0) or np.any(errs >= 1)):
        raise ValueError("gate errors must lie in [0, 1)")
    return float(np.prod(1 - errs))


def draw_gate_errors(spec: NoiseSpec, count: int) -> np.ndarray:
    """One error per gate, Gaussian around the mean and clamped to [0, 0.5]."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0, 1]))
    errs = rng.normal(spec.two_qubit_error_mean, spec.std, size=count)
    return np.clip(errs, 0.0, MAX_GATE_ERROR)


def error_probabilities(
    plan: TrotterPlan, spec: NoiseSpec, n: int, prep_gates: Sequence[Gate] = ()
) -> np.ndarray:
    """``p[j, k] = 1 - prod(1 - p_i)`` over the light cone of site ``j`` at step ``k``.

    Errors are frozen per gate position of the full circuit, so the circuit
    for step ``k`` reuses the draws of its prefix.
    """
    full = circuit_gates(plan, plan.steps, prep_gates)
    errs = draw_gate_errors(spec, len(full))
    out = np.zeros((n, plan.steps + 1))
    for k in range(plan.steps + 1):
        gates = full[: len(prep_gates) + k * len(plan.step_gates)]
        for j in range(n):
            cone = backward_lightcone_gates(gates, j)
            p = 1 - survival_probability(errs[cone])
            out[j, k] = 1 - (1 - p) * (1 - spec.extra_depolarization)
    return out


# ---------------------------------------------------------------------------
# clean distributions


class DenseDistribution:
    """Computational-basis distribution of a statevector."""

    def __init__(self, probs: np.ndarray, n: int):
        self.n = n
        cdf = np.cumsum(probs)
        self._cdf = cdf / cdf[-1]

    @classmethod
    def from_state(cls, state: Statevector, axis: str = "Z") -> "DenseDistribution":
        psi = state
        if axis.upper() != "Z":
            psi = state.copy()
            for j in range(state.n):
                apply_one_site(psi, BASIS_CHANGE[axis.upper()], j)
        return cls(psi.probabilities(), state.n)

    def sample(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        idx = np.searchsorted(self._cdf, rng.random(shots), side="right")
        idx = np.minimum(idx, len(self._cdf) - 1)
        shifts = np.arange(self.n - 1, -1, -1)
        return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


class MpsDistribution:
    """Sequential sampling from an MPS."""

    def __init__(self, state, axis: str = "Z"):
        psi = state.copy()
        if axis.upper() != "Z":
            for j in range(psi.n):
                psi.apply_one_site(BASIS_CHANGE[axis.upper()], j)
        self.state = psi
        self.n = psi.n

    def sample(self, shots: int, rng: np.random.Generator) -> np.ndarray:
        from .mps import sample_bitstrings

        return sample_bitstrings(self.state, shots, rng)


def distribution_of(state, axis: str = "Z"):
    if isinstance(state, Statevector):
        return DenseDistribution.from_state(state, axis)
    return MpsDistribution(state, axis)


# ---------------------------------------------------------------------------
# noisy grids


def sample_noisy_grid(
    distributions: Sequence,
    plan: TrotterPlan,
    noise: NoiseSpec,
    alpha: str = "Z",
    beta: str = "Z",
    jc: int | None = None,
    background: np.ndarray | None = None,
    prep_gates: Sequence[Gate] = (),
) -> RgfGrid:
    """Shot-sampled ``<sigma^alpha_j>`` grid under the depolarization model.

    ``distributions[k]`` is the clean measurement distribution after step
    ``k`` (in the ``alpha`` eigenbasis).  Shot ``s`` at step ``k`` draws a
    uniform ``u_s``; for site ``j`` its bit is random when ``u_s < p[j, k]``
    and clean otherwise, which gives every site its own marginal damping.
    A ground-state ``background`` is subtracted after damping it by the same
    survival factor.
    """
    if len(distributions) != plan.steps + 1:
        raise StructuralError(f"need {plan.steps + 1} distributions, got {len(distributions)}")
    n = plan.n
    jc = center_site(n) if jc is None else jc
    probs = error_probabilities(plan, noise, n, prep_gates)
    values = np.zeros((n, plan.steps + 1), dtype=np.complex128)
    for k, dist in enumerate(distributions):
        if dist is None:
            raise StructuralError(f"distribution missing for step {k}")
        rng = np.random.default_rng(np.random.SeedSequence([noise.seed, k]))
        clean = dist.sample(noise.shots, rng)
        rand = rng.integers(0, 2, size=clean.shape, dtype=np.uint8)
        u = rng.random(noise.shots)
        noisy = np.where(u[:, None] < probs[None, :, k], rand, clean)
        est = 1.0 - 2.0 * noisy.mean(axis=0)
        if background is not None:
            est = est - (1 - probs[:, k]) * background
        values[:, k] = est
    meta = {
        "noise_mean": f"{noise.two_qubit_error_mean:.17g}",
        "noise_std": f"{noise.std:.17g}",
        "shots": noise.shots,
        "seed": noise.seed,
    }
    return RgfGrid(values, float(np.real(plan.dt)), jc, alpha.upper(), beta.upper(), "pauli", meta)


def clean_distributions(
    ground_state, model, plan: TrotterPlan, alpha: str = "Z", beta: str = "Z", jc: int | None = None
) -> list:
    """Measurement distributions of the protocol state after every step."""
    out = []
    for _, psi in protocol_states(ground_state, model, plan, beta, jc):
        out.append(distribution_of(psi, alpha))
    return out


def noisy_protocol(
    ground_state,
    model,
    plan: TrotterPlan,
    noise: NoiseSpec,
    alpha: str = "Z",
    beta: str = "Z",
    jc: int | None = None,
    prep_gates: Sequence[Gate] = (),
    distributions=None,
) -> RgfGrid:
    """Protocol run with noisy sampled readout; pass ``distributions`` to reuse them."""
    from .rgf import BACKGROUND_TOL, _measure

    if distributions is None:
        distributions = clean_distributions(ground_state, model, plan, alpha, beta, jc)
    background = _measure(ground_state.copy(), alpha.upper())
    if np.max(np.abs(background)) <= BACKGROUND_TOL:
        background = None
    return sample_noisy_grid(distributions, plan, noise, alpha, beta, jc, background, prep_gates)
