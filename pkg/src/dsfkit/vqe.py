"""Variational ground-state preparation with a Hamiltonian-variational ansatz.

One layer repeats the sublayer pattern of a Trotter step (odd bonds first,
so the first layer acts nontrivially on a singlet product), with two free
angles per sublayer: one shared by XX and YY, one for ZZ.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
import scipy.optimize

from .circuit import Gate, sublayers
from .errors import StructuralError
from .exact import (
    Statevector,
    apply_gates,
    lanczos_ground_state,
    low_energy_manifold,
    neel_state,
    singlet_product_state,
)
from .model import SpinChainModel

logger = logging.getLogger(__name__)

ANGLES_PER_SUBLAYER = 2
LAYER_ORDER = ("odd", "even", "nnn_a", "nnn_b")


@dataclass
class AnsatzSpec:
    initial: str
    layers: int
    params: np.ndarray | None = None

    def __post_init__(self):
        if self.initial not in ("singlet_product", "neel"):
            raise ValueError(f"unknown initial state {self.initial!r}")
        if self.layers < 0:
            raise ValueError("layers must be non-negative")
        if self.params is not None:
            self.params = np.asarray(self.params, dtype=np.float64).reshape(-1)


def layer_sublayers(model: SpinChainModel):
    subs = {s.label: s for s in sublayers(model) if s.label != "single"}
    return [subs[k] for k in LAYER_ORDER if k in subs]


def parameter_count(model: SpinChainModel, layers: int) -> int:
    return layers * ANGLES_PER_SUBLAYER * len(layer_sublayers(model))


def initial_state(kind: str, n: int) -> Statevector:
    if kind == "singlet_product":
        return singlet_product_state(n)
    return neel_state(n)


def ansatz_gates(spec: AnsatzSpec, model: SpinChainModel, params=None) -> list[Gate]:
    params = spec.params if params is None else np.asarray(params, dtype=np.float64)
    expected = parameter_count(model, spec.layers)
    if params is None:
        params = np.zeros(expected)
    if len(params) != expected:
        raise StructuralError(f"ansatz expects {expected} parameters, got {len(params)}")
    subs = layer_sublayers(model)
    gates: list[Gate] = []
    idx = 0
    for _ in range(spec.layers):
        for sub in subs:
            txy, tz = params[idx], params[idx + 1]
            idx += 2
            gates.extend(sub.gates(lambda sites, c, a=txy, b=tz: (a, a, b)))
    return gates


def apply_ansatz(spec: AnsatzSpec, model: SpinChainModel, params=None, engine: str = "exact"):
    """State produced by the ansatz (statevector, or MPS for ``engine="mps"``)."""
    if spec.initial == "singlet_product" and model.n % 2:
        raise StructuralError("singlet product initial state needs even n")
    gates = ansatz_gates(spec, model, params)
    if engine == "mps":
        from .mps import MPS, apply_gates as mps_apply

        psi = MPS.singlet_product(model.n) if spec.initial == "singlet_product" else MPS.neel(model.n)
        psi.canonicalize(0)
        return mps_apply(psi, gates)
    return apply_gates(initial_state(spec.initial, model.n), gates)


def _reference_list(reference) -> list[Statevector]:
    refs = [reference] if isinstance(reference, Statevector) else list(reference)
    for r in refs:
        if abs(r.norm() - 1) > 1e-8:
            raise StructuralError("reference state is not normalized")
    return refs


def manifold_fidelity(state: Statevector, reference) -> float:
    """Weight of ``state`` in the span of the (orthonormal) reference states."""
    refs = _reference_list(reference)
    return float(sum(abs(np.vdot(r.data, state.data)) ** 2 for r in refs))


def reference_states(model: SpinChainModel, gap_tol: float = 1e-2) -> list[Statevector]:
    """Lowest eigenstate, or the quasi-degenerate manifold within ``gap_tol``."""
    if model.n <= 2:
        return [lanczos_ground_state(model)[0]]
    states, _ = low_energy_manifold(model, k=2, gap_tol=gap_tol)
    return states


@dataclass
class OptimizationResult:
    params: np.ndarray
    fidelity: float
    evaluations: int
    budget_exhausted: bool
    history: list = field(default_factory=list)


def optimize_fidelity(
    spec: AnsatzSpec,
    model: SpinChainModel,
    reference,
    budget: int = 2000,
    seed: int = 0,
    restarts: int = 2,
    x0=None,
    target: float = 1 - 1e-10,
) -> OptimizationResult:
    """Maximize the fidelity with ``reference`` by Powell searches with restarts.

    ``x0`` warm-starts the first search (default: ``spec.params`` or zeros);
    later restarts perturb the best point found so far.  Running out of
    ``budget`` evaluations returns the best point with ``budget_exhausted``.
    """
    refs = _reference_list(reference)
    npar = parameter_count(model, spec.layers)
    rng = np.random.default_rng(seed)
    if x0 is None:
        x0 = spec.params if spec.params is not None else np.zeros(npar)
    x0 = np.asarray(x0, dtype=np.float64)
    if len(x0) != npar:
        raise StructuralError(f"ansatz expects {npar} parameters, got {len(x0)}")
    psi0 = initial_state(spec.initial, model.n)
    gate_spec = AnsatzSpec(spec.initial, spec.layers)

    state = {"evals": 0, "best_f": -1.0, "best_x": x0.copy()}

    def loss(x):
        if state["evals"] >= budget:
            raise _BudgetExhausted
        state["evals"] += 1
        psi = apply_gates(psi0.copy(), ansatz_gates(gate_spec, model, x))
        f = manifold_fidelity(psi, refs)
        if f > state["best_f"]:
            state["best_f"], state["best_x"] = f, np.array(x, dtype=np.float64)
        return -f

    exhausted = False
    history = []
    if npar == 0:
        loss(x0)
    else:
        start = x0
        for attempt in range(restarts + 1):
            try:
                scipy.optimize.minimize(
                    loss, start, method="Powell",
                    options={"maxfev": budget, "xtol": 1e-6, "ftol": 1e-12},
                )
            except _BudgetExhausted:
                exhausted = True
            history.append(state["best_f"])
            if exhausted or state["best_f"] >= target:
                break
            start = state["best_x"] + rng.normal(0, 0.3, npar)
    logger.info("ansatz L=%d: fidelity %.6f after %d evaluations", spec.layers, state["best_f"], state["evals"])
    return OptimizationResult(state["best_x"], state["best_f"], state["evals"], exhausted, history)


class _BudgetExhausted(Exception):
    pass


def fidelity_vs_layers_scan(
    model_factory,
    ns: Sequence[int],
    layers: Sequence[int],
    initial: str = "singlet_product",
    budget: int = 2000,
    seed: int = 0,
) -> dict:
    """Fidelity table over ``(n, L)`` with warm starts.

    Within one ``n`` each new layer starts from the previous optimum with the
    added layer at zero angles (the identity), so fidelity cannot drop; the
    optimum for ``(n, L)`` also seeds ``(n_next, L)``.
    """
    table: dict[tuple[int, int], float] = {}
    params: dict[tuple[int, int], np.ndarray] = {}
    for ni, n in enumerate(ns):
        model = model_factory(n)
        refs = reference_states(model)
        prev = None
        for L in layers:
            npar = parameter_count(model, L)
            x0 = np.zeros(npar)
            if prev is not None:
                x0[: len(prev)] = prev
            if ni > 0 and (ns[ni - 1], L) in params:
                cand = params[(ns[ni - 1], L)]
                f_warm = manifold_fidelity(apply_ansatz(AnsatzSpec(initial, L), model, cand), refs)
                f_prev = manifold_fidelity(apply_ansatz(AnsatzSpec(initial, L), model, x0), refs)
                if f_warm > f_prev:
                    x0 = cand.copy()
            res = optimize_fidelity(AnsatzSpec(initial, L), model, refs, budget, seed, x0=x0)
            table[(n, L)] = res.fidelity
            params[(n, L)] = res.params
            prev = res.params
    return {"fidelity": table, "params": params}


# ---------------------------------------------------------------------------
# parameter files


def write_parameters(fh: TextIO, entries: dict) -> None:
    """One line per ``(preset, n, L)``: ``preset n L p1 p2 ...``."""
    for (preset, n, L), vec in sorted(entries.items()):
        vals = " ".join(f"{x:.17g}" for x in np.asarray(vec).reshape(-1))
        fh.write(f"{preset} {n} {L} {vals}".rstrip() + "\n")


def read_parameters(fh: TextIO) -> dict:
    out = {}
    for line in fh:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        out[(parts[0], int(parts[1]), int(parts[2]))] = np.array([float(x) for x in parts[3:]])
    return out
