"""Gates and Trotter plans shared by the statevector and MPS engines.

A plan is the explicit gate list of one Trotter step.  Both engines consume the
same list, and the noise module counts two-qubit gates from it, so it is
materialized once here.  Two-site exponentials always act on adjacent
positions; distance-2 couplings are realized as SWAP . gate . SWAP.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import StructuralError
from .model import SpinChainModel, iter_pairs

SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


def xyz_exponential(theta_x, theta_y, theta_z) -> np.ndarray:
    """Closed form of ``exp(-i (tx XX + ty YY + tz ZZ) / 2)``.

    XX, YY and ZZ commute and are diagonal in the Bell basis, so the 4x4
    exponential splits into the {00, 11} and {01, 10} blocks.  Complex angles
    give imaginary-time gates.
    """
    a, b, c = theta_x / 2, theta_y / 2, theta_z / 2
    m = np.zeros((4, 4), dtype=np.complex128)
    em, ep = np.exp(-1j * c), np.exp(1j * c)
    m[0, 0] = m[3, 3] = em * np.cos(a - b)
    m[0, 3] = m[3, 0] = -1j * em * np.sin(a - b)
    m[1, 1] = m[2, 2] = ep * np.cos(a + b)
    m[1, 2] = m[2, 1] = -1j * ep * np.sin(a + b)
    return m


def rotation(theta_x, theta_y, theta_z) -> np.ndarray:
    gen = theta_x * PAULI["X"] + theta_y * PAULI["Y"] + theta_z * PAULI["Z"]
    return scipy.linalg.expm(-0.5j * gen)


@dataclass(frozen=True)
class Gate:
    """One gate of a circuit.

    kind is ``"xyz"`` (two-site XX+YY+ZZ block), ``"swap"`` or ``"rot"``
    (single-site rotation).  ``angles`` are ``(theta_x, theta_y, theta_z)``.
    """

    kind: str
    sites: tuple[int, ...]
    angles: tuple = (0.0, 0.0, 0.0)

    @property
    def two_qubit(self) -> bool:
        return len(self.sites) == 2

    def matrix(self) -> np.ndarray:
        if self.kind == "xyz":
            return xyz_exponential(*self.angles)
        if self.kind == "swap":
            return SWAP
        if self.kind == "rot":
            return rotation(*self.angles)
        raise StructuralError(f"unknown gate kind {self.kind!r}")

    def inverse(self) -> "Gate":
        if self.kind == "swap":
            return self
        return Gate(self.kind, self.sites, tuple(-np.conj(a) for a in self.angles))


# ---------------------------------------------------------------------------
# sublayer structure

Coupling = dict  # {"XX": c, "YY": c, "ZZ": c}


@dataclass(frozen=True)
class Sublayer:
    """A set of mutually commuting couplings applied together.

    ``label`` is one of ``even``, ``odd``, ``nnn_a``, ``nnn_b``, ``single``.
    ``entries`` are ``(sites, coupling)`` pairs in chain coordinates.
    """

    label: str
    entries: tuple

    def gates(self, angle_of: Callable[[tuple, Coupling], tuple]) -> list[Gate]:
        """Materialize gates; ``angle_of(sites, coupling)`` returns the three angles."""
        if self.label == "single":
            return [Gate("rot", sites, angle_of(sites, c)) for sites, c in self.entries]
        if self.label in ("even", "odd"):
            return [Gate("xyz", sites, angle_of(sites, c)) for sites, c in self.entries]
        # distance-2 pairs inside blocks [s, s+3]: SWAP(s+1, s+2) makes
        # (s, s+2) and (s+1, s+3) adjacent at positions (s, s+1), (s+2, s+3)
        by_block: dict[int, list] = {}
        for sites, c in self.entries:
            i = sites[0]
            s = i - (i % 2)
            by_block.setdefault(s, []).append((sites, c))
        swaps = [Gate("swap", (s + 1, s + 2)) for s in sorted(by_block)]
        body = []
        for s in sorted(by_block):
            for sites, c in sorted(by_block[s]):
                pos = (s, s + 1) if sites[0] == s else (s + 2, s + 3)
                body.append(Gate("xyz", pos, angle_of(sites, c)))
        return swaps + body + swaps


def sublayers(model: SpinChainModel) -> list[Sublayer]:
    """Split the model couplings into the commuting sublayers of one step."""
    groups: dict[str, list] = {"even": [], "odd": [], "nnn_a": [], "nnn_b": []}
    for (i, j), coupling in iter_pairs(model):
        bad = set(coupling) - {"XX", "YY", "ZZ"}
        if bad:
            raise StructuralError(f"unsupported two-site terms {sorted(bad)} on {(i, j)}")
        if j - i == 1:
            groups["even" if i % 2 == 0 else "odd"].append(((i, j), coupling))
        elif j - i == 2:
            groups["nnn_a" if i % 4 in (0, 1) else "nnn_b"].append(((i, j), coupling))
        else:
            raise StructuralError(f"couplings beyond distance 2 are not supported: {(i, j)}")
    singles: dict[int, dict] = {}
    for t in model.terms:
        if len(t.sites) == 1:
            d = singles.setdefault(t.site_indices[0], {})
            d[t.axes] = d.get(t.axes, 0.0) + t.coefficient
    out = [Sublayer(k, tuple(v)) for k, v in groups.items() if v]
    if singles:
        out.append(Sublayer("single", tuple(((s,), c) for s, c in sorted(singles.items()))))
    return out


def _physical_angles(dt_eff):
    def angle_of(sites, coupling):
        if len(sites) == 1:
            return tuple(2 * coupling.get(a, 0.0) * dt_eff for a in "XYZ")
        return tuple(2 * coupling.get(a + a, 0.0) * dt_eff for a in "XYZ")

    return angle_of


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class TrotterPlan:
    """Gate list for ``steps`` identical Trotter steps of length ``dt``.

    ``layers`` holds the per-sublayer gate groups of one step in application
    order; ``step_gates`` is their concatenation.
    """

    n: int
    order: int
    dt: complex
    steps: int
    layers: tuple[tuple[Gate, ...], ...]
    terms: tuple

    @property
    def step_gates(self) -> tuple[Gate, ...]:
        return tuple(g for layer in self.layers for g in layer)

    @property
    def two_qubit_gates_per_step(self) -> int:
        return sum(g.two_qubit for g in self.step_gates)

    def all_gates(self) -> list[tuple[int, Gate]]:
        """Flattened ``(step, gate)`` list over all steps (steps counted from 1)."""
        gates = self.step_gates
        return [(k, g) for k in range(1, self.steps + 1) for g in gates]

    def check_model(self, model: SpinChainModel) -> None:
        if model.n != self.n or tuple(model.terms) != self.terms:
            raise StructuralError("Trotter plan was built for a different model")

    def with_steps(self, steps: int) -> "TrotterPlan":
        return TrotterPlan(self.n, self.order, self.dt, steps, self.layers, self.terms)


def build_plan(
    model: SpinChainModel, dt: complex, steps: int = 1, order: int = 2
) -> TrotterPlan:
    """Trotter plan for ``exp(-i H dt)`` per step.

    order 1: every sublayer once with ``dt``.  order 2: forward half-steps then
    the mirrored sequence, with the central sublayer merged into one
    full-``dt`` application, so each step is a palindrome.  Pass
    ``dt = -1j * tau`` for imaginary-time steps ``exp(-tau H)``.
    """
    if order not in (1, 2):
        raise StructuralError(f"Trotter order must be 1 or 2, got {order}")
    if steps < 0:
        raise StructuralError("steps must be non-negative")
    subs = sublayers(model)
    if order == 1:
        layers = [tuple(s.gates(_physical_angles(dt))) for s in subs]
    else:
        half = _physical_angles(dt / 2)
        fwd = [tuple(s.gates(half)) for s in subs[:-1]]
        mid = [tuple(subs[-1].gates(_physical_angles(dt)))] if subs else []
        back = [tuple(reversed(layer)) for layer in reversed(fwd)]
        layers = fwd + mid + back
    return TrotterPlan(model.n, order, dt, steps, tuple(layers), tuple(model.terms))


def inverse_gates(gates: Sequence[Gate]) -> list[Gate]:
    return [g.inverse() for g in reversed(gates)]


def forward_lightcone(gates: Sequence[Gate], start: int) -> set[int]:
    """Sites causally reachable from ``start`` through the gate sequence."""
    reach = {start}
    for g in gates:
        if g.two_qubit and reach.intersection(g.sites):
            reach.update(g.sites)
    return reach


def backward_lightcone_gates(gates: Sequence[Gate], site: int) -> list[int]:
    """Indices of two-qubit gates in the backward light cone of ``site``."""
    reach = {site}
    hit = []
    for idx in range(len(gates) - 1, -1, -1):
        g = gates[idx]
        if g.two_qubit and reach.intersection(g.sites):
            reach.update(g.sites)
            hit.append(idx)
    return hit[::-1]
