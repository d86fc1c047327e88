"""Spin-1/2 chain Hamiltonians stored as weighted Pauli-term lists.

Convention: S^a = sigma^a / 2 on every site, and every term coefficient already
contains the full prefactor of the corresponding sigma-product.  The term list
alone therefore defines H, e.g. ``2J S.S -> (J/2)(XX + YY + ZZ)``.

Site ``s`` of an ``n``-site chain is stored in bit ``n - 1 - s`` of a basis
index (site 0 is the most significant qubit), so ``psi.reshape([2] * n)`` has
axis ``s`` for site ``s``.  ``|0>`` is spin up (sigma^z = +1).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import InvalidModelError, SizeLimitError

AXES = ("X", "Y", "Z")
DENSE_LIMIT = 14


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * prod(sigma^axis_site)`` over one or two sites."""

    coefficient: float
    sites: tuple[tuple[int, str], ...]

    def __post_init__(self):
        if not 1 <= len(self.sites) <= 2:
            raise InvalidModelError(f"term must act on 1 or 2 sites, got {self.sites}")
        idx = [s for s, _ in self.sites]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidModelError(f"site indices must be strictly increasing: {idx}")
        if any(ax not in AXES for _, ax in self.sites):
            raise InvalidModelError(f"unknown axis in {self.sites}")
        if not math.isfinite(self.coefficient) or self.coefficient == 0.0:
            raise InvalidModelError(f"coefficient must be finite and nonzero, got {self.coefficient}")

    @property
    def site_indices(self) -> tuple[int, ...]:
        return tuple(s for s, _ in self.sites)

    @property
    def axes(self) -> str:
        return "".join(ax for _, ax in self.sites)

    def to_text(self) -> str:
        return " ".join([f"{self.coefficient:.17g}"] + [f"{s}:{ax}" for s, ax in self.sites])

    @classmethod
    def from_text(cls, line: str) -> "PauliTerm":
        parts = line.split()
        if len(parts) < 2:
            raise InvalidModelError(f"malformed term line: {line!r}")
        sites = []
        for token in parts[1:]:
            s, _, ax = token.partition(":")
            sites.append((int(s), ax.upper()))
        return cls(float(parts[0]), tuple(sites))


@dataclass(frozen=True)
class Couplings:
    J: float = 1.0
    epsilon: float = 1.0
    Jp: float = 0.0
    epsilonp: float = 0.0


@dataclass(frozen=True)
class SpinChainModel:
    n: int
    terms: tuple[PauliTerm, ...]
    couplings: Couplings = field(default_factory=Couplings)
    boundary: str = "open"
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidModelError("model needs at least one site")
        if self.boundary != "open":
            raise InvalidModelError("only open boundary conditions are supported")
        for t in self.terms:
            if t.site_indices[-1] >= self.n:
                raise InvalidModelError(f"term {t.to_text()} exceeds chain length {self.n}")

    @property
    def max_range(self) -> int:
        return max((t.site_indices[-1] - t.site_indices[0] for t in self.terms), default=0)

    @property
    def is_isotropic(self) -> bool:
        """True for the SU(2)-symmetric nearest-neighbour Heisenberg chain."""
        c = self.couplings
        return self.max_range <= 1 and c.Jp == 0.0 and c.epsilon == 1.0

    def to_text(self) -> str:
        lines = [f"# n={self.n} name={self.name}"]
        lines += [t.to_text() for t in self.terms]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, n: int | None = None) -> "SpinChainModel":
        terms = []
        header_n = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    if token.startswith("n="):
                        header_n = int(token[2:])
                continue
            terms.append(PauliTerm.from_text(line))
        size = n if n is not None else header_n
        if size is None:
            size = 1 + max(t.site_indices[-1] for t in terms)
        return cls(size, tuple(terms))


def _pair_terms(i: int, j: int, cxy: float, cz: float) -> list[PauliTerm]:
    out = []
    if cxy != 0.0:
        out.append(PauliTerm(cxy, ((i, "X"), (j, "X"))))
        out.append(PauliTerm(cxy, ((i, "Y"), (j, "Y"))))
    if cz != 0.0:
        out.append(PauliTerm(cz, ((i, "Z"), (j, "Z"))))
    return out


def build_nn_xxz(n: int, J: float = 1.0, epsilon: float = 1.0) -> SpinChainModel:
    """``H = 2J sum_i [S^x S^x + S^y S^y + epsilon S^z S^z]`` on an open chain."""
    if n < 2:
        raise InvalidModelError("nearest-neighbour chain needs n >= 2")
    if not math.isfinite(J):
        raise InvalidModelError("J must be finite")
    terms = []
    for i in range(n - 1):
        terms += _pair_terms(i, i + 1, 2 * J / 4, 2 * J * epsilon / 4)
    return SpinChainModel(n, tuple(terms), Couplings(J, epsilon, 0.0, 0.0), name="nn_xxz")


def build_nnn_xxz(
    n: int, J: float = 1.0, epsilon: float = 1.0, Jp: float = 0.0, epsilonp: float = 0.0
) -> SpinChainModel:
    """Ising-like XXZ chain with a ferromagnetic next-nearest-neighbour block.

    Here the anisotropy multiplies the transverse (XX, YY) parts, unlike
    :func:`build_nn_xxz`.  The NNN sum runs over ``i = 0 .. n-3`` on the open
    chain.
    """
    if n < 2:
        raise InvalidModelError("chain needs n >= 2")
    if Jp != 0.0 and n < 3:
        raise InvalidModelError("next-nearest-neighbour coupling needs n >= 3")
    if not 0.0 <= epsilon <= 1.0:
        warnings.warn(f"epsilon={epsilon} outside the Ising-like domain [0, 1]", stacklevel=2)
    terms = []
    for i in range(n - 1):
        terms += _pair_terms(i, i + 1, 2 * J * epsilon / 4, 2 * J / 4)
    if Jp != 0.0:
        for i in range(n - 2):
            terms += _pair_terms(i, i + 2, -2 * Jp * epsilonp / 4, -2 * Jp / 4)
    return SpinChainModel(n, tuple(terms), Couplings(J, epsilon, Jp, epsilonp), name="nnn_xxz")


@dataclass(frozen=True)
class ModelPreset:
    name: str
    nnn_form: bool
    epsilon: float
    jp_ratio: float
    epsilonp: float
    dt: float
    steps: int
    order: int
    initial: str

    def build(self, n: int, J: float = 1.0) -> SpinChainModel:
        if self.nnn_form:
            model = build_nnn_xxz(n, J, self.epsilon, self.jp_ratio * J, self.epsilonp)
        else:
            model = build_nn_xxz(n, J, self.epsilon)
        return SpinChainModel(model.n, model.terms, model.couplings, name=self.name)


PRESETS: dict[str, ModelPreset] = {
    "xx": ModelPreset("xx", False, 0.0, 0.0, 0.0, 0.6, 30, 2, "singlet_product"),
    "kcuf3": ModelPreset("kcuf3", False, 1.0, 0.0, 0.0, 0.6, 20, 2, "singlet_product"),
    "two_soliton": ModelPreset("two_soliton", True, 0.145, 0.0, 0.0, 0.8, 30, 1, "neel"),
    "cscox3": ModelPreset("cscox3", True, 0.145, 0.095, 0.145, 0.8, 30, 1, "neel"),
}


def preset_model(name: str, n: int, J: float = 1.0) -> SpinChainModel:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise InvalidModelError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return preset.build(n, J)


# ---------------------------------------------------------------------------
# matrix assembly


def _masks(term: PauliTerm, n: int) -> tuple[int, int, int]:
    xmask = zmask = 0
    ny = 0
    for s, ax in term.sites:
        bit = 1 << (n - 1 - s)
        if ax in "XY":
            xmask |= bit
        if ax in "YZ":
            zmask |= bit
        ny += ax == "Y"
    return xmask, zmask, ny


def _parity(indices: np.ndarray, mask: int) -> np.ndarray:
    out = np.zeros(indices.shape, dtype=np.int8)
    m = mask
    while m:
        low = m & -m
        out ^= ((indices & low) != 0).astype(np.int8)
        m ^= low
    return out


class PauliSumOperator:
    """Matrix-free action of a Pauli-term Hamiltonian.

    ``(H v)[b] = sum_x c_x[b] v[b ^ x]``, one coefficient vector per distinct
    flip mask ``x``.
    """

    def __init__(self, model: SpinChainModel):
        n = model.n
        self.n = n
        self.dim = 1 << n
        idx = np.arange(self.dim, dtype=np.int64)
        groups: dict[int, list[tuple[PauliTerm, int, int]]] = {}
        for t in model.terms:
            x, z, ny = _masks(t, n)
            groups.setdefault(x, []).append((t, z, ny))
        self.real = all(ny % 2 == 0 for g in groups.values() for _, _, ny in g)
        dtype = np.float64 if self.real else np.complex128
        self.flips: list[tuple[tuple[int, ...], np.ndarray]] = []
        self.diagonal = np.zeros(self.dim, dtype=dtype)
        for x, group in groups.items():
            src = idx ^ x
            coeff = np.zeros(self.dim, dtype=dtype)
            for t, z, ny in group:
                sign = 1.0 - 2.0 * _parity(src, z)
                phase = (1j) ** ny
                coeff += (t.coefficient * (phase.real if self.real else phase)) * sign
            if x == 0:
                self.diagonal += coeff
            else:
                axes = tuple(s for s in range(n) if x & (1 << (n - 1 - s)))
                self.flips.append((axes, coeff))
        self.dtype = np.result_type(dtype, np.float64)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v).reshape(-1)
        out = self.diagonal * v
        shaped = v.reshape((2,) * self.n)
        for axes, coeff in self.flips:
            out += coeff * np.flip(shaped, axis=axes).reshape(-1)
        return out

    def linear_operator(self) -> scipy.sparse.linalg.LinearOperator:
        return scipy.sparse.linalg.LinearOperator(
            (self.dim, self.dim), matvec=self.matvec, dtype=self.dtype
        )

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        idx = np.arange(self.dim, dtype=np.int64)
        rows = [idx]
        cols = [idx]
        vals = [self.diagonal]
        n = self.n
        for axes, coeff in self.flips:
            x = sum(1 << (n - 1 - s) for s in axes)
            rows.append(idx)
            cols.append(idx ^ x)
            vals.append(coeff)
        mat = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.dim, self.dim),
        )
        mat = mat.tocsr()
        mat.eliminate_zeros()
        return mat


def hamiltonian_sparse(model: SpinChainModel) -> scipy.sparse.csr_matrix:
    return PauliSumOperator(model).to_sparse()


def hamiltonian_dense(model: SpinChainModel) -> np.ndarray:
    if model.n > DENSE_LIMIT:
        raise SizeLimitError(f"dense Hamiltonian limited to n <= {DENSE_LIMIT}, got {model.n}")
    return hamiltonian_sparse(model).toarray()


def total_sz_diagonal(n: int) -> np.ndarray:
    """Diagonal of ``sum_s sigma^z_s``."""
    idx = np.arange(1 << n, dtype=np.int64)
    ones = np.zeros(idx.shape, dtype=np.int64)
    for s in range(n):
        ones += (idx >> (n - 1 - s)) & 1
    return (n - 2 * ones).astype(np.float64)


@lru_cache(maxsize=8)
def ground_energy_dense(model: SpinChainModel) -> float:
    """Lowest eigenvalue from a full dense diagonalization (test oracle)."""
    if model.n > DENSE_LIMIT:
        raise SizeLimitError(f"dense diagonalization limited to n <= {DENSE_LIMIT}, got {model.n}")
    H = hamiltonian_dense(model)
    vals = scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])


def iter_pairs(model: SpinChainModel) -> Iterable[tuple[tuple[int, int], dict[str, float]]]:
    """Group two-site terms by site pair: ``((i, j), {"XX": c, ...})``."""
    pairs: dict[tuple[int, int], dict[str, float]] = {}
    for t in model.terms:
        if len(t.sites) == 2:
            d = pairs.setdefault(t.site_indices, {})
            d[t.axes] = d.get(t.axes, 0.0) + t.coefficient
    return sorted(pairs.items())
