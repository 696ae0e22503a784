"""Preferences over lotteries, marginals, agent swaps and envy."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidInstanceError, InvarianceViolationError
from .instance import DeterministicSpace

EU = "eu"
MAXMIN = "maxmin"


@dataclass(frozen=True)
class Lottery:
    """Sparse probability vector over a space, as ``(allocation index, weight)`` pairs.

    Weights may be Fractions (exact) or floats. Pairs are kept sorted by index.
    """

    support: tuple

    def __post_init__(self):
        pairs = tuple(sorted((int(k), w) for k, w in self.support))
        object.__setattr__(self, "support", pairs)
        idx = [k for k, _ in pairs]
        if len(set(idx)) != len(idx):
            raise ValueError("lottery indices must be distinct")
        if any(w < 0 for _, w in pairs):
            raise ValueError("lottery weights must be nonnegative")
        total = sum(w for _, w in pairs)
        if abs(total - 1) > 1e-12:
            raise ValueError(f"lottery weights sum to {float(total)!r}, not 1")

    @classmethod
    def point(cls, index: int) -> "Lottery":
        return cls(((index, Fraction(1)),))

    @classmethod
    def from_weights(cls, weights: Mapping[int, Real] | Sequence[tuple[int, Real]],
                     drop_below: float = 0.0) -> "Lottery":
        """Build from raw weights, dropping entries ``<= drop_below`` and renormalizing."""
        items = weights.items() if isinstance(weights, Mapping) else weights
        kept = [(k, w) for k, w in items if w > drop_below]
        total = sum(w for _, w in kept)
        if not kept or total <= 0:
            raise ValueError("lottery has no positive weight")
        if all(isinstance(w, (int, Fraction)) for _, w in kept):
            return cls(tuple((k, Fraction(w) / total) for k, w in kept))
        return cls(tuple((k, float(w) / float(total)) for k, w in kept))

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.support)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(w, (int, Fraction)) for _, w in self.support)

    def weight_array(self) -> np.ndarray:
        return np.array([float(w) for _, w in self.support])

    def validate_for(self, space: DeterministicSpace) -> None:
        n = len(space)
        for k, _ in self.support:
            if not 0 <= k < n:
                raise ValueError(f"lottery index {k} outside space of size {n}")

    def mix(self, other: "Lottery", alpha) -> "Lottery":
        """``alpha * self + (1 - alpha) * other``."""
        acc: dict[int, object] = {}
        for k, w in self.support:
            acc[k] = acc.get(k, 0) + alpha * w
        for k, w in other.support:
            acc[k] = acc.get(k, 0) + (1 - alpha) * w
        return Lottery(tuple((k, w) for k, w in acc.items() if w != 0))


@dataclass(frozen=True)
class Marginal:
    """Probability masses of one agent's consumption over items."""

    weights: Mapping

    def __post_init__(self):
        if any(v < 0 for v in self.weights.values()):
            raise ValueError("marginal masses must be nonnegative")
        if abs(sum(self.weights.values()) - 1) > 1e-12:
            raise ValueError("marginal masses must sum to 1")

    def __getitem__(self, item):
        return self.weights.get(item, 0)

    def as_array(self, items: Sequence) -> np.ndarray:
        return np.array([float(self.weights.get(y, 0)) for y in items])


@dataclass(frozen=True)
class Preference:
    """Expected utility (one index) or maxmin over a set of indices."""

    kind: str
    indices: tuple

    def __post_init__(self):
        if self.kind not in (EU, MAXMIN):
            raise ValueError(f"unknown preference kind {self.kind!r}")
        if not self.indices:
            raise ValueError("a preference needs at least one index")
        if self.kind == EU and len(self.indices) != 1:
            raise ValueError("an expected-utility preference has exactly one index")
        object.__setattr__(self, "indices", tuple(dict(u) for u in self.indices))

    @classmethod
    def eu(cls, index: Mapping) -> "Preference":
        return cls(EU, (index,))

    @classmethod
    def maxmin(cls, indices: Sequence[Mapping]) -> "Preference":
        return cls(MAXMIN, tuple(indices))

    def matrix(self, items: Sequence) -> np.ndarray:
        """Index values as a ``K x M`` array aligned to ``items``."""
        try:
            return np.array([[float(u[y]) for y in items] for u in self.indices])
        except KeyError as exc:
            raise InvalidInstanceError(f"item {exc.args[0]!r} missing from a utility index") from None

    def value(self, masses: np.ndarray, items: Sequence) -> float:
        return float(np.min(self.matrix(items) @ masses))


def marginal(space: DeterministicSpace, p: Lottery, j: int) -> Marginal:
    if not 0 <= j < space.n_agents:
        raise IndexError(f"agent {j} out of range for {space.n_agents} agents")
    p.validate_for(space)
    acc: dict = {}
    for k, w in p.support:
        y = space.allocations[k][j]
        acc[y] = acc.get(y, 0) + w
    return Marginal(acc)


def marginal_matrix(space: DeterministicSpace, p: Lottery) -> np.ndarray:
    """``N x M`` float array of all marginals aligned to ``space.items``."""
    p.validate_for(space)
    out = np.zeros((space.n_agents, len(space.items)))
    idx = np.array(p.indices, dtype=np.intp)
    w = p.weight_array()
    rows = np.arange(space.n_agents)
    for k, wk in zip(idx, w):
        out[rows, space.coords[k]] += wk
    return out


def utility(pref: Preference, m: Marginal) -> float:
    """``<u, m>`` for expected utility, minimum over indices for maxmin."""
    vals = []
    for u in pref.indices:
        total = 0.0
        for y, w in m.weights.items():
            if y not in u:
                raise InvalidInstanceError(f"item {y!r} missing from a utility index")
            total += float(u[y]) * float(w)
        vals.append(total)
    return min(vals)


def swap(space: DeterministicSpace, p: Lottery, i: int, j: int) -> Lottery:
    """Pushforward of p under exchanging agents i and j."""
    n = space.n_agents
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError("agent index out of range")
    if i == j:
        return p
    out = []
    for k, w in p.support:
        y = space.swapped(space.allocations[k], i, j)
        if y not in space.index:
            raise InvarianceViolationError(
                f"swapping agents {i},{j} maps {space.allocations[k]!r} outside the space")
        out.append((space.index[y], w))
    return Lottery(tuple(out))


def utility_table(space: DeterministicSpace, prefs: Sequence[Preference]) -> list[np.ndarray]:
    """Per-agent ``K_j x M`` index matrices aligned to ``space.items``."""
    if len(prefs) != space.n_agents:
        raise InvalidInstanceError(f"{len(prefs)} preferences for {space.n_agents} agents")
    return [pref.matrix(space.items) for pref in prefs]


def envy_from_marginals(tables: Sequence[np.ndarray], margs: np.ndarray) -> np.ndarray:
    """Envy matrix ``E[j, k] = U_j(p^k) - U_j(p^j)`` from an ``N x M`` marginal array."""
    n = len(tables)
    util = np.empty((n, n))
    for j, u in enumerate(tables):
        util[j] = np.min(u @ margs.T, axis=0)
    envy = util - np.diag(util)[:, None]
    np.fill_diagonal(envy, 0.0)
    return envy


def envy_matrix(space: DeterministicSpace, p: Lottery, prefs: Sequence[Preference]) -> np.ndarray:
    """Entry ``(j, k)`` is how much agent j prefers agent k's marginal to its own."""
    return envy_from_marginals(utility_table(space, prefs), marginal_matrix(space, p))


def max_envy(space: DeterministicSpace, p: Lottery, prefs: Sequence[Preference]) -> float:
    return float(envy_matrix(space, p, prefs).max())


def utilities(space: DeterministicSpace, p: Lottery, prefs: Sequence[Preference]) -> np.ndarray:
    margs = marginal_matrix(space, p)
    return np.array([np.min(u @ margs[j]) for j, u in enumerate(utility_table(space, prefs))])
