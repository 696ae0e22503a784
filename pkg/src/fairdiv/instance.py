"""Finite spaces of deterministic allocations and the generators for them.

An allocation is an N-tuple of item identifiers, one coordinate per agent.
Items within one space are mutually comparable (ints, tuples, strings,
Fractions) so that allocations sort lexicographically into a canonical order.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptySpaceError, InvalidInstanceError

Item = Hashable
Allocation = tuple


def item_label(item: Any) -> str:
    """Compact, stable text form of an item identifier."""
    if isinstance(item, str):
        return item
    if isinstance(item, Fraction):
        return str(item)
    if isinstance(item, (tuple, list, frozenset)):
        return "(" + ",".join(item_label(x) for x in item) + ")"
    return str(item)


@dataclass(frozen=True)
class ItemSpace:
    items: tuple

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise InvalidInstanceError("item identifiers must be unique")

    @property
    def dimension(self) -> int:
        return len(self.items)

    @cached_property
    def position(self) -> dict:
        return {y: k for k, y in enumerate(self.items)}

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return tuple(item_label(y) for y in self.items)


@dataclass(frozen=True)
class DeterministicSpace:
    """A finite feasible set X of N-tuples, in canonical (sorted) order.

    Use :meth:`build` to canonicalize arbitrary input; the raw constructor
    expects an already sorted, duplicate-free tuple.
    """

    n_agents: int
    allocations: tuple
    name: str = "explicit"
    params: Mapping[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.n_agents < 1:
            raise InvalidInstanceError("need at least one agent")
        if not self.allocations:
            raise EmptySpaceError(f"{self.name}: no feasible allocation")
        for x in self.allocations:
            if len(x) != self.n_agents:
                raise InvalidInstanceError(
                    f"allocation {x!r} has {len(x)} coordinates, expected {self.n_agents}")

    @classmethod
    def build(cls, n_agents: int, allocations: Iterable[Sequence], name: str = "explicit",
              params: Mapping[str, Any] | None = None) -> "DeterministicSpace":
        allocs = sorted({tuple(x) for x in allocations})
        return cls(n_agents, tuple(allocs), name, dict(params or {}))

    def __len__(self) -> int:
        return len(self.allocations)

    @cached_property
    def index(self) -> dict:
        return {x: k for k, x in enumerate(self.allocations)}

    @cached_property
    def item_space(self) -> ItemSpace:
        return ItemSpace(tuple(sorted({y for x in self.allocations for y in x})))

    @property
    def items(self) -> tuple:
        return self.item_space.items

    @cached_property
    def coords(self) -> np.ndarray:
        """``coords[x, j]`` is the position in :attr:`items` of agent j's item under x."""
        pos = self.item_space.position
        return np.array([[pos[y] for y in x] for x in self.allocations], dtype=np.intp)

    @cached_property
    def digest(self) -> str:
        payload = json.dumps(
            {"n_agents": self.n_agents,
             "allocations": [[item_label(y) for y in x] for x in self.allocations]},
            separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def swapped(self, x: Allocation, i: int, j: int) -> Allocation:
        y = list(x)
        y[i], y[j] = y[j], y[i]
        return tuple(y)


@dataclass(frozen=True)
class ValidationReport:
    permutation_invariant: bool
    projections_equal: bool
    witness: tuple | None = None  # (x, i, j) with x in X and its i<->j swap missing

    def __post_init__(self):
        if (self.witness is None) != self.permutation_invariant:
            raise ValueError("witness must be present exactly when invariance fails")

    @property
    def missing(self) -> Allocation | None:
        if self.witness is None:
            return None
        x, i, j = self.witness
        y = list(x)
        y[i], y[j] = y[j], y[i]
        return tuple(y)

    @property
    def ok(self) -> bool:
        return self.permutation_invariant and self.projections_equal


def validate_space(space: DeterministicSpace) -> ValidationReport:
    """Check closure under every pairwise agent swap, and equal projections."""
    if not space.allocations:
        raise InvalidInstanceError("empty space")
    n = space.n_agents
    witness = None
    index = space.index
    for x in space.allocations:
        for i, j in itertools.combinations(range(n), 2):
            if x[i] != x[j] and space.swapped(x, i, j) not in index:
                witness = (x, i, j)
                break
        if witness is not None:
            break
    projections = [{x[j] for x in space.allocations} for j in range(n)]
    equal = all(p == projections[0] for p in projections[1:])
    return ValidationReport(witness is None, equal, witness)


# --------------------------------------------------------------------------
# generators


def gen_hz(n: int) -> DeterministicSpace:
    """House allocation: every assignment of n distinct objects to n agents."""
    if n < 1:
        raise InvalidInstanceError("gen_hz needs n >= 1")
    return DeterministicSpace.build(n, itertools.permutations(range(n)), "hz", {"n": n})


def _bounded_bundles(caps: Sequence[int], total: int) -> list[tuple[int, ...]]:
    """Integer vectors b with 0 <= b <= caps componentwise and sum(b) <= total."""
    out = []

    def rec(k, left, prefix):
        if k == len(caps):
            out.append(tuple(prefix))
            return
        for v in range(min(caps[k], left) + 1):
            prefix.append(v)
            rec(k + 1, left - v, prefix)
            prefix.pop()

    rec(0, total, [])
    return out


def _joint_bundles(n_agents: int, bundles: list[tuple[int, ...]], supply: Sequence[int]):
    """All n-tuples of bundles whose componentwise sum stays within supply."""
    out = []

    def rec(j, left, prefix):
        if j == n_agents:
            out.append(tuple(prefix))
            return
        for b in bundles:
            if all(v <= s for v, s in zip(b, left)):
                prefix.append(b)
                rec(j + 1, [s - v for s, v in zip(left, b)], prefix)
                prefix.pop()

    rec(0, list(supply), [])
    return out


def _check_counts(name, values):
    for v in values:
        if int(v) != v or v < 0:
            raise InvalidInstanceError(f"{name} must be nonnegative integers, got {values!r}")


def gen_multiunit(n_agents: int, supply: Sequence[int], k: int) -> DeterministicSpace:
    """Multi-unit demand: each agent takes at most k units in total from the supply."""
    _check_counts("supply", supply)
    _check_counts("k", [k])
    if n_agents < 1:
        raise InvalidInstanceError("need at least one agent")
    supply = [int(s) for s in supply]
    bundles = _bounded_bundles([min(s, k) for s in supply], int(k))
    allocs = _joint_bundles(n_agents, bundles, supply)
    return DeterministicSpace.build(n_agents, allocs, "multiunit",
                                    {"n_agents": n_agents, "supply": supply, "k": int(k)})


def gen_partition_family(n_agents: int, items: int,
                         partitions: Sequence[Sequence[Iterable[int]]]) -> DeterministicSpace:
    """Every agent-permutation of each listed partition of items ``1..items``.

    Each partition lists exactly ``n_agents`` blocks (blocks may be empty);
    an agent's item is its block, stored as a sorted tuple.
    """
    if not partitions:
        raise EmptySpaceError("no partitions given")
    allocs = []
    for part in partitions:
        blocks = [tuple(sorted(set(b))) for b in part]
        if len(blocks) != n_agents:
            raise InvalidInstanceError(
                f"partition {part!r} has {len(blocks)} blocks for {n_agents} agents")
        seen: set[int] = set()
        for b in blocks:
            for it in b:
                if not 1 <= it <= items:
                    raise InvalidInstanceError(f"item {it} outside 1..{items}")
                if it in seen:
                    raise InvalidInstanceError(f"blocks of {part!r} overlap on item {it}")
                seen.add(it)
        allocs.extend(itertools.permutations(blocks))
    return DeterministicSpace.build(
        n_agents, allocs, "partition_family",
        {"n_agents": n_agents, "items": items,
         "partitions": [[list(b) for b in p] for p in partitions]})


ARRIVAL, IDLE, DEPARTURE = 1, 0, -1


def _airline_schedules(m, horizon, fleet_cap, min_level, window, initial_stock, supply):
    """Single-airline schedules: per period and airport one of idle/arrival/departure."""
    moves = (DEPARTURE, IDLE, ARRIVAL)
    periods = [p for p in itertools.product(moves, repeat=m)
               if sum(abs(a) for a in p) <= fleet_cap]
    out = []

    def rec(n, stock, prefix):
        if n == horizon:
            out.append(tuple(prefix))
            return
        for p in periods:
            if any(abs(a) > supply[n][l] for l, a in enumerate(p)):
                continue
            nxt = [s + a for s, a in zip(stock, p)]
            if min(nxt) < 0:
                continue
            prefix.append(p)
            rec(n + 1, nxt, prefix)
            prefix.pop()

    rec(0, list(initial_stock), [])
    if min_level > 0:
        starts = range(0, horizon, window)
        out = [s for s in out
               if all(sum(abs(s[n][l]) for n in range(t, min(t + window, horizon - 1) + 1))
                      >= min_level for t in starts for l in range(m))]
    return out


def gen_slots(n_airlines: int, m_airports: int, horizon: int, fleet_cap: int,
              min_activity: tuple[int, int], initial_stock: Sequence[int],
              slot_supply: int | Sequence[Sequence[int]]) -> DeterministicSpace:
    """Take-off/landing slot schedules over a finite horizon.

    An airline's item is a tuple over periods of per-airport moves
    (+1 arrival, -1 departure, 0 idle). Constraints per airline: at most
    ``fleet_cap`` moves per period; at least ``L`` moves per airport in each
    window ``[t, t+T]`` for ``t = 0, T, 2T, ...`` (clipped to the horizon);
    aircraft stock ``S_{n+1} = S_n + arr - dep`` never negative. Jointly, the
    airlines use at most ``slot_supply[n][l]`` slots at airport l in period n.
    """
    level, window = min_activity
    _check_counts("parameters", [n_airlines, m_airports, horizon, fleet_cap, level, window])
    _check_counts("initial_stock", initial_stock)
    if n_airlines < 1 or m_airports < 1 or horizon < 1 or window < 1:
        raise InvalidInstanceError("airlines, airports, horizon and window must be >= 1")
    if len(initial_stock) != m_airports:
        raise InvalidInstanceError("initial_stock needs one entry per airport")
    if isinstance(slot_supply, int):
        supply = [[slot_supply] * m_airports for _ in range(horizon)]
    else:
        supply = [list(row) for row in slot_supply]
    if len(supply) != horizon or any(len(r) != m_airports for r in supply):
        raise InvalidInstanceError("slot_supply must be horizon x airports")
    for row in supply:
        _check_counts("slot_supply", row)
    params = {"n_airlines": n_airlines, "m_airports": m_airports, "horizon": horizon,
              "fleet_cap": fleet_cap, "min_activity": [level, window],
              "initial_stock": list(initial_stock), "slot_supply": supply}
    schedules = _airline_schedules(m_airports, horizon, fleet_cap, level, window,
                                   initial_stock, supply)
    if not schedules:
        raise EmptySpaceError(
            f"no single-airline schedule meets min activity {level} per window of {window} "
            f"under supply {supply} and fleet cap {fleet_cap}")
    allocs = []

    def rec(a, used, prefix):
        if a == n_airlines:
            allocs.append(tuple(prefix))
            return
        for s in schedules:
            nxt = [[u + abs(v) for u, v in zip(urow, srow)] for urow, srow in zip(used, s)]
            if any(u > c for urow, crow in zip(nxt, supply) for u, c in zip(urow, crow)):
                continue
            prefix.append(s)
            rec(a + 1, nxt, prefix)
            prefix.pop()

    rec(0, [[0] * m_airports for _ in range(horizon)], [])
    if not allocs:
        raise EmptySpaceError(
            f"{n_airlines} airlines cannot jointly meet min activity {level} "
            f"under slot supply {supply}")
    return DeterministicSpace.build(n_airlines, allocs, "slots", params)


def gen_differentiated(n_agents: int, characteristics: int, endowment: Sequence[int],
                       cap: int) -> DeterministicSpace:
    """Integer bundles over K characteristics, each of total size at most ``cap``,
    jointly bounded by the endowment."""
    _check_counts("endowment", endowment)
    _check_counts("cap", [cap])
    if len(endowment) != characteristics:
        raise InvalidInstanceError("endowment needs one entry per characteristic")
    if n_agents < 1:
        raise InvalidInstanceError("need at least one agent")
    nu = [int(v) for v in endowment]
    bundles = _bounded_bundles(nu, int(cap))
    allocs = _joint_bundles(n_agents, bundles, nu)
    return DeterministicSpace.build(
        n_agents, allocs, "differentiated",
        {"n_agents": n_agents, "characteristics": characteristics, "endowment": nu,
         "cap": int(cap)})


def gen_cake_space(n_agents: int, n_cells: int) -> DeterministicSpace:
    """All assignments of cells ``0..n_cells-1`` to agents.

    Agent j's item is the sorted tuple of cells it receives.
    """
    if n_agents < 1 or n_cells < 1:
        raise InvalidInstanceError("need n_agents >= 1 and n_cells >= 1")
    allocs = []
    for owner in itertools.product(range(n_agents), repeat=n_cells):
        allocs.append(tuple(tuple(i for i in range(n_cells) if owner[i] == j)
                            for j in range(n_agents)))
    return DeterministicSpace.build(n_agents, allocs, "cake",
                                    {"n_agents": n_agents, "n_cells": n_cells})


def cake_assignment(x: Allocation, n_cells: int) -> tuple[int, ...]:
    """Owner of each cell under a cake-space allocation."""
    owner = [-1] * n_cells
    for j, cells in enumerate(x):
        for i in cells:
            owner[i] = j
    return tuple(owner)


def gen_pazner_schmeidler(grid: int = 11) -> DeterministicSpace:
    """Two-consumer leisure/consumption economy on a uniform grid of [0,1]^2.

    Item ``(l, z)`` is leisure and consumption. The technology
    ``z1 + z2 - (1 - l1) - (1 - l2)/10 <= 0`` treats the consumers
    asymmetrically, so this space is *not* closed under agent swaps.
    """
    if grid < 2:
        raise InvalidInstanceError("grid needs at least 2 points")
    pts = [Fraction(k, grid - 1) for k in range(grid)]
    ys = [(l, z) for l in pts for z in pts]
    tenth = Fraction(1, 10)
    allocs = [((l1, z1), (l2, z2)) for (l1, z1) in ys for (l2, z2) in ys
              if z1 + z2 - (1 - l1) - tenth * (1 - l2) <= 0]
    return DeterministicSpace.build(2, allocs, "pazner_schmeidler", {"grid": grid})


def explicit_space(n_agents: int, allocations: Iterable[Sequence]) -> DeterministicSpace:
    return DeterministicSpace.build(n_agents, allocations, "explicit")


GENERATORS = {
    "hz": gen_hz,
    "multiunit": gen_multiunit,
    "partition_family": gen_partition_family,
    "slots": gen_slots,
    "differentiated": gen_differentiated,
    "cake": gen_cake_space,
    "pazner_schmeidler": gen_pazner_schmeidler,
}
