"""Cake cutting on finitely many interval cells.

A simple allocation is a partition of unity that is constant on each cell.
This module computes the utility fingerprint of such an allocation,
converts it into a deterministic interval partition when the measures are
atomless, and writes it as a lottery over indicator partitions in three
independent ways: the two-agent telescoping construction, greedy peeling,
and an exact linear program over all cell assignments.

All cake arithmetic is exact: inputs are converted to Fractions (floats
through their shortest decimal form, so ``0.2`` means ``1/5``).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from numbers import Rational, Real
from typing import Iterator, Sequence

import numpy as np

from ._lp import OPTIMAL, solve_lp
from .errors import AtomError, FarkasViolationError, InvalidInstanceError
from .instance import DeterministicSpace, cake_assignment
from .preferences import Lottery, Preference

FARKAS_MAX_COLUMNS = 10 ** 5


def exact(x) -> Fraction:
    """Exact rational value of a number or a ``"p/q"`` string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Real):
        v = float(x)
        if not np.isfinite(v):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(v))
    raise TypeError(f"cannot read {x!r} as a number")


def _matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    out = tuple(tuple(exact(v) for v in row) for row in rows)
    if len({len(r) for r in out}) > 1:
        raise InvalidInstanceError("ragged matrix")
    return out


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class CellMeasure:
    """Entry ``(j, i)`` is agent j's measure of cell i; ``atoms[i]`` marks a point mass."""

    cell_masses: tuple
    atoms: tuple = ()

    def __post_init__(self):
        m = _matrix(self.cell_masses)
        if not m or not m[0]:
            raise InvalidInstanceError("a cell measure needs at least one agent and one cell")
        if any(v < 0 for row in m for v in row):
            raise InvalidInstanceError("cell masses must be nonnegative")
        atoms = tuple(bool(a) for a in self.atoms) or (False,) * len(m[0])
        if len(atoms) != len(m[0]):
            raise InvalidInstanceError("need one atom flag per cell")
        object.__setattr__(self, "cell_masses", m)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n_agents(self) -> int:
        return len(self.cell_masses)

    @property
    def n_cells(self) -> int:
        return len(self.cell_masses[0])

    @property
    def has_atoms(self) -> bool:
        return any(self.atoms)

    def totals(self) -> tuple[Fraction, ...]:
        return tuple(sum(row, Fraction(0)) for row in self.cell_masses)


def uniform_widths(n_cells: int) -> tuple[Fraction, ...]:
    return (Fraction(1, n_cells),) * n_cells


@dataclass(frozen=True)
class SimpleAllocation:
    """Entry ``(j, i)`` is agent j's share of cell i; each column sums to exactly 1."""

    values: tuple
    cells: tuple = ()

    def __post_init__(self):
        v = _matrix(self.values)
        if not v or not v[0]:
            raise InvalidInstanceError("an allocation needs at least one agent and one cell")
        if any(not 0 <= x <= 1 for row in v for x in row):
            raise InvalidInstanceError("shares must lie in [0, 1]")
        n_cells = len(v[0])
        for i in range(n_cells):
            s = sum((row[i] for row in v), Fraction(0))
            if s != 1:
                raise InvalidInstanceError(f"shares of cell {i} sum to {s}, not 1")
        cells = tuple(exact(w) for w in self.cells) or uniform_widths(n_cells)
        if len(cells) != n_cells:
            raise InvalidInstanceError("need one width per cell")
        if any(w <= 0 for w in cells) or sum(cells) != 1:
            raise InvalidInstanceError("cell widths must be positive and sum to 1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "cells", cells)

    @property
    def n_agents(self) -> int:
        return len(self.values)

    @property
    def n_cells(self) -> int:
        return len(self.values[0])

    def column(self, i: int) -> tuple[Fraction, ...]:
        return tuple(row[i] for row in self.values)

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.values])


@dataclass(frozen=True)
class IndicatorPartition:
    """Deterministic cake allocation: ``assignment[i]`` owns cell i."""

    assignment: tuple
    n_agents: int

    def __post_init__(self):
        a = tuple(int(j) for j in self.assignment)
        if not a:
            raise InvalidInstanceError("a partition needs at least one cell")
        if any(not 0 <= j < self.n_agents for j in a):
            raise InvalidInstanceError(f"assignment {a} names an agent outside 0..{self.n_agents - 1}")
        object.__setattr__(self, "assignment", a)

    @property
    def n_cells(self) -> int:
        return len(self.assignment)

    def matrix(self) -> tuple[tuple[Fraction, ...], ...]:
        return tuple(tuple(Fraction(int(a == j)) for a in self.assignment)
                     for j in range(self.n_agents))

    def as_allocation(self, cells: Sequence = ()) -> SimpleAllocation:
        return SimpleAllocation(self.matrix(), tuple(cells))

    def cells_of(self, j: int) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.assignment) if a == j)

    def __str__(self) -> str:
        return "".join(str(j + 1) if self.n_agents < 10 else f"{j + 1}," for j in self.assignment)


@dataclass(frozen=True)
class Decomposition:
    """Lottery ``sum_k a_k * term_k`` over indicator partitions."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((exact(a), t) for a, t in self.terms)
        if not terms:
            raise InvalidInstanceError("empty decomposition")
        if any(a <= 0 for a, _ in terms):
            raise InvalidInstanceError("decomposition weights must be positive")
        object.__setattr__(self, "terms", terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator:
        return iter(self.terms)

    @property
    def total_weight(self) -> Fraction:
        return sum((a for a, _ in self.terms), Fraction(0))

    def reconstruct(self) -> tuple[tuple[Fraction, ...], ...]:
        """``sum_k a_k * indicator(term_k)`` entrywise."""
        _, t0 = self.terms[0]
        acc = [[Fraction(0)] * t0.n_cells for _ in range(t0.n_agents)]
        for a, t in self.terms:
            for i, j in enumerate(t.assignment):
                acc[j][i] += a
        return tuple(tuple(row) for row in acc)

    def reproduces(self, f: SimpleAllocation) -> bool:
        return self.total_weight == 1 and self.reconstruct() == f.values


@dataclass(frozen=True)
class NuMatrix:
    """Entry ``(j, l)`` is agent l's measure of agent j's share."""

    entries: tuple

    def as_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.entries])

    def column_sums(self) -> tuple[Fraction, ...]:
        return tuple(sum(col, Fraction(0)) for col in zip(*self.entries))


# --------------------------------------------------------------------------
# utility fingerprint and atomless conversion


def nu_matrix(f: SimpleAllocation, mu: CellMeasure) -> NuMatrix:
    """``nu[j][l] = sum_i f[j][i] * mu[l][i]``."""
    if f.n_cells != mu.n_cells or f.n_agents != mu.n_agents:
        raise InvalidInstanceError(
            f"allocation is {f.n_agents}x{f.n_cells} but measure is {mu.n_agents}x{mu.n_cells}")
    return NuMatrix(tuple(
        tuple(sum((fj * ml for fj, ml in zip(f.values[j], mu.cell_masses[l])), Fraction(0))
              for l in range(mu.n_agents))
        for j in range(f.n_agents)))


@dataclass(frozen=True)
class RefinedPartition:
    """Deterministic partition of a refined cell set.

    ``parents[k]`` is the original cell containing refined cell k and
    ``measure`` gives each agent's mass of every refined cell. Unpacks as
    ``(partition, widths)``.
    """

    partition: IndicatorPartition
    widths: tuple
    parents: tuple
    measure: CellMeasure

    def __iter__(self):
        return iter((self.partition, self.widths))

    def nu(self) -> NuMatrix:
        return nu_matrix(self.partition.as_allocation(self.widths), self.measure)


def dww_atomless_to_partition(f: SimpleAllocation, mu: CellMeasure) -> RefinedPartition:
    """Split every cell into consecutive pieces of width ``f[j][i] * width_i`` for agent j.

    With densities constant on each cell, agent l's mass of agent j's piece
    of cell i is ``f[j][i] * mu[l][i]``, so every entry of the nu matrix is
    preserved exactly. Zero-width pieces are dropped.

    Raises:
        AtomError: a cell carries a point mass, which cannot be split.
    """
    if mu.has_atoms:
        cells = [i for i, a in enumerate(mu.atoms) if a]
        raise AtomError(f"cells {cells} carry atoms; atomless conversion does not apply")
    if f.n_cells != mu.n_cells or f.n_agents != mu.n_agents:
        raise InvalidInstanceError("allocation and measure dimensions differ")
    owners, widths, parents, masses = [], [], [], [[] for _ in range(mu.n_agents)]
    for i, w in enumerate(f.cells):
        for j in range(f.n_agents):
            share = f.values[j][i]
            if share == 0:
                continue
            owners.append(j)
            widths.append(share * w)
            parents.append(i)
            for l in range(mu.n_agents):
                masses[l].append(share * mu.cell_masses[l][i])
    return RefinedPartition(IndicatorPartition(tuple(owners), f.n_agents), tuple(widths),
                            tuple(parents), CellMeasure(tuple(map(tuple, masses))))


# --------------------------------------------------------------------------
# decompositions


def decompose_two_agents(f: SimpleAllocation) -> Decomposition:
    """Telescoping lottery for two agents.

    With agent 1's shares sorted ascending as ``a_1 <= ... <= a_n``, the
    weights are ``a_1, a_2 - a_1, ..., 1 - a_n`` and agent 1 receives the
    cells whose share reaches the current level (all cells first, none last).
    """
    if f.n_agents != 2:
        raise InvalidInstanceError(f"two-agent construction needs N = 2, got {f.n_agents}")
    alpha = f.values[0]
    levels = sorted(set(alpha))
    terms, prev = [], Fraction(0)
    for lev in levels + [Fraction(1)]:
        w = lev - prev
        if w > 0:
            owners = tuple(0 if a >= lev else 1 for a in alpha)
            terms.append((w, IndicatorPartition(owners, 2)))
        prev = lev
    return Decomposition(tuple(terms))


def decompose_general(f: SimpleAllocation) -> Decomposition:
    """Greedy peeling for any number of agents.

    Each step gives every cell to its smallest-index agent with remaining
    share, peels the largest common weight ``a`` that fits, and rescales the
    remainder by ``1 / (1 - a)``, which is again a partition of unity with
    strictly smaller support. Hence at most ``I * (N - 1) + 1`` terms.
    """
    rem = [list(row) for row in f.values]
    n, n_cells = f.n_agents, f.n_cells
    mass = Fraction(1)
    terms = []
    for _ in range(n_cells * (n - 1) + 1):
        owners = tuple(next(j for j in range(n) if rem[j][i] > 0) for i in range(n_cells))
        a = min(rem[j][i] for i, j in enumerate(owners))
        terms.append((mass * a, IndicatorPartition(owners, n)))
        if a == 1:
            return Decomposition(tuple(terms))
        for i, j in enumerate(owners):
            rem[j][i] -= a
        scale = 1 / (1 - a)
        rem = [[v * scale for v in row] for row in rem]
        mass *= 1 - a
    raise AssertionError("peeling exceeded its term bound")


def assignment_columns(n_agents: int, n_cells: int) -> list[tuple[int, ...]]:
    """All ``N ** I`` assignments of cells to agents, lexicographic."""
    return list(itertools.product(range(n_agents), repeat=n_cells))


def farkas_feasibility(f: SimpleAllocation) -> Decomposition:
    """Solve ``P a = f, a >= 0`` exactly over every cell assignment.

    Column c of ``P`` is the indicator matrix of assignment c, flattened.
    Weights summing to one follow from the partition-of-unity columns.

    Raises:
        FarkasViolationError: the system is infeasible.
    """
    n, n_cells = f.n_agents, f.n_cells
    if n ** n_cells > FARKAS_MAX_COLUMNS:
        raise ValueError(f"{n}^{n_cells} columns exceed the limit of {FARKAS_MAX_COLUMNS}")
    cols = assignment_columns(n, n_cells)
    # row (j, i) for j < N-1; agent N-1's rows follow from the column sums,
    # so a single sum-to-one row replaces them and keeps the system full rank
    A = [[int(c[i] == j) for c in cols] for j in range(n - 1) for i in range(n_cells)]
    b = [f.values[j][i] for j in range(n - 1) for i in range(n_cells)]
    A.append([1] * len(cols))
    b.append(Fraction(1))
    res = solve_lp(A, b)
    if res.status != OPTIMAL:
        raise FarkasViolationError(f"no lottery over cell assignments reproduces f ({res.status})")
    terms = tuple((a, IndicatorPartition(c, n)) for a, c in zip(res.x, cols) if a > 0)
    dec = Decomposition(terms)
    if not dec.reproduces(f):
        raise FarkasViolationError("LP solution does not reproduce f")
    return dec


# --------------------------------------------------------------------------
# column counting


def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind by ``S(n,k) = k S(n-1,k) + S(n-1,k-1)``."""
    if n < 0 or k < 0:
        raise ValueError("negative argument")
    row = [1] + [0] * k  # S(0, .)
    for _ in range(n):
        row = [0] + [m * row[m] + row[m - 1] for m in range(1, k + 1)]
    return row[k]


def stirling_column_count(n_cells: int, n_agents: int) -> int:
    """``sum_m S(I, m) * N! / (N - m)!``: partitions of the cells into m blocks,
    each block given to a distinct agent."""
    if n_cells < 1 or n_agents < 1:
        raise ValueError("need I >= 1 and N >= 1")
    return sum(stirling2(n_cells, m) * factorial(n_agents) // factorial(n_agents - m)
               for m in range(1, min(n_cells, n_agents) + 1))


def column_count_identity(n_cells: int, n_agents: int) -> bool:
    """``count(I - xi) == N * count(I - xi - 1)`` for every ``0 <= xi <= I - 2``."""
    return all(stirling_column_count(n_cells - xi, n_agents)
               == n_agents * stirling_column_count(n_cells - xi - 1, n_agents)
               for xi in range(n_cells - 1))


# --------------------------------------------------------------------------
# bridge to the allocation-space solver


def _cake_cells(space: DeterministicSpace) -> int:
    if space.name != "cake":
        raise InvalidInstanceError(f"expected a cake space, got '{space.name}'")
    return int(space.params["n_cells"])


def cake_bridge(space: DeterministicSpace, mu: CellMeasure) -> list[Preference]:
    """Additive expected-utility preferences: a set of cells is worth its measure."""
    n_cells = _cake_cells(space)
    if mu.n_cells != n_cells or mu.n_agents != space.n_agents:
        raise InvalidInstanceError(
            f"measure is {mu.n_agents}x{mu.n_cells}, space has {space.n_agents} agents "
            f"and {n_cells} cells")
    return [Preference.eu({y: float(sum((row[i] for i in y), Fraction(0))) for y in space.items})
            for row in mu.cell_masses]


def lottery_shares(space: DeterministicSpace, p: Lottery, cells: Sequence = ()) -> SimpleAllocation:
    """Probability that each cell goes to each agent, as a simple allocation."""
    n_cells = _cake_cells(space)
    acc = [[Fraction(0)] * n_cells for _ in range(space.n_agents)]
    for k, w in p.support:
        for i, j in enumerate(cake_assignment(space.allocations[k], n_cells)):
            acc[j][i] += exact(w)
    if not p.is_exact:
        # float weights: absorb rounding so each column sums to exactly 1
        for i in range(n_cells):
            col = [acc[j][i] for j in range(space.n_agents)]
            total = sum(col, Fraction(0))
            for j in range(space.n_agents):
                acc[j][i] = col[j] / total
    return SimpleAllocation(tuple(map(tuple, acc)), tuple(cells))


def decomposition_lottery(space: DeterministicSpace, dec: Decomposition) -> Lottery:
    """The decomposition as a lottery over the cake space's allocations."""
    n_cells = _cake_cells(space)
    out: dict[int, Fraction] = {}
    for a, t in dec:
        if t.n_cells != n_cells or t.n_agents != space.n_agents:
            raise InvalidInstanceError("partition does not match the cake space")
        x = tuple(t.cells_of(j) for j in range(space.n_agents))
        k = space.index[x]
        out[k] = out.get(k, Fraction(0)) + a
    return Lottery(tuple(out.items()))
