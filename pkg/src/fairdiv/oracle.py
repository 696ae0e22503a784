"""Brute-force checks that share no code path with the solvers.

``grid_maximize_q`` sweeps a uniform grid over all lotteries of a tiny
space. ``certify`` recomputes envy in exact rationals and the weak Pareto
gap either on that grid or by an exact rational linear program, never
through the column-generation routine used by the solver.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from ._lp import OPTIMAL, solve_lp
from .errors import CertificationError, InvalidInstanceError
from .instance import DeterministicSpace
from .preferences import Lottery, Preference, utility_table
from .qsolver import QSolution, WeightVector

GRID = "grid"
EXHAUSTIVE = "exhaustive-vertex"
LP = "lp"

GRID_MAX_ALLOCATIONS = 6
DEFAULT_RESOLUTION = 64
LP_MAX_ALLOCATIONS = 5000


@dataclass(frozen=True)
class OracleReport:
    """Outcome of one oracle computation.

    ``discrepancy`` is ``|oracle value - solver value|`` and the two agree
    when it is at most ``tolerance``. For certification ``best_value`` is the
    recomputed Pareto gap and ``violations`` lists every failed inequality.
    """

    method: str
    best_value: float
    witness: Lottery | None
    agrees_with_solver: bool
    discrepancy: float
    tolerance: float = 0.0
    slack: float = 0.0
    max_envy: float | None = None
    violations: tuple = field(default=())

    @property
    def passed(self) -> bool:
        return self.agrees_with_solver and not self.violations


# --------------------------------------------------------------------------
# grid over lotteries


def _composition_table(total: int, parts: int) -> list[np.ndarray]:
    """``table[t]`` lists the vectors of length ``parts`` with entries summing to ``t``."""
    table = [np.array([[t]], dtype=np.int16) for t in range(total + 1)]
    for _ in range(parts - 1):
        table = [np.vstack([np.hstack([np.full((len(table[t - a]), 1), a, dtype=np.int16),
                                       table[t - a]])
                            for a in range(t, -1, -1)])
                 for t in range(total + 1)]
    return table


def _grid_blocks(total: int, parts: int):
    """Grid points with coordinates summing to ``total``, in blocks by first coordinate.

    Order: first coordinate descending, then the same order recursively.
    """
    if parts == 1:
        yield np.array([[total]], dtype=np.int16)
        return
    table = _composition_table(total, parts - 1)
    for a in range(total, -1, -1):
        sub = table[total - a]
        yield np.hstack([np.full((len(sub), 1), a, dtype=np.int16), sub])


def grid_size(n_allocations: int, resolution: int) -> int:
    return comb(resolution + n_allocations - 1, n_allocations - 1)


def _one_hot(space: DeterministicSpace) -> list[np.ndarray]:
    """Per agent, the |X| x M matrix sending an allocation to its item."""
    m = len(space.items)
    out = []
    for j in range(space.n_agents):
        h = np.zeros((len(space), m))
        h[np.arange(len(space)), space.coords[:, j]] = 1.0
        out.append(h)
    return out


def q_lipschitz(tables: Sequence[np.ndarray], lam: np.ndarray, delta: float) -> float:
    """Lipschitz constant of Q in the L1 norm on lotteries.

    A marginal moves at most as far as the lottery; a utility index with
    spread s changes by at most s/2 per unit of L1 distance between
    probability vectors, and ``sum q^2`` by at most 2.
    """
    spread = [float(np.ptp(u, axis=1).max()) if u.size else 0.0 for u in tables]
    return float(np.dot(lam, spread)) / 2 + 2 * delta * len(tables)


def grid_slack(n_allocations: int, resolution: int, lipschitz: float) -> float:
    """Q can exceed the best grid value by at most this much.

    Rounding a lottery to the grid moves each coordinate by less than
    ``1/resolution`` while keeping the sum, so the L1 move is below
    ``n_allocations / resolution``.
    """
    return lipschitz * min(2.0, n_allocations / resolution)


def _sweep(space: DeterministicSpace, resolution: int, score) -> tuple[float, np.ndarray]:
    """Maximize ``score(lottery block)`` over the grid; first maximizer wins ties."""
    k = len(space)
    if k > GRID_MAX_ALLOCATIONS:
        raise InvalidInstanceError(
            f"grid oracle handles at most {GRID_MAX_ALLOCATIONS} allocations, got {k}")
    if resolution < 1:
        raise ValueError("resolution must be positive")
    best_val, best_pt = -np.inf, None
    for W in _grid_blocks(resolution, k):
        vals = score(W.astype(float) / resolution)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_pt = float(vals[i]), W[i].copy()
    return best_val, best_pt


def _lottery_from_counts(counts: np.ndarray, resolution: int) -> Lottery:
    return Lottery(tuple((int(x), Fraction(int(c), resolution))
                         for x, c in enumerate(counts) if c))


def grid_maximize_q(space: DeterministicSpace, prefs: Sequence[Preference], lam: WeightVector,
                    delta: float, grid_resolution: int = DEFAULT_RESOLUTION,
                    solution: QSolution | None = None) -> OracleReport:
    """Best regularized welfare over lotteries with weights in ``1/grid_resolution`` steps.

    With ``solution`` given, the report compares against its ``q_value``: the
    grid may not beat the solver by more than its duality gap, and the solver
    may not beat the grid by more than the duality gap plus the grid slack.
    Ties go to the first grid point in a fixed enumeration order.
    """
    tables = utility_table(space, prefs)
    lam_f = lam.as_array()
    hots = _one_hot(space)

    def score(Wf):
        q = np.zeros(len(Wf))
        for j, (u, h) in enumerate(zip(tables, hots)):
            P = Wf @ h  # marginals of agent j
            if lam_f[j]:
                q += lam_f[j] * np.min(P @ u.T, axis=1)
            q -= delta * np.einsum("ij,ij->i", P, P)
        return q

    value, pt = _sweep(space, grid_resolution, score)
    slack = grid_slack(len(space), grid_resolution, q_lipschitz(tables, lam_f, delta))
    witness = _lottery_from_counts(pt, grid_resolution)
    if solution is None:
        return OracleReport(GRID, value, witness, True, 0.0, slack, slack)
    gap = max(solution.duality_gap, 0.0)
    disc = abs(value - solution.q_value)
    tol = gap + slack + 1e-12
    agrees = value <= solution.q_value + gap + 1e-12 and solution.q_value <= value + tol
    return OracleReport(GRID, value, witness, agrees, disc, tol, slack)


def vertex_maximize_q(space: DeterministicSpace, prefs: Sequence[Preference], lam: WeightVector,
                      delta: float) -> OracleReport:
    """Best regularized welfare over point masses, a lower bound on the optimum."""
    tables = utility_table(space, prefs)
    lam_f = lam.as_array()
    vals = np.zeros(len(space))
    for j, u in enumerate(tables):
        vals += lam_f[j] * np.min(u[:, space.coords[:, j]], axis=0)
    vals -= delta * space.n_agents
    best = int(np.argmax(vals))
    return OracleReport(EXHAUSTIVE, float(vals[best]), Lottery.point(best), True, 0.0)


# --------------------------------------------------------------------------
# exact envy and Pareto gap


def _exact_tables(space: DeterministicSpace, prefs: Sequence[Preference]) -> list[list[list[Fraction]]]:
    return [[[Fraction(float(u[y])) for y in space.items] for u in pref.indices] for pref in prefs]


def _exact_marginals(space: DeterministicSpace, p: Lottery) -> list[list[Fraction]]:
    m = len(space.items)
    out = [[Fraction(0)] * m for _ in range(space.n_agents)]
    for k, w in p.support:
        wq = Fraction(w)
        for j, pos in enumerate(space.coords[k]):
            out[j][int(pos)] += wq
    return out


def _utility(idx: list[list[Fraction]], marg: list[Fraction]) -> Fraction:
    return min(sum((a * b for a, b in zip(u, marg) if b), Fraction(0)) for u in idx)


def exact_envy_matrix(space: DeterministicSpace, p: Lottery,
                      prefs: Sequence[Preference]) -> list[list[Fraction]]:
    """Envy ``E[j][k] = U_j(p^k) - U_j(p^j)`` in exact rationals.

    Float utilities and weights enter through their exact binary values.
    """
    p.validate_for(space)
    tabs = _exact_tables(space, prefs)
    margs = _exact_marginals(space, p)
    n = space.n_agents
    out = []
    for j in range(n):
        own = _utility(tabs[j], margs[j])
        out.append([_utility(tabs[j], margs[k]) - own if k != j else Fraction(0)
                    for k in range(n)])
    return out


def exact_max_envy(space: DeterministicSpace, p: Lottery, prefs: Sequence[Preference]) -> Fraction:
    E = exact_envy_matrix(space, p, prefs)
    return max(max(row) for row in E)


def lp_wpe_gap(space: DeterministicSpace, prefs: Sequence[Preference], p: Lottery) -> tuple[Fraction, Lottery]:
    """``max_q min_j (U_j(q) - U_j(p))`` by one exact rational linear program.

    Variables are the lottery ``q``, a free level ``t = t+ - t-`` and a
    slack per utility index; each index row reads
    ``sum_x q_x u(x_j) - t - s = U_j(p)``.
    """
    if len(space) > LP_MAX_ALLOCATIONS:
        raise InvalidInstanceError(
            f"exact Pareto check handles at most {LP_MAX_ALLOCATIONS} allocations")
    tabs = _exact_tables(space, prefs)
    margs = _exact_marginals(space, p)
    base = [_utility(tabs[j], margs[j]) for j in range(space.n_agents)]
    rows = [(j, u) for j in range(space.n_agents) for u in tabs[j]]
    nx, nr = len(space), len(rows)
    nvar = nx + 2 + nr
    A, b = [], []
    for r, (j, u) in enumerate(rows):
        row = [u[int(space.coords[x, j])] for x in range(nx)] + [Fraction(-1), Fraction(1)]
        row += [Fraction(-int(s == r)) for s in range(nr)]
        A.append(row)
        b.append(base[j])
    A.append([Fraction(1)] * nx + [Fraction(0)] * (2 + nr))
    b.append(Fraction(1))
    c = [Fraction(0)] * nx + [Fraction(-1), Fraction(1)] + [Fraction(0)] * nr
    res = solve_lp(A, b, c)
    if res.status != OPTIMAL:
        raise CertificationError(f"exact Pareto program ended with status {res.status}")
    assert len(res.x) == nvar
    gap = max(Fraction(0), -res.value)
    q = Lottery(tuple((x, w) for x, w in enumerate(res.x[:nx]) if w))
    return gap, q


def grid_wpe_gap(space: DeterministicSpace, prefs: Sequence[Preference], p: Lottery,
                 resolution: int = DEFAULT_RESOLUTION) -> tuple[float, Lottery, float]:
    """Grid estimate of the Pareto gap with its slack: ``(value, witness, slack)``.

    The true gap lies in ``[value, value + slack]``.
    """
    tables = utility_table(space, prefs)
    hots = _one_hot(space)
    base = []
    for j, u in enumerate(tables):
        m = np.zeros(len(space.items))
        for k, w in p.support:
            m[space.coords[k, j]] += float(w)
        base.append(float(np.min(u @ m)))

    def score(Wf):
        imp = np.full(len(Wf), np.inf)
        for j, (u, h) in enumerate(zip(tables, hots)):
            imp = np.minimum(imp, np.min((Wf @ h) @ u.T, axis=1) - base[j])
        return imp

    value, pt = _sweep(space, resolution, score)
    spread = max(float(np.ptp(u, axis=1).max()) for u in tables)
    slack = spread / 2 * min(2.0, len(space) / resolution)
    return max(0.0, value), _lottery_from_counts(pt, resolution), slack


def certify(space: DeterministicSpace, prefs: Sequence[Preference], cert, eps: float, *,
            method: str | None = None, resolution: int = DEFAULT_RESOLUTION,
            tol: float = 1e-9, raise_on_failure: bool = False) -> OracleReport:
    """Independently recheck a fair-division certificate.

    Checks ``max_envy <= eps``, ``wpe_gap <= eps + delta N``, and that both
    stored numbers match the recomputation within ``tol``. The Pareto gap
    comes from the exact linear program by default, or from the lottery grid
    (``method="grid"``, adding its slack to the bound) on tiny spaces.
    """
    if cert.instance_digest and cert.instance_digest != space.digest:
        v = (f"certificate digest {cert.instance_digest[:12]} does not match "
             f"instance {space.digest[:12]}",)
        report = OracleReport(LP, float("nan"), None, False, float("inf"), violations=v)
        if raise_on_failure:
            raise CertificationError(v[0])
        return report
    method = method or LP
    if method not in (LP, GRID):
        raise ValueError(f"unknown certification method {method!r}")
    lot = cert.lottery
    env = float(exact_max_envy(space, lot, prefs))
    slack = 0.0
    if method == LP:
        gap_q, witness = lp_wpe_gap(space, prefs, lot)
        gap = float(gap_q)
    else:
        gap, witness, slack = grid_wpe_gap(space, prefs, lot, resolution)
    n = space.n_agents
    bound = eps + cert.delta_final * n
    violations = []
    if env > eps:
        violations.append(f"max_envy {env:.6e} > eps {eps:.6e}")
    if gap > bound:
        violations.append(f"wpe_gap {gap:.6e} > eps + delta*N = {bound:.6e}")
    if abs(env - cert.max_envy) > tol:
        violations.append(f"stored max_envy {cert.max_envy:.6e} != recomputed {env:.6e}")
    disc = abs(gap - cert.wpe_gap)
    agrees = disc <= tol + slack
    if not agrees:
        violations.append(f"stored wpe_gap {cert.wpe_gap:.6e} != recomputed {gap:.6e}")
    report = OracleReport(method, gap, witness, agrees, disc, tol + slack, slack, env,
                          tuple(violations))
    if raise_on_failure and violations:
        raise CertificationError("; ".join(violations))
    return report
