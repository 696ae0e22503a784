"""Searching the Pareto-weight simplex for an envy-free regularized optimum.

Each weight vertex is labeled by an agent in its support who is envy-free at
the regularized optimum for those weights. Completely labeled subsimplices of
a barycentric subdivision shrink toward weights whose optimum is envy-free
for everyone; :func:`refine_to_lambda` descends into them round by round, and
:func:`solve_fair` packages the result with verified envy and Pareto gaps.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (InvalidInstanceError, LuckyViolationError, RefinementFailureError,
                     SpernerViolationError, WPECheckFailure)
from .instance import DeterministicSpace, item_label, validate_space
from .preferences import Lottery, Preference, envy_from_marginals, max_envy, utility_table
from .qsolver import QMemo, QSolution, SolverConfig, WeightVector, solve_q, wpe_gap


# --------------------------------------------------------------------------
# simplices


def _rank(rows: list[list[Fraction]]) -> int:
    rows = [list(r) for r in rows]
    rank, cols = 0, len(rows[0]) if rows else 0
    for c in range(cols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                f = rows[i][c] / rows[rank][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def _sqdist(a: WeightVector, b: WeightVector) -> Fraction:
    return sum(((x - y) ** 2 for x, y in zip(a.weights, b.weights)), Fraction(0))


@dataclass(frozen=True)
class Simplex:
    """A simplex in the weight simplex, given by exact rational vertices."""

    vertices: tuple

    def __post_init__(self):
        vs = tuple(self.vertices)
        if not vs:
            raise ValueError("a simplex needs at least one vertex")
        base = vs[0].weights
        diffs = [[x - y for x, y in zip(v.weights, base)] for v in vs[1:]]
        if diffs and _rank(diffs) != len(diffs):
            raise ValueError("simplex vertices are affinely dependent")
        object.__setattr__(self, "vertices", vs)

    @classmethod
    def standard(cls, n: int) -> "Simplex":
        return cls(tuple(WeightVector.vertex(n, j) for j in range(n)))

    @property
    def barycenter(self) -> WeightVector:
        return _barycenter(self.vertices)

    @property
    def sq_diameter(self) -> Fraction:
        return max((_sqdist(a, b) for a, b in itertools.combinations(self.vertices, 2)),
                   default=Fraction(0))

    @property
    def diameter(self) -> float:
        return math.sqrt(self.sq_diameter)

    def children(self) -> list["Simplex"]:
        """Barycentric subdivision: one child per ordering of the vertices.

        The child for ordering (v1, ..., vk) has vertices b(v1), b(v1, v2), ...,
        b(v1, ..., vk), the barycenters of a maximal chain of faces.
        """
        out = []
        for perm in itertools.permutations(self.vertices):
            out.append(Simplex(tuple(_barycenter(perm[:i]) for i in range(1, len(perm) + 1))))
        return out


def _barycenter(vs: Sequence[WeightVector]) -> WeightVector:
    k = len(vs)
    return WeightVector(tuple(sum((v.weights[i] for v in vs), Fraction(0)) / k
                              for i in range(len(vs[0].weights))))


@dataclass
class LabeledComplex:
    simplices: list
    vertex_labels: dict = field(default_factory=dict)

    @property
    def mesh(self) -> float:
        return max((s.diameter for s in self.simplices), default=0.0)

    @property
    def vertices(self) -> list[WeightVector]:
        seen: dict = {}
        for s in self.simplices:
            for v in s.vertices:
                seen.setdefault(v, None)
        return list(seen)

    def check_proper(self) -> None:
        for v, lab in self.vertex_labels.items():
            if lab not in v.support:
                raise SpernerViolationError(f"label {lab} outside the support of {v}")


def barycentric_subdivide(c: LabeledComplex | Simplex) -> LabeledComplex:
    """One round of barycentric subdivision of every simplex; labels are cleared."""
    simplices = [c] if isinstance(c, Simplex) else c.simplices
    return LabeledComplex([ch for s in simplices for ch in s.children()], {})


def find_completely_labeled(c: LabeledComplex, require_odd: bool = True) -> list[Simplex]:
    """Simplices whose vertex labels cover every agent.

    For a properly labeled subdivision of the whole weight simplex the count
    is odd; ``require_odd`` turns a violation into an error. Local complexes
    (subdivisions of an inner simplex) carry no such guarantee.
    """
    c.check_proper()
    if not c.simplices:
        raise SpernerViolationError("empty complex")
    n = len(c.simplices[0].vertices[0].weights)
    full = set(range(n))
    out = [s for s in c.simplices if {c.vertex_labels[v] for v in s.vertices} == full]
    if require_odd and len(out) % 2 == 0:
        raise SpernerViolationError(
            f"{len(out)} completely labeled simplices in a proper labeling")
    return out


def barycenter_key(s: Simplex) -> tuple:
    return s.barycenter.weights


# --------------------------------------------------------------------------
# labels


FIRST = "first"
SLACK = "slack"


def envy_slack(E: np.ndarray) -> np.ndarray:
    """Per agent, the largest off-diagonal envy; negative when strictly content."""
    n = E.shape[0]
    if n == 1:
        return np.zeros(1)
    off = E + np.diag(np.full(n, -np.inf))
    return off.max(axis=1)


class Labeler:
    """Lucky labels with memoized regularized solutions, safe to share across threads.

    Rule ``"first"`` labels a vertex with the smallest supported agent who is
    envy-free within ``envy_tol``. Rule ``"slack"`` takes the supported agent
    whose worst envy toward others is least (ties to the smallest index),
    which is envy-free whenever some supported agent is. Its label regions are
    bounded by level sets of envy differences, so a cell carrying every
    label sits where all agents' worst envies nearly agree, hence near zero.
    """

    def __init__(self, space: DeterministicSpace, prefs: Sequence[Preference], cfg: SolverConfig,
                 envy_tol: float | None = None, memo: QMemo | None = None, rule: str = FIRST):
        if rule not in (FIRST, SLACK):
            raise ValueError(f"unknown label rule {rule!r}")
        self.space, self.prefs, self.cfg, self.rule = space, list(prefs), cfg, rule
        self.envy_tol = 10 * cfg.opt_tol if envy_tol is None else envy_tol
        self.memo = memo or QMemo()
        self.tables = utility_table(space, prefs)

    def solve(self, lam: WeightVector, cfg: SolverConfig | None = None) -> QSolution:
        return self.memo.get_or_solve(self.space, self.prefs, lam, cfg or self.cfg)

    def envy(self, sol: QSolution) -> np.ndarray:
        return envy_from_marginals(self.tables, sol.marginals)

    def label(self, lam: WeightVector) -> int:
        cfg = self.cfg
        for attempt in range(2):
            E = self.envy(self.solve(lam, cfg))
            sup = sorted(lam.support)
            if any(E[j].max() <= self.envy_tol for j in sup):
                if self.rule == SLACK:
                    g = envy_slack(E)
                    return min(sup, key=lambda j: (g[j], j))
                return next(j for j in sup if E[j].max() <= self.envy_tol)
            cfg = SolverConfig(cfg.delta, cfg.opt_tol / 10, cfg.max_iters)
        raise LuckyViolationError(
            f"no supported agent is envy-free within {self.envy_tol:g} at weights {lam}", E)


def lucky_label(lam: WeightVector, space: DeterministicSpace, prefs: Sequence[Preference],
                cfg: SolverConfig, envy_tol: float | None = None) -> int:
    """Smallest supported agent who is envy-free at the regularized optimum."""
    return Labeler(space, prefs, cfg, envy_tol).label(lam)


def label_complex(c: LabeledComplex, labeler: Labeler, workers: int = 1) -> LabeledComplex:
    todo = [v for v in c.vertices if v not in c.vertex_labels]
    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(workers) as pool:
            labels = list(pool.map(labeler.label, todo))
    else:
        labels = [labeler.label(v) for v in todo]
    c.vertex_labels.update(zip(todo, labels))
    return c


# --------------------------------------------------------------------------
# refinement


def default_schedule(n: int, floor: float = 1e-12) -> list[float]:
    """Mesh targets ``diam * ((n-1)/n)^k`` down to ``floor``; one round per step."""
    if n <= 1:
        return []
    diam = math.sqrt(2.0)
    ratio = (n - 1) / n
    out, k = [], 1
    while True:
        ck = diam * ratio ** k
        out.append(ck)
        if ck < floor:
            return out
        k += 1


@dataclass
class RefinementTrace:
    rows: list = field(default_factory=list)  # (round, mesh, n_vertices, n_cl, lambda, envy)
    rounds: int = 0
    mesh: float = 0.0
    nodes: int = 0
    complexes: list = field(default_factory=list, repr=False)


def _subdivide_to(s: Simplex, target: float) -> LabeledComplex:
    c = barycentric_subdivide(s)
    while c.mesh > target * (1 + 1e-12):
        c = barycentric_subdivide(c)
    return c


def _grid_point(y: Sequence[int], m: int) -> WeightVector:
    """Weights of the grid point with cumulative coordinates ``y`` on the grid of step ``1/m``."""
    full = (0,) + tuple(y) + (m,)
    return WeightVector(tuple(Fraction(full[i + 1] - full[i], m) for i in range(len(full) - 1)))


def _in_grid(y: Sequence[int], m: int) -> bool:
    return y[0] >= 0 and y[-1] <= m and all(y[i] <= y[i + 1] for i in range(len(y) - 1))


def start_label(lam: WeightVector, x0: WeightVector) -> int:
    """Artificial label: the smallest agent whose weight most exceeds its weight in ``x0``.

    With ``x0`` interior this is proper, and its only completely labeled cells
    surround ``x0``.
    """
    diffs = [a - b for a, b in zip(lam.weights, x0.weights)]
    return diffs.index(max(diffs))


class _Hit(Exception):
    pass


class PathFollower:
    """Merrill's restart algorithm on the weight simplex.

    The prism (weight simplex) x {0, 1} carries the Freudenthal triangulation
    of step ``1/m`` in cumulative coordinates ``y_i = lam_0 + ... + lam_i``
    (scaled by m), extended by one unit step in the level coordinate. Level 0
    is labeled by :func:`start_label` around ``x0``, level 1 by the labeler.
    Walking from the start cell through completely labeled facets can neither
    leave through the sides (both labelings are proper) nor return to level 0
    except at another start cell, so it ends on a completely labeled cell of
    level 1.
    """

    def __init__(self, labeler: Labeler, n: int, m: int, x0: WeightVector,
                 max_pivots: int = 100000, stop_envy: float | None = None):
        if any(w == 0 for w in x0.weights):
            # the artificial labeling needs an interior restart point
            eta = Fraction(1, 4 * m)
            x0 = WeightVector(tuple((1 - eta) * w + eta / n for w in x0.weights))
        self.lab, self.n, self.m, self.x0 = labeler, n, m, x0
        self.d = n - 1
        self.max_pivots = max_pivots
        self.stop_envy = stop_envy
        self.pivots = 0
        self.hit: tuple | None = None  # (weights, solution, max envy) meeting stop_envy

    def label(self, w: tuple) -> int:
        lam = _grid_point(w[:-1], self.m)
        if not w[-1]:
            return start_label(lam, self.x0)
        if self.stop_envy is not None:
            sol = self.lab.solve(lam)
            env = float(self.lab.envy(sol).max())
            if env <= self.stop_envy:
                self.hit = (lam, sol, env)
                raise _Hit
        return self.lab.label(lam)

    def vertices(self, base: tuple, perm: Sequence[int]) -> list[tuple]:
        out, w = [base], list(base)
        for i in perm:
            w[i] += 1
            out.append(tuple(w))
        return out

    def _starts(self) -> list[tuple]:
        """Completely labeled level-0 cells near ``x0``, nearest first."""
        d, m = self.d, self.m
        cum = list(itertools.accumulate(self.x0.weights))[:d]
        y = [c * m for c in cum]
        base = [math.floor(v) for v in y]
        out = []
        for off in itertools.product((0, -1, 1), repeat=d):
            b = tuple(bi + oi for bi, oi in zip(base, off))
            for perm in itertools.permutations(range(d)):
                ys = self.vertices(b, perm)
                if not all(_in_grid(v, m) for v in ys):
                    continue
                labs = {start_label(_grid_point(v, m), self.x0) for v in ys}
                if len(labs) == self.n:
                    out.append((b, perm))
        return out

    def run(self) -> list[WeightVector] | None:
        """Vertices of a completely labeled level-1 cell, or None if every start returns.

        Stops early, leaving the point in ``hit``, if a labeled point already
        has max envy at most ``stop_envy``.
        """
        try:
            for b, perm in self._starts():
                found = self._walk(b + (0,), tuple(perm) + (self.d,))
                if found is not None:
                    return found
        except _Hit:
            return None
        return None

    def _walk(self, base: tuple, perm: tuple):
        D = self.d + 1
        verts = self.vertices(base, perm)
        labels = [self.label(v) for v in verts[:-1]] + [None]
        new = D  # index of the vertex opposite the door we entered through
        while True:
            self.pivots += 1
            if self.pivots > self.max_pivots:
                raise RefinementFailureError(f"path exceeded {self.max_pivots} pivots", None)
            labels[new] = self.label(verts[new])
            out = next(i for i in range(D + 1) if i != new and labels[i] == labels[new])
            door = [verts[i] for i in range(D + 1) if i != out]
            levels = {v[-1] for v in door}
            if levels == {1}:
                return [_grid_point(v[:-1], self.m) for v in door]
            if levels == {0}:
                return None
            base, perm, new = self._pivot(base, perm, out)
            verts = self.vertices(base, perm)
            if not all(_in_grid(v[:-1], self.m) and 0 <= v[-1] <= 1 for v in verts):
                raise SpernerViolationError("path left the prism through a side")
            old = dict(zip(door, (labels[i] for i in range(D + 1) if i != out)))
            labels = [old.get(v) for v in verts]

    def _pivot(self, base: tuple, perm: tuple, i: int):
        """Freudenthal pivot dropping vertex i; returns the new cell and its new vertex index."""
        D = len(perm)
        b = list(base)
        if i == 0:
            b[perm[0]] += 1
            return tuple(b), perm[1:] + perm[:1], D
        if i == D:
            b[perm[-1]] -= 1
            return tuple(b), perm[-1:] + perm[:-1], 0
        p = list(perm)
        p[i - 1], p[i] = p[i], p[i - 1]
        return base, tuple(p), i


def refine_to_lambda(space: DeterministicSpace, prefs: Sequence[Preference], delta: float,
                     eps: float, c_schedule: Sequence[float] | None = None, *,
                     opt_tol: float = 1e-9, label_tol: float | None = None,
                     max_nodes: int = 200000, workers: int = 1,
                     trace: RefinementTrace | None = None,
                     labeler: Labeler | None = None,
                     warm: Sequence[float] = ()) -> tuple[WeightVector, QSolution]:
    """Find weights whose regularized optimum is ``eps``-envy-free.

    Vertices are labeled with lucky labels at envy tolerance ``label_tol``
    (default ``eps / 4``). The first round subdivides the whole weight simplex
    until its mesh meets ``c_schedule[0]``, checks that the number of
    completely labeled pieces is odd, and takes the one with the
    lexicographically smallest barycenter. Each later round k lays a uniform
    grid of mesh at most ``c_k`` on the weight simplex and locates a
    completely labeled cell of it by path following restarted from the
    previous round's barycenter (:class:`PathFollower`). Only cells along the
    path are labeled, so a round costs a handful of solves once the rounds
    have homed in.

    ``warm`` is an optional decreasing sequence of larger regularization
    weights solved first, each to the same envy ``eps``. Larger weights
    smooth the optimum, so their label regions are wide and coarse grids see
    them correctly; each stage restarts from the previous stage's answer on
    a grid matched to that stage's weight. Without it, coarse grids can
    report completely labeled cells inside the narrow zones where the
    optimum switches, far from any envy-free point.

    The search returns the first weights it evaluates, barycenter or labeled
    vertex, whose optimum has max envy at most ``eps``.

    Raises:
        RefinementFailureError: schedule or pivot budget (``max_nodes``)
            exhausted; carries the least-envy ``(weights, max_envy)`` pair seen.
    """
    n = space.n_agents
    tol = eps / 4 if label_tol is None else label_tol
    tr = trace if trace is not None else RefinementTrace()
    schedule = list(default_schedule(n) if c_schedule is None else c_schedule)
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("mesh schedule must be strictly decreasing")
    warm = list(warm)
    if any(b >= a for a, b in zip(warm, warm[1:])) or any(w <= delta for w in warm):
        raise ValueError("warm weights must decrease strictly and exceed delta")
    spread = max(float(np.ptp(t)) for t in utility_table(space, prefs)) or 1.0
    best: list = [None, math.inf]
    x0 = None
    for stage, d in enumerate(warm + [delta]):
        final = stage == len(warm)
        cfg = SolverConfig(d, opt_tol)
        lab = labeler if final and labeler is not None else Labeler(
            space, prefs, cfg, envy_tol=tol, rule=SLACK)
        if x0 is None:
            sched = schedule
        else:
            # the answer moves on the order of the previous weight over the utility spread
            start = WARM_MESH * warm[stage - 1] / spread
            sched = [c for c in schedule if c <= start]
        try:
            x0, sol = _refine_stage(lab, n, eps, sched, x0, tr, max_nodes, workers,
                                    best if final else None)
        except RefinementFailureError as exc:
            if final:
                raise
            x0 = exc.best[0]
        if final:
            return x0, sol
    raise AssertionError("unreachable")


ROUND_PIVOTS = 4000
ROUND_RETRIES = 3
WARM_FACTOR = 4.0
WARM_MESH = 1.0


def warm_weights(delta: float, spread: float, factor: float = WARM_FACTOR) -> list[float]:
    """Geometric sequence of regularization weights from ``spread`` down toward ``delta``."""
    out, w = [], delta * factor
    while w < spread:
        out.append(w)
        w *= factor
    return out[::-1]


def _refine_stage(lab: Labeler, n: int, eps: float, schedule: list, x0: WeightVector | None,
                  tr: RefinementTrace, max_nodes: int, workers: int,
                  best: list | None) -> tuple[WeightVector, QSolution]:
    """One regularization weight: root round when ``x0`` is None, then restarted paths."""
    best = best if best is not None else [None, math.inf]

    def evaluate(lam: WeightVector):
        sol = lab.solve(lam)
        env = float(lab.envy(sol).max())
        if env < best[1]:
            best[0], best[1] = lam, env
        return sol, env

    def fail(why: str):
        raise RefinementFailureError(f"{why}; best max envy {best[1]:.3e}", (best[0], best[1]))

    if x0 is None:
        root = Simplex.standard(n)
        lam = root.barycenter
        sol, env = evaluate(lam)
        tr.rows.append((0, root.diameter, n, 1, str(lam), env))
        tr.mesh, tr.rounds = root.diameter, 0
        if n == 1 or env <= eps:
            return lam, sol
        if not schedule:
            fail("empty mesh schedule")
        cplx = _subdivide_to(root, schedule[0])
        label_complex(cplx, lab, workers)
        cl = find_completely_labeled(cplx, require_odd=True)
        tr.complexes.append(cplx)
        tr.rounds, tr.mesh = 1, cplx.mesh
        for v in cplx.vertices:
            sol, env = evaluate(v)
            if env <= eps:
                tr.rows.append((1, cplx.mesh, len(cplx.vertices), len(cl), str(v), env))
                return v, sol
        pick = min(cl, key=barycenter_key)
        x0 = pick.barycenter
        sol, env = evaluate(x0)
        tr.rows.append((1, cplx.mesh, len(cplx.vertices), len(cl), str(x0), env))
        tr.mesh = pick.diameter
        schedule = schedule[1:]
    else:
        sol, env = evaluate(x0)
    if env <= eps:
        return x0, sol

    m_prev = 0
    for ck in schedule:
        m = max(m_prev + 1, math.ceil(math.sqrt(2.0) / ck))
        # a path that wanders along a thin label strip is abandoned and the
        # round retried on a finer grid from the same restart point
        for attempt in range(ROUND_RETRIES + 1):
            left = max_nodes - tr.nodes
            if left <= 0:
                fail(f"pivot budget {max_nodes} exhausted")
            cap = left if attempt == ROUND_RETRIES else min(left, ROUND_PIVOTS)
            pf = PathFollower(lab, n, m, x0, max_pivots=cap, stop_envy=eps)
            try:
                verts = pf.run()
            except RefinementFailureError:
                tr.nodes += pf.pivots
                m = 2 * m + 1
                continue
            tr.nodes += pf.pivots
            break
        else:
            fail(f"pivot budget {max_nodes} exhausted")
        m_prev = m
        mesh = math.sqrt(2.0) / m
        tr.rounds += 1
        tr.mesh = mesh
        if pf.hit is not None:
            lam, sol, env = pf.hit
            evaluate(lam)
            tr.rows.append((tr.rounds, mesh, pf.pivots, 0, str(lam), env))
            return lam, sol
        if verts is None:
            raise SpernerViolationError(f"path following found no completely labeled cell at m={m}")
        cell = Simplex(tuple(verts))
        x0 = cell.barycenter
        sol, env = evaluate(x0)
        tr.rows.append((tr.rounds, cell.diameter, pf.pivots, 1, str(x0), env))
        tr.mesh = cell.diameter
        if env <= eps:
            return x0, sol
    fail(f"{tr.rounds} rounds exhausted")


# --------------------------------------------------------------------------
# certificate


@dataclass(frozen=True)
class FairCertificate:
    lambda_bar: WeightVector
    lottery: Lottery
    max_envy: float
    wpe_gap: float
    delta_final: float
    mesh_final: float
    subdivision_rounds: int
    epsilon: float = 0.0
    instance_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "lambda_bar": [str(w) for w in self.lambda_bar.weights],
            "lottery": [[k, _num(w)] for k, w in self.lottery.support],
            "max_envy": self.max_envy,
            "wpe_gap": self.wpe_gap,
            "delta_final": self.delta_final,
            "mesh_final": self.mesh_final,
            "subdivision_rounds": self.subdivision_rounds,
            "epsilon": self.epsilon,
            "instance_digest": self.instance_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "FairCertificate":
        return cls(
            lambda_bar=WeightVector(tuple(Fraction(w) for w in d["lambda_bar"])),
            lottery=Lottery(tuple((int(k), _parse_num(w)) for k, w in d["lottery"])),
            max_envy=float(d["max_envy"]), wpe_gap=float(d["wpe_gap"]),
            delta_final=float(d["delta_final"]), mesh_final=float(d["mesh_final"]),
            subdivision_rounds=int(d["subdivision_rounds"]),
            epsilon=float(d.get("epsilon", 0.0)),
            instance_digest=d.get("instance_digest", ""))

    @classmethod
    def from_json(cls, text: str) -> "FairCertificate":
        return cls.from_dict(json.loads(text))


def _num(w):
    return str(w) if isinstance(w, Fraction) else float(w)


def _parse_num(w):
    return Fraction(w) if isinstance(w, str) else float(w)


def solve_fair(space: DeterministicSpace, prefs: Sequence[Preference], eps: float, *,
               c_schedule: Sequence[float] | None = None, opt_tol: float = 1e-9,
               label_tol: float | None = None, max_nodes: int = 200000, workers: int = 1,
               trace: RefinementTrace | None = None) -> FairCertificate:
    """An ``eps``-envy-free lottery that is weakly Pareto efficient up to ``eps + delta N``.

    The regularization weight is ``delta = eps / N``, so that ``delta * G <= eps``
    on every lottery.

    Raises:
        InvalidInstanceError: the space is not closed under agent swaps.
        RefinementFailureError: no envy-free weights found within budget.
        WPECheckFailure: the recomputed Pareto gap exceeds ``eps + delta N``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    report = validate_space(space)
    if not report.permutation_invariant:
        x, i, j = report.witness
        raise InvalidInstanceError(
            f"space '{space.name}' is not closed under agent swaps: swapping agents "
            f"{i + 1} and {j + 1} in ({','.join(item_label(y) for y in x)}) leaves the space")
    if len(prefs) != space.n_agents:
        raise InvalidInstanceError(f"{len(prefs)} preferences for {space.n_agents} agents")
    n = space.n_agents
    delta = eps / n
    tr = trace if trace is not None else RefinementTrace()
    spread = max(float(np.ptp(t)) for t in utility_table(space, prefs))
    lam, sol = refine_to_lambda(space, prefs, delta, eps, c_schedule, opt_tol=opt_tol,
                                label_tol=label_tol, max_nodes=max_nodes, workers=workers,
                                trace=tr, warm=warm_weights(delta, spread))
    env = max_envy(space, sol.lottery, prefs)
    gap = wpe_gap(space, prefs, sol.lottery)
    if gap > eps + delta * n:
        raise WPECheckFailure(f"Pareto gap {gap:.3e} exceeds {eps + delta * n:.3e}")
    return FairCertificate(lam, sol.lottery, env, gap, delta, tr.mesh, tr.rounds, eps,
                           space.digest)


def envy_cycles(E: np.ndarray, support: Iterable[int], tol: float) -> list[tuple[int, ...]]:
    """Simple cycles in the strict-envy graph restricted to ``support``."""
    sup = sorted(support)
    out = []
    for r in range(2, len(sup) + 1):
        for combo in itertools.permutations(sup, r):
            if combo[0] != min(combo):
                continue
            if all(E[combo[i], combo[(i + 1) % r]] > tol for i in range(r)):
                out.append(combo)
    return out
