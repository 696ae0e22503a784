"""Regularized weighted-welfare maximization over lotteries.

The objective is

    Q(p) = sum_j lam_j U_j(p^j) - delta * G(p),    G(p) = sum_j ||p^j||^2,

which depends on p only through the marginal profile P (an ``N x M`` array).
The feasible profiles form the polytope conv{B_x : x in X}, where B_x is the
0/1 array with a single one per agent row.

For expected-utility agents maximizing Q is a Euclidean projection of
``c / (2 delta)`` (``c_j = lam_j u_j``) onto that polytope, solved exactly by
Wolfe's nearest-point method, a fully corrective Frank-Wolfe scheme driven by
:func:`linear_oracle`. Maxmin agents are handled by a primal active-set method
that extends Wolfe's corral with working sets of binding utility indices; its
multipliers are index weights w, and the Lagrangian form
``<c(w), P> - delta ||P||^2`` prices new vertices through the same oracle.
Every returned solution carries a certified upper bound on its optimality gap.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import InvalidInstanceError, NonConvergenceError
from .instance import DeterministicSpace
from .preferences import (Lottery, Marginal, Preference, marginal_matrix,
                          utility_table)


# --------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class WeightVector:
    """A point of the Pareto-weight simplex, held as exact rationals."""

    weights: tuple

    def __post_init__(self):
        ws = tuple(w if isinstance(w, Fraction) else
                   Fraction(str(w)) if isinstance(w, float) else Fraction(w)
                   for w in self.weights)
        if not ws:
            raise ValueError("empty weight vector")
        if any(w < 0 for w in ws):
            raise ValueError("weights must be nonnegative")
        if sum(ws) != 1:
            raise ValueError(f"weights sum to {sum(ws)}, not exactly 1")
        object.__setattr__(self, "weights", ws)

    @classmethod
    def uniform(cls, n: int) -> "WeightVector":
        return cls(tuple(Fraction(1, n) for _ in range(n)))

    @classmethod
    def vertex(cls, n: int, j: int) -> "WeightVector":
        return cls(tuple(Fraction(int(i == j)) for i in range(n)))

    @classmethod
    def parse(cls, text: str) -> "WeightVector":
        return cls(tuple(Fraction(s.strip()) for s in text.split(",")))

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def support(self) -> frozenset:
        return frozenset(j for j, w in enumerate(self.weights) if w > 0)

    def as_array(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def __str__(self) -> str:
        return ",".join(str(w) for w in self.weights)


@dataclass(frozen=True)
class SolverConfig:
    delta: float
    opt_tol: float = 1e-9
    max_iters: int = 10000

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.opt_tol > 0:
            raise ValueError("opt_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class QSolution:
    lottery: Lottery
    marginals: np.ndarray  # N x M, aligned to space.items
    q_value: float
    welfare: float
    duality_gap: float
    items: tuple = ()
    iterations: int = 0
    trace: tuple = field(default=(), compare=False, repr=False)

    def marginal(self, j: int) -> Marginal:
        return Marginal({y: float(v) for y, v in zip(self.items, self.marginals[j]) if v > 0})

    @property
    def marginal_profile(self) -> list[Marginal]:
        return [self.marginal(j) for j in range(self.marginals.shape[0])]


# --------------------------------------------------------------------------
# regularizer and oracle


def regularizer_G(marginals) -> tuple[float, np.ndarray]:
    """``G = sum_j sum_y P[j, y]^2`` and its gradient ``2 P``."""
    if isinstance(marginals, np.ndarray):
        P = marginals.astype(float)
        return float(np.sum(P * P)), 2.0 * P
    vals = [np.array([float(v) for v in m.weights.values()]) for m in marginals]
    g = float(sum(np.sum(v * v) for v in vals))
    grads = [{y: 2.0 * float(v) for y, v in m.weights.items()} for m in marginals]
    return g, grads


def _score_array(space: DeterministicSpace, scores) -> np.ndarray:
    if isinstance(scores, np.ndarray):
        arr = np.asarray(scores, dtype=float)
    else:
        rows = []
        for s in scores:
            if isinstance(s, dict):
                rows.append([float(s[y]) for y in space.items])
            else:
                rows.append([float(v) for v in s])
        arr = np.array(rows, dtype=float)
    if arr.shape != (space.n_agents, len(space.items)):
        raise InvalidInstanceError(
            f"scores of shape {arr.shape} do not cover {space.n_agents} agents x "
            f"{len(space.items)} items")
    return arr


def allocation_values(space: DeterministicSpace, scores: np.ndarray) -> np.ndarray:
    """``sum_j scores[j, x_j]`` for every allocation x."""
    return scores[np.arange(space.n_agents), space.coords].sum(axis=1)


def linear_oracle(space: DeterministicSpace, scores) -> int:
    """Index of the allocation maximizing the separable score; lowest index on ties."""
    vals = allocation_values(space, _score_array(space, scores))
    return int(np.argmax(vals))


# --------------------------------------------------------------------------
# nearest point (Wolfe)


class _Polytope:
    """Vertex access for the marginal polytope of a space, in flattened form."""

    def __init__(self, space: DeterministicSpace):
        self.space = space
        self.n = space.n_agents
        self.m = len(space.items)
        self.flat = space.coords + np.arange(self.n)[None, :] * self.m  # |X| x N

    def vertices(self, idx: Sequence[int]) -> np.ndarray:
        out = np.zeros((self.n * self.m, len(idx)))
        for col, k in enumerate(idx):
            out[self.flat[k], col] = 1.0
        return out

    def best(self, scores_flat: np.ndarray) -> int:
        return int(np.argmax(scores_flat[self.flat].sum(axis=1)))


def _affine_minimizer(V: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Coefficients beta (sum 1) minimizing ||V beta - t|| over the affine hull."""
    if V.shape[1] == 1:
        return np.ones(1)
    base = V[:, 0] - t
    D = V[:, 1:] - V[:, :1]
    gamma = np.linalg.lstsq(D, -base, rcond=None)[0]
    return np.concatenate([[1.0 - gamma.sum()], gamma])


def nearest_point(poly: _Polytope, t: np.ndarray, corral: list[int] | None = None,
                  weights: np.ndarray | None = None, max_iters: int = 10000,
                  rel_tol: float = 1e-13,
                  on_iter=None) -> tuple[list[int], np.ndarray, np.ndarray, float, int]:
    """Minimize ``||P - t||`` over the polytope with Wolfe's corral iteration.

    Returns ``(corral, weights, P, gap, iterations)`` where ``gap`` is the
    Frank-Wolfe gap ``<P - t, P - B_v>`` of the final point. ``on_iter`` is
    called as ``on_iter(iteration, gap, P)`` after each major cycle.
    """
    if corral is None:
        S = [poly.best(t)]
        a = np.ones(1)
    else:
        S = list(corral)
        a = np.asarray(weights, dtype=float).copy()
    V = poly.vertices(S)
    it = 0
    while True:
        # minor cycle: move to the nearest point of the corral's hull
        for _ in range(len(S) + 1):
            beta = _affine_minimizer(V, t)
            if np.all(beta > 1e-14):
                a = beta
                break
            neg = beta <= 1e-14
            ratios = a[neg] / np.maximum(a[neg] - beta[neg], 1e-300)
            theta = float(np.clip(ratios.min(), 0.0, 1.0))
            a = (1 - theta) * a + theta * beta
            keep = a > 1e-14
            if keep.all():
                keep[np.argmin(a)] = False
            S = [s for s, kp in zip(S, keep) if kp]
            a = a[keep]
            a /= a.sum()
            V = V[:, keep]
        if it >= max_iters:
            break
        it += 1
        P = V @ a
        z = P - t
        v = poly.best(-z)
        Bv = poly.vertices([v])[:, 0]
        gap = float(z @ (P - Bv))
        if on_iter is not None:
            on_iter(it, max(gap, 0.0), P)
        if gap <= rel_tol * (1.0 + float(np.linalg.norm(z))) or v in S:
            break
        S.append(v)
        a = np.append(a, 0.0)
        V = np.column_stack([V, Bv])
    P = V @ a
    z = P - t
    v = poly.best(-z)
    gap = max(0.0, float(z @ (P - poly.vertices([v])[:, 0])))
    return S, a, P, gap, it


# --------------------------------------------------------------------------
# problem data


class _Problem:
    def __init__(self, space: DeterministicSpace, prefs: Sequence[Preference],
                 lam: WeightVector, delta: float):
        if len(lam) != space.n_agents:
            raise InvalidInstanceError(f"weight vector has {len(lam)} entries for "
                                       f"{space.n_agents} agents")
        self.space = space
        self.poly = _Polytope(space)
        self.n, self.m = space.n_agents, len(space.items)
        self.lam = lam.as_array()
        self.delta = float(delta)
        tables = utility_table(space, prefs)
        self.tables = [np.unique(u, axis=0) for u in tables]
        self.full_tables = tables
        # agents whose weight matters and who hold several distinct indices
        self.mm = [j for j in range(self.n) if self.lam[j] > 0 and self.tables[j].shape[0] > 1]
        self.c_fixed = np.zeros((self.n, self.m))
        for j in range(self.n):
            if self.lam[j] > 0 and j not in self.mm:
                self.c_fixed[j] = self.lam[j] * self.tables[j][0]

    def c_of(self, w: dict[int, np.ndarray]) -> np.ndarray:
        c = self.c_fixed.copy()
        for j in self.mm:
            c[j] = self.lam[j] * (w[j] @ self.tables[j])
        return c

    def utilities(self, P: np.ndarray) -> np.ndarray:
        return np.array([np.min(u @ P[j]) for j, u in enumerate(self.full_tables)])

    def q_value(self, P: np.ndarray) -> tuple[float, float]:
        welfare = float(self.lam @ self.utilities(P))
        return welfare - self.delta * float(np.sum(P * P)), welfare

    def certificate(self, P: np.ndarray, w: dict[int, np.ndarray]) -> float:
        """Upper bound on ``max Q - Q(P)`` valid for any index weights w in the simplex."""
        c = self.c_of(w)
        grad = (c - 2 * self.delta * P).ravel()
        v = self.poly.best(grad)
        fw = float(grad @ (self.poly.vertices([v])[:, 0] - P.ravel()))
        slack = 0.0
        for j in self.mm:
            vals = self.tables[j] @ P[j]
            slack += self.lam[j] * (float(w[j] @ vals) - float(vals.min()))
        return max(0.0, fw) + max(0.0, slack)


# --------------------------------------------------------------------------
# solver


def _to_solution(prob: _Problem, S, alpha, P, gap, iters, trace) -> QSolution:
    alpha = np.asarray(alpha, dtype=float)
    pairs = [(int(s), float(a)) for s, a in zip(S, alpha) if a > 1e-15]
    total = sum(a for _, a in pairs)
    acc: dict[int, float] = {}
    for s, a in pairs:
        acc[s] = acc.get(s, 0.0) + a / total
    lottery = Lottery(tuple(acc.items()))
    P = marginal_matrix(prob.space, lottery)
    q, welfare = prob.q_value(P)
    return QSolution(lottery, P, q, welfare, float(gap), prob.space.items, iters, tuple(trace))


def solve_q(space: DeterministicSpace, prefs: Sequence[Preference], lam: WeightVector,
            cfg: SolverConfig, start: int | None = None,
            trace: list | None = None) -> QSolution:
    """Maximize ``sum_j lam_j U_j - delta G`` over lotteries on the space.

    Args:
        start: optional allocation index used as the initial vertex.
        trace: optional list receiving ``(iteration, gap, q_value)`` rows.

    Raises:
        NonConvergenceError: if the certified gap exceeds ``cfg.opt_tol``
            after ``cfg.max_iters`` iterations.
    """
    prob = _Problem(space, prefs, lam, cfg.delta)
    rows = trace if trace is not None else []
    init_S = None if start is None else [int(start)]
    init_a = None if start is None else np.ones(1)
    if not prob.mm:
        t = (prob.c_fixed / (2 * prob.delta)).ravel()
        on_iter = None
        if trace is not None:
            def on_iter(it, g, P):
                rows.append((it, 2 * prob.delta * g, prob.q_value(P.reshape(prob.n, prob.m))[0]))
        S, a, P, gap_np, iters = nearest_point(prob.poly, t, init_S, init_a, cfg.max_iters,
                                               on_iter=on_iter)
        gap = 2 * prob.delta * gap_np
        P2 = P.reshape(prob.n, prob.m)
        if not rows or rows[-1][0] != iters:
            rows.append((iters, gap, prob.q_value(P2)[0]))
        if gap > cfg.opt_tol:
            raise NonConvergenceError("nearest-point iteration stalled", gap)
        return _to_solution(prob, S, a, P2, gap, iters, rows)
    return _solve_maxmin(prob, cfg, init_S, init_a, rows)


def _solve_maxmin(prob: _Problem, cfg: SolverConfig, S, a, rows) -> QSolution:
    delta = prob.delta
    if S is None:
        # warm start: project under equal index weights
        w0 = {j: np.full(prob.tables[j].shape[0], 1.0 / prob.tables[j].shape[0])
              for j in prob.mm}
        t = (prob.c_of(w0) / (2 * delta)).ravel()
        S, a, _, _, _ = nearest_point(prob.poly, t, max_iters=cfg.max_iters)
    S, a, w, P, iters = _active_set(prob, list(S), np.asarray(a, dtype=float), cfg.max_iters, rows)
    cert = prob.certificate(P, w)
    if cert > cfg.opt_tol:
        # degenerate cycling is rare; restart from the oracle vertex of the last multipliers
        v = prob.poly.best((prob.c_of(w) - 2 * delta * P).ravel())
        S2, a2, w2, P2, it2 = _active_set(prob, [v], np.ones(1), cfg.max_iters, rows)
        cert2 = prob.certificate(P2, w2)
        iters += it2
        if cert2 < cert:
            S, a, w, P, cert = S2, a2, w2, P2, cert2
    if cert > cfg.opt_tol:
        raise NonConvergenceError("active-set iteration did not reach tolerance", cert)
    return _to_solution(prob, S, a, P, cert, iters, rows)


def _eqp(prob: _Problem, S: list[int], K: dict[int, list[int]]):
    """Solve the optimality system with the working sets held as equalities.

    Unknowns are the corral weights alpha, the index weights on each working
    set and the multiplier of ``sum(alpha) = 1``. The stationarity rows read
    ``<c(w), B_s> - 2 delta <B_s, P> = mu`` for every s in the corral.
    """
    ns = len(S)
    offs, col = {}, ns
    for j in prob.mm:
        offs[j] = col
        col += len(K[j])
    nv = col + 1
    V = prob.poly.vertices(S)
    gram = V.T @ V
    A = np.zeros((ns + 1 + sum(len(K[j]) for j in prob.mm), nv))
    b = np.zeros(A.shape[0])
    A[:ns, :ns] = -2 * prob.delta * gram
    A[:ns, -1] = -1.0
    b[:ns] = -(V.T @ prob.c_fixed.ravel())
    r = ns
    A[r, :ns] = 1.0
    b[r] = 1.0
    r += 1
    for j in prob.mm:
        items = prob.space.coords[S, j]
        vals = prob.lam[j] * prob.tables[j][K[j]][:, items]  # |K_j| x ns
        A[:ns, offs[j]:offs[j] + len(K[j])] = vals.T
        k0 = K[j][0]
        for k in K[j][1:]:
            A[r, :ns] = prob.tables[j][k, items] - prob.tables[j][k0, items]
            r += 1
        A[r, offs[j]:offs[j] + len(K[j])] = 1.0
        b[r] = 1.0
        r += 1
    sol = np.linalg.lstsq(A, b, rcond=None)[0]
    w = {j: sol[offs[j]:offs[j] + len(K[j])] for j in prob.mm}
    return sol[:ns], w, V


def _active_set(prob: _Problem, S: list[int], a: np.ndarray, max_iters: int, rows):
    """Primal active-set method for the maxmin program.

    The iterate stays feasible: ``a`` is a probability vector on the corral S
    and, for each maxmin agent, the working set K_j holds indices attaining
    the minimum utility. Each step moves toward the minimizer of the
    equality-constrained subproblem, stopping at the first blocking
    constraint (a corral weight hitting zero, or another index reaching the
    minimum). At a subproblem optimum, negative index weights release an
    index and a positive reduced cost from the linear oracle enlarges the
    corral, as in Wolfe's method.
    """
    n, m = prob.n, prob.m
    keep = a > 0
    S = [s for s, k in zip(S, keep) if k]
    a = a[keep] / a[keep].sum()
    V = prob.poly.vertices(S)
    P = (V @ a).reshape(n, m)
    K = {}
    for j in prob.mm:
        vals = prob.tables[j] @ P[j]
        K[j] = [int(np.argmin(vals))]
    w_full = {j: np.eye(prob.tables[j].shape[0])[K[j][0]] for j in prob.mm}
    scale = 1.0 + max(float(np.abs(prob.c_fixed).max()),
                      max(prob.lam[j] * np.abs(prob.tables[j]).max() for j in prob.mm))
    tol = 1e-13 * scale
    it = 0
    while it < max_iters:
        it += 1
        target, wk, V = _eqp(prob, S, K)
        d = target - a
        if np.abs(d).max() > 1e-9:
            theta, block = 1.0, None
            neg = d < 0
            if neg.any():
                ratios = a[neg] / -d[neg]
                i = int(np.argmin(ratios))
                if ratios[i] < theta:
                    theta, block = float(ratios[i]), ("corral", int(np.nonzero(neg)[0][i]))
            for j in prob.mm:
                items = prob.space.coords[S, j]
                k0 = K[j][0]
                diff = prob.tables[j][:, items] - prob.tables[j][k0, items]
                g0, g1 = diff @ a, diff @ d
                for k in range(prob.tables[j].shape[0]):
                    if k in K[j] or g1[k] >= -1e-15:
                        continue
                    th = max(0.0, g0[k]) / -g1[k]
                    if th < theta:
                        theta, block = th, ("index", j, k)
            a = target.copy() if block is None else a + theta * d
            if block is not None and block[0] == "corral":
                i = block[1]
                S.pop(i)
                a = np.delete(a, i)
                V = np.delete(V, i, axis=1)
            elif block is not None:
                K[block[1]].append(block[2])
            a = np.maximum(a, 0.0)
            a /= a.sum()
            if block is not None:
                continue
        # at the subproblem optimum: check index weights, then price
        negw = [(float(wk[j].min()), j) for j in prob.mm if len(K[j]) > 1 and wk[j].min() < -tol]
        if negw:
            _, j = min(negw)
            K[j].pop(int(np.argmin(wk[j])))
            continue
        P = (V @ a).reshape(n, m)
        w_full = {}
        for j in prob.mm:
            full = np.zeros(prob.tables[j].shape[0])
            full[K[j]] = np.maximum(wk[j], 0.0)
            w_full[j] = full / full.sum() if full.sum() > 0 else np.eye(len(full))[K[j][0]]
        grad = (prob.c_of(w_full) - 2 * prob.delta * P).ravel()
        v = prob.poly.best(grad)
        fw = float(grad @ (prob.poly.vertices([v])[:, 0] - P.ravel()))
        rows.append((it, max(fw, 0.0), prob.q_value(P)[0]))
        if fw <= tol or v in S:
            break
        S.append(v)
        a = np.append(a, 0.0)
        V = np.column_stack([V, prob.poly.vertices([v])[:, 0]])
    P = (V @ a).reshape(n, m)
    return S, a, w_full, P, it


# --------------------------------------------------------------------------
# memo


class QMemo:
    """Thread-safe map from (instance digest, lambda, delta, tol) to solutions."""

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}
        self.hits = 0
        self.misses = 0

    def get_or_solve(self, space: DeterministicSpace, prefs, lam: WeightVector,
                     cfg: SolverConfig, solver: Callable[..., QSolution] = None) -> QSolution:
        key = (space.digest, _prefs_key(prefs), lam.weights, cfg.delta, cfg.opt_tol)
        with self._lock:
            if key in self._data:
                self.hits += 1
                return self._data[key]
        sol = (solver or solve_q)(space, prefs, lam, cfg)
        with self._lock:
            self.misses += 1
            return self._data.setdefault(key, sol)

    def __len__(self) -> int:
        return len(self._data)


def _prefs_key(prefs) -> tuple:
    return tuple((p.kind, tuple(tuple(sorted((repr(k), float(v)) for k, v in u.items()))
                                for u in p.indices)) for p in prefs)


# --------------------------------------------------------------------------
# weak Pareto gap


def wpe_gap(space: DeterministicSpace, prefs: Sequence[Preference], p: Lottery,
            tol: float = 1e-9, max_iters: int = 1000) -> float:
    """Largest common utility improvement ``max_q min_j (U_j(q) - U_j(p))``.

    Column generation over allocations: a restricted master LP over a working
    set, priced by :func:`linear_oracle` with the master's dual weights. The
    returned value is the dual upper bound, which is valid for any weights,
    clipped at 0.
    """
    tables = utility_table(space, prefs)
    margs = marginal_matrix(space, p)
    n, m = space.n_agents, len(space.items)
    base = np.array([np.min(u @ margs[j]) for j, u in enumerate(tables)])
    pairs = [(j, k) for j in range(n) for k in range(tables[j].shape[0])]
    A = np.array([tables[j][k][space.coords[:, j]] for j, k in pairs])  # pairs x |X|
    b = np.array([base[j] for j, _ in pairs])
    work = sorted(set(p.indices))
    upper = math.inf
    for _ in range(max_iters):
        nw = len(work)
        # variables: q (nw), t ; maximize t  s.t.  t - A q <= -b
        cost = np.zeros(nw + 1)
        cost[-1] = -1.0
        A_ub = np.hstack([-A[:, work], np.ones((len(pairs), 1))])
        A_eq = np.concatenate([np.ones(nw), [0.0]])[None, :]
        res = linprog(cost, A_ub=A_ub, b_ub=-b, A_eq=A_eq, b_eq=[1.0],
                      bounds=[(0, None)] * nw + [(None, None)], method="highs")
        if res.status != 0:
            raise NonConvergenceError(f"master LP failed: {res.message}", upper)
        lower = -res.fun
        wts = np.maximum(-res.ineqlin.marginals, 0.0)
        if wts.sum() <= 0:
            wts = np.full(len(pairs), 1.0 / len(pairs))
        wts /= wts.sum()
        scores = np.zeros((n, m))
        for wr, (j, k) in zip(wts, pairs):
            scores[j] += wr * tables[j][k]
        vals = allocation_values(space, scores)
        v = int(np.argmax(vals))
        upper = min(upper, float(vals[v] - wts @ b))
        if upper - lower <= tol or v in work:
            break
        work = sorted(set(work) | {v})
    return max(0.0, upper)
