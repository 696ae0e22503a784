"""Exact rational revised simplex for small dense LPs in standard form.

Solves ``min c.x  s.t.  A x = b, x >= 0`` over the rationals. Pricing is
screened in floating point and every decision is confirmed exactly, so the
returned basis and solution are exact. Degenerate stalls switch to Bland's
rule, which cannot cycle.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: tuple  # Fractions, length n (empty unless feasible)
    value: Fraction | None
    iterations: int


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


class _Tableau:
    def __init__(self, A: Sequence[Sequence], b: Sequence):
        self.m = len(A)
        self.n = len(A[0]) if self.m else 0
        self.A = [[_frac(v) for v in row] for row in A]
        self.b = [_frac(v) for v in b]
        for i in range(self.m):
            if self.b[i] < 0:
                self.A[i] = [-v for v in self.A[i]]
                self.b[i] = -self.b[i]
        self.Af = np.array([[float(v) for v in row] for row in self.A]).reshape(self.m, self.n)
        # artificial basis: column n + i is the i-th unit vector
        self.basis = [self.n + i for i in range(self.m)]
        self.Binv = [[Fraction(int(i == k)) for k in range(self.m)] for i in range(self.m)]
        self.xB = list(self.b)
        self.iterations = 0

    def column(self, j: int) -> list[Fraction]:
        if j >= self.n:
            return [Fraction(int(i == j - self.n)) for i in range(self.m)]
        return [self.A[i][j] for i in range(self.m)]

    def ftran(self, col: list[Fraction]) -> list[Fraction]:
        nz = [(k, v) for k, v in enumerate(col) if v]
        return [sum((row[k] * v for k, v in nz), Fraction(0)) for row in self.Binv]

    def duals(self, cost) -> list[Fraction]:
        cB = [cost(j) for j in self.basis]
        y = [Fraction(0)] * self.m
        for i, ci in enumerate(cB):
            if ci:
                row = self.Binv[i]
                y = [yk + ci * rk for yk, rk in zip(y, row)]
        return y

    def pivot(self, r: int, j: int, d: list[Fraction]):
        piv = d[r]
        rowr = [v / piv for v in self.Binv[r]]
        xr = self.xB[r] / piv
        for i in range(self.m):
            if i == r or not d[i]:
                continue
            f = d[i]
            self.Binv[i] = [a - f * c for a, c in zip(self.Binv[i], rowr)]
            self.xB[i] -= f * xr
        self.Binv[r] = rowr
        self.xB[r] = xr
        self.basis[r] = j
        self.iterations += 1

    def run(self, cost, cost_f: np.ndarray, phase_two: bool, max_iters: int, stop_at_zero=False):
        """Optimize the given cost over the current basis. Returns a status."""
        degenerate = 0
        while self.iterations < max_iters:
            if stop_at_zero and sum(self.xB[i] for i in range(self.m)
                                    if self.basis[i] >= self.n) == 0:
                return OPTIMAL
            y = self.duals(cost)
            yf = np.array([float(v) for v in y])
            rc_f = cost_f - yf @ self.Af if self.n else np.zeros(0)
            in_basis = np.zeros(self.n, dtype=bool)
            for j in self.basis:
                if j < self.n:
                    in_basis[j] = True
            rc_f[in_basis] = np.inf
            bland = degenerate > 50
            cand = np.nonzero(rc_f < 1e-7)[0]
            if not bland:
                cand = cand[np.argsort(rc_f[cand], kind="stable")]
            enter = None
            for j in cand:
                j = int(j)
                rc = cost(j) - sum((y[i] * self.A[i][j] for i in range(self.m) if self.A[i][j]),
                                   Fraction(0))
                if rc < 0:
                    enter = j
                    break
            if enter is None:
                return OPTIMAL
            d = self.ftran(self.column(enter))
            best_r, best_ratio = None, None
            for i in range(self.m):
                if phase_two and self.basis[i] >= self.n and d[i] != 0:
                    ratio = Fraction(0)  # artificial pinned at zero
                elif d[i] > 0:
                    ratio = self.xB[i] / d[i]
                else:
                    continue
                if (best_ratio is None or ratio < best_ratio or
                        (ratio == best_ratio and self.basis[i] < self.basis[best_r])):
                    best_r, best_ratio = i, ratio
            if best_r is None:
                return UNBOUNDED
            degenerate = degenerate + 1 if best_ratio == 0 else 0
            self.pivot(best_r, enter, d)
        return ITERATION_LIMIT

    def solution(self) -> tuple:
        x = [Fraction(0)] * self.n
        for i, j in enumerate(self.basis):
            if j < self.n:
                x[j] = self.xB[i]
        return tuple(x)


def solve_lp(A: Sequence[Sequence], b: Sequence, c: Sequence | None = None,
             max_iters: int = 100000) -> LPResult:
    """Minimize ``c.x`` subject to ``A x = b, x >= 0`` exactly.

    With ``c`` omitted only feasibility is decided (phase one), stopping as
    soon as a feasible basis is found.
    """
    tab = _Tableau(A, b)
    n = tab.n

    def cost1(j):
        return Fraction(int(j >= n))

    status = tab.run(cost1, np.zeros(n), False, max_iters, stop_at_zero=True)
    if status == ITERATION_LIMIT:
        return LPResult(status, (), None, tab.iterations)
    infeas = sum(tab.xB[i] for i in range(tab.m) if tab.basis[i] >= n)
    if infeas > 0:
        return LPResult(INFEASIBLE, (), None, tab.iterations)
    if c is None:
        return LPResult(OPTIMAL, tab.solution(), Fraction(0), tab.iterations)
    cq = [_frac(v) for v in c]

    def cost2(j):
        return cq[j] if j < n else Fraction(0)

    status = tab.run(cost2, np.array([float(v) for v in cq]), True, max_iters)
    x = tab.solution()
    if status != OPTIMAL:
        return LPResult(status, x if status == ITERATION_LIMIT else (), None, tab.iterations)
    return LPResult(OPTIMAL, x, sum((ci * xi for ci, xi in zip(cq, x)), Fraction(0)),
                    tab.iterations)
