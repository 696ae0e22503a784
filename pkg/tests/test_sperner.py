import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairdiv.errors import InvalidInstanceError, SpernerViolationError
from fairdiv.instance import explicit_space, gen_cake_space, gen_hz, gen_pazner_schmeidler
from fairdiv.oracle import certify, exact_max_envy, lp_wpe_gap
from fairdiv.preferences import EU, MAXMIN, Preference, envy_matrix, marginal_matrix
from fairdiv.qsolver import SolverConfig, WeightVector, solve_q
from fairdiv.sperner import (FIRST, SLACK, FairCertificate, LabeledComplex, Labeler,
                             RefinementTrace, Simplex, barycentric_subdivide, default_schedule,
                             envy_cycles, envy_slack, find_completely_labeled, label_complex,
                             lucky_label, solve_fair, start_label, warm_weights)


def prefs_for(space, rng, maxmin=False):
    out = []
    for _ in range(space.n_agents):
        k = int(rng.integers(2, 4)) if maxmin else 1
        out.append(Preference(EU if k == 1 else MAXMIN,
                              tuple({y: float(rng.random()) for y in space.items} for _ in range(k))))
    return out


def random_proper(c: LabeledComplex, rng) -> LabeledComplex:
    for v in c.vertices:
        c.vertex_labels[v] = int(rng.choice(sorted(v.support)))
    return c


# -- subdivision --------------------------------------------------------------


def test_subdivision_counts():
    assert len(barycentric_subdivide(Simplex.standard(2)).simplices) == 2
    assert len(barycentric_subdivide(Simplex.standard(3)).simplices) == 6
    assert len(barycentric_subdivide(Simplex.standard(4)).simplices) == 24


@pytest.mark.parametrize("n", [2, 3, 4])
def test_mesh_contraction(n):
    c = LabeledComplex([Simplex.standard(n)])
    for _ in range(3 if n < 4 else 2):
        before = c.mesh
        c = barycentric_subdivide(c)
        assert c.mesh <= (n - 1) / n * before + 1e-12


def test_subdivision_is_exact_and_covers():
    c = barycentric_subdivide(barycentric_subdivide(Simplex.standard(3)))
    for s in c.simplices:
        for v in s.vertices:
            assert all(isinstance(w, Fraction) for w in v.weights)
            assert sum(v.weights) == 1
    # the children's areas add up to the parent's: 2-d determinant in the first two weights
    def area(s):
        (a1, a2, _), (b1, b2, _), (c1, c2, _) = (v.weights for v in s.vertices)
        return abs((b1 - a1) * (c2 - a2) - (c1 - a1) * (b2 - a2)) / 2
    assert sum(area(s) for s in c.simplices) == Fraction(1, 2)


def test_default_schedule():
    s = default_schedule(3)
    assert s[0] == pytest.approx(math.sqrt(2) * 2 / 3)
    assert all(b == pytest.approx(a * 2 / 3) for a, b in zip(s, s[1:]))
    assert default_schedule(1) == []


# -- parity -------------------------------------------------------------------


def test_single_agent_complex():
    c = LabeledComplex([Simplex.standard(1)])
    c.vertex_labels[WeightVector.vertex(1, 0)] = 0
    assert len(find_completely_labeled(c)) == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 3), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_random_proper_labelings_odd(n, rounds, seed):
    rounds = min(rounds, 2) if n == 3 else rounds
    c = LabeledComplex([Simplex.standard(n)])
    for _ in range(rounds):
        c = barycentric_subdivide(c)
    random_proper(c, np.random.default_rng(seed))
    assert len(find_completely_labeled(c, require_odd=False)) % 2 == 1


def test_improper_labels_rejected():
    c = barycentric_subdivide(Simplex.standard(2))
    for v in c.vertices:
        c.vertex_labels[v] = 1
    with pytest.raises(SpernerViolationError):
        find_completely_labeled(c)


def test_lucky_labels_proper_and_odd():
    rng = np.random.default_rng(7)
    sp = gen_hz(3)
    prefs = prefs_for(sp, rng, maxmin=True)
    c = barycentric_subdivide(barycentric_subdivide(Simplex.standard(3)))
    lab = Labeler(sp, prefs, SolverConfig(1e-3, 1e-9))
    label_complex(c, lab)
    c.check_proper()
    assert len(find_completely_labeled(c)) % 2 == 1


# -- labels -------------------------------------------------------------------


def test_lucky_label_examples():
    sp = gen_hz(3)
    prefs = prefs_for(sp, np.random.default_rng(8))
    cfg = SolverConfig(1e-3, 1e-9)
    assert lucky_label(WeightVector.vertex(3, 0), sp, prefs, cfg) == 0
    assert lucky_label(WeightVector.vertex(3, 2), sp, prefs, cfg) == 2
    u = Preference.eu({0: 1.0, 1: 0.3})
    assert lucky_label(WeightVector.uniform(2), gen_hz(2), [u, u], cfg) == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([FIRST, SLACK]))
def test_labels_in_carrier(seed, rule):
    rng = np.random.default_rng(seed)
    sp = [gen_hz(3), gen_cake_space(3, 2)][seed % 2]
    prefs = prefs_for(sp, rng, maxmin=bool(seed % 3 == 0))
    w = [Fraction(int(v)) for v in rng.integers(0, 4, 3)]
    if sum(w) == 0:
        w[0] = Fraction(1)
    lam = WeightVector(tuple(x / sum(w) for x in w))
    lab = Labeler(sp, prefs, SolverConfig(1e-2, 1e-9), rule=rule)
    j = lab.label(lam)
    assert j in lam.support
    E = lab.envy(lab.solve(lam))
    assert E[j].max() <= lab.envy_tol


def test_slack_rule_picks_least_envious():
    E = np.array([[0.0, -0.2, 0.1], [-0.5, 0.0, -0.1], [0.0, -0.3, 0.0]])
    assert list(envy_slack(E)) == [0.1, -0.1, 0.0]
    assert envy_slack(np.zeros((1, 1))).tolist() == [0.0]


def test_start_label_is_in_carrier():
    x0 = WeightVector((Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)))
    for lam in (WeightVector.uniform(3), WeightVector.vertex(3, 1),
                WeightVector((Fraction(1, 2), Fraction(0), Fraction(1, 2)))):
        assert start_label(lam, x0) in lam.support


def test_warm_weights_decrease():
    w = warm_weights(1e-4, 1.0)
    assert w == sorted(w, reverse=True)
    assert all(x > 1e-4 for x in w)


# -- envy cycles --------------------------------------------------------------


def test_envy_cycles_detects_swap_cycle():
    E = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert envy_cycles(E, [0, 1], 0.0) == [(0, 1)]
    assert envy_cycles(E, [0], 0.0) == []


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_no_profitable_envy_cycle_at_optimum(seed, maxmin):
    rng = np.random.default_rng(seed)
    sp = [gen_hz(3), gen_cake_space(3, 2)][seed % 2]
    prefs = prefs_for(sp, rng, maxmin)
    w = [Fraction(int(v)) for v in rng.integers(1, 5, 3)]
    lam = WeightVector(tuple(x / sum(w) for x in w))
    cfg = SolverConfig(1e-2, 1e-9)
    sol = solve_q(sp, prefs, lam, cfg)
    E = envy_matrix(sp, sol.lottery, prefs)
    lw = lam.as_array()
    for cyc in envy_cycles(E, lam.support, 0.0):
        gain = sum(lw[a] * E[a, cyc[(i + 1) % len(cyc)]] for i, a in enumerate(cyc))
        assert gain <= cfg.opt_tol


# -- solve_fair ---------------------------------------------------------------


def test_one_agent():
    sp = explicit_space(1, [("A",), ("B",)])
    cert = solve_fair(sp, [Preference.eu({"A": 1.0, "B": 0.0})], 1e-3)
    assert cert.lambda_bar == WeightVector.vertex(1, 0)
    assert cert.max_envy == 0.0
    assert cert.wpe_gap <= 1e-3


def test_identical_prefs_hz2_split_evenly():
    sp = gen_hz(2)
    u = Preference.eu({0: 1.0, 1: 0.0})
    eps = 1e-3
    cert = solve_fair(sp, [u, u], eps)
    M = marginal_matrix(sp, cert.lottery)
    assert np.allclose(M, 0.5, atol=eps)


def test_opposed_prefs_hz2_favorites():
    sp = gen_hz(2)
    prefs = [Preference.eu({0: 1.0, 1: 0.0}), Preference.eu({0: 0.0, 1: 1.0})]
    cert = solve_fair(sp, prefs, 1e-3)
    M = marginal_matrix(sp, cert.lottery)
    assert M[0, 0] == pytest.approx(1.0, abs=1e-3) and M[1, 1] == pytest.approx(1.0, abs=1e-3)
    assert cert.max_envy <= 1e-3


def test_symmetric_instance_uniform_weights():
    sp = gen_hz(3)
    u = Preference.eu({0: 0.9, 1: 0.5, 2: 0.1})
    cert = solve_fair(sp, [u, u, u], 1e-3)
    assert np.allclose(cert.lambda_bar.as_array(), 1 / 3, atol=max(cert.mesh_final, 1e-12))


def test_refuses_non_invariant():
    sp = gen_pazner_schmeidler(5)
    prefs = [Preference.eu({y: 0.0 for y in sp.items})] * 2
    with pytest.raises(InvalidInstanceError):
        solve_fair(sp, prefs, 1e-3)


@pytest.mark.parametrize("seed", range(4))
def test_hz3_certificate_checks(seed):
    sp = gen_hz(3)
    prefs = prefs_for(sp, np.random.default_rng(100 + seed), maxmin=bool(seed % 2))
    eps = 1e-3
    tr = RefinementTrace()
    cert = solve_fair(sp, prefs, eps, trace=tr)
    assert cert.delta_final == eps / 3
    assert float(exact_max_envy(sp, cert.lottery, prefs)) == pytest.approx(cert.max_envy, abs=1e-9)
    assert float(lp_wpe_gap(sp, prefs, cert.lottery)[0]) == pytest.approx(cert.wpe_gap, abs=1e-9)
    assert certify(sp, prefs, cert, eps).passed
    assert tr.rows and tr.rounds == cert.subdivision_rounds


def test_certificate_roundtrip():
    sp = gen_hz(3)
    prefs = prefs_for(sp, np.random.default_rng(9))
    cert = solve_fair(sp, prefs, 1e-3)
    again = FairCertificate.from_json(cert.to_json())
    assert again == cert
    assert again.to_json() == cert.to_json()


def test_eps_must_be_positive():
    with pytest.raises(ValueError):
        solve_fair(gen_hz(2), [Preference.eu({0: 1.0, 1: 0.0})] * 2, 0.0)
