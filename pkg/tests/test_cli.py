import csv
import io as stdio
import json

import numpy as np
import pytest

from fairdiv import io
from fairdiv.cake import CellMeasure, SimpleAllocation
from fairdiv.cli import main
from fairdiv.instance import gen_cake_space, gen_hz, gen_pazner_schmeidler
from fairdiv.preferences import EU, MAXMIN, Lottery, Preference
from fairdiv.sperner import FairCertificate


def prefs_for(space, rng, maxmin=False):
    out = []
    for _ in range(space.n_agents):
        k = int(rng.integers(2, 4)) if maxmin else 1
        out.append(Preference(EU if k == 1 else MAXMIN,
                              tuple({y: float(rng.random()) for y in space.items} for _ in range(k))))
    return out


@pytest.fixture
def hz3(tmp_path):
    sp = gen_hz(3)
    prefs = prefs_for(sp, np.random.default_rng(0), maxmin=True)
    inst, pref = tmp_path / "hz3.json", tmp_path / "prefs.json"
    io.write(inst, io.instance_to_dict(sp))
    io.write(pref, io.prefs_to_dict(sp, prefs))
    return sp, prefs, str(inst), str(pref)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


# -- file formats --------------------------------------------------------------


def test_instance_roundtrip(tmp_path):
    for sp in (gen_hz(3), gen_cake_space(2, 3), gen_pazner_schmeidler(4)):
        assert io.load_instance(io.instance_to_dict(sp)).digest == sp.digest


def test_explicit_instance():
    sp = io.load_instance({"kind": "explicit", "params": {"n_agents": 2},
                           "explicit_allocations": [["A", "B"], ["B", "A"]]})
    assert len(sp) == 2 and sp.items == ("A", "B")


def test_prefs_roundtrip(hz3):
    sp, prefs, _, pref = hz3
    again = io.load_prefs(pref, sp)
    for a, b in zip(prefs, again):
        assert a.kind == b.kind
        assert np.array_equal(a.matrix(sp.items), b.matrix(sp.items))


def test_prefs_missing_item_rejected():
    sp = gen_hz(2)
    with pytest.raises(ValueError):
        io.load_prefs({"agents": [{"kind": "eu", "index": {"0": 1.0}}] * 2}, sp)


def test_lottery_and_cake_roundtrip():
    p = io.load_lottery({"lottery": [[0, "1/3"], [2, "2/3"]]})
    assert io.load_lottery(io.lottery_to_dict(p)) == p
    mu = CellMeasure(((1, 2), (3, 4)))
    f = SimpleAllocation((("1/2", "1/3"), ("1/2", "2/3")))
    mu2, w2, f2 = io.load_cake(json.loads(io.dumps(io.cake_to_dict(mu, f.cells, f))))
    assert mu2 == mu and f2 == f and w2 == f.cells


# -- commands ------------------------------------------------------------------


def test_validate(capsys, hz3, tmp_path):
    code, out, _ = run(capsys, "validate", hz3[2])
    assert code == 0 and "permutation_invariant=true" in out
    pz = tmp_path / "pz.json"
    io.write(pz, {"kind": "pazner_schmeidler", "params": {"grid": 5}})
    code, out, _ = run(capsys, "validate", pz)
    assert code == 1
    assert "permutation_invariant=false" in out and "witness=" in out and "missing=" in out


def test_envy_csv(capsys, hz3, tmp_path):
    sp, prefs, inst, pref = hz3
    lot = tmp_path / "lot.json"
    io.write(lot, {"lottery": [[0, "1/2"], [3, "1/2"]]})
    code, out, _ = run(capsys, "envy", inst, pref, lot)
    rows = list(csv.reader(stdio.StringIO(out)))
    assert code == 0 and rows[0] == ["agent", "1", "2", "3"]
    E = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    assert np.all(np.diag(E) == 0.0)


def test_maximize(capsys, hz3, tmp_path):
    _, _, inst, pref = hz3
    trace = tmp_path / "t.csv"
    code, out, _ = run(capsys, "maximize", inst, pref, "--lambda", "1/2,1/4,1/4",
                       "--delta", "0.01", "--tol", "1e-9", "--trace", trace)
    res = json.loads(out)
    assert code == 0 and res["duality_gap"] <= 1e-9
    assert sum(w if isinstance(w, float) else eval(str(w)) for _, w in res["lottery"]) == pytest.approx(1)
    header = trace.read_text().splitlines()[0]
    assert header == "iter,gap,q_value"


def test_solve_and_oracle_check(capsys, hz3, tmp_path):
    _, _, inst, pref = hz3
    cert, trace, svg = tmp_path / "c.json", tmp_path / "t.csv", tmp_path / "s.svg"
    code, _, _ = run(capsys, "solve", inst, pref, "--eps", "1e-3", "--trace", trace,
                     "--plot", svg, "--out", cert)
    assert code == 0
    c = FairCertificate.from_json(cert.read_text())
    assert c.max_envy <= 1e-3
    rows = trace.read_text().splitlines()
    assert rows[0] == "round,mesh,n_vertices,n_completely_labeled,candidate_lambda,max_envy"
    assert svg.read_text().startswith("<svg")
    code, out, _ = run(capsys, "oracle-check", inst, pref, cert)
    assert code == 0 and "result=pass" in out
    bad = json.loads(cert.read_text())
    bad["max_envy"] = 0.5
    cert.write_text(json.dumps(bad))
    code, out, _ = run(capsys, "oracle-check", inst, pref, cert)
    assert code == 1 and "violation=" in out


def test_solve_refuses_counterexample(capsys, tmp_path):
    sp = gen_pazner_schmeidler(5)
    inst, pref = tmp_path / "pz.json", tmp_path / "p.json"
    io.write(inst, io.instance_to_dict(sp))
    io.write(pref, io.prefs_to_dict(sp, prefs_for(sp, np.random.default_rng(1))))
    code, out, err = run(capsys, "solve", inst, pref, "--eps", "1e-3")
    assert code == 1 and out == "" and "not closed under agent swaps" in err


def test_decompose_methods(capsys, tmp_path):
    cake = tmp_path / "cake.json"
    io.write(cake, {"widths": ["1/2", "1/2"], "masses": [[1, 1], [2, 0]],
                    "allocation": [["1/5", "1/2"], ["4/5", "1/2"]]})
    for method in ("two-agent", "greedy", "farkas"):
        code, out, _ = run(capsys, "decompose", cake, "--method", method)
        rows = list(csv.reader(stdio.StringIO(out)))[1:]
        assert code == 0
        from fractions import Fraction
        assert sum(Fraction(w) for w, _ in rows) == 1
    code, out, _ = run(capsys, "decompose", cake, "--method", "two-agent")
    assert out.splitlines()[1:] == ['1/5,"1,1"', '3/10,"2,1"', '1/2,"2,2"']


def test_cake_solve(capsys, tmp_path):
    cake = tmp_path / "cake.json"
    io.write(cake, {"masses": [[1, 0], [0, 1]]})
    code, out, _ = run(capsys, "cake-solve", cake, "--eps", "1e-3")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# max_envy=")
    assert lines[2:] == ['1,"1,2"']


def test_bad_input_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "validate", bad)
    assert code == 1 and err.startswith("error:")
    code, _, _ = run(capsys, "validate", tmp_path / "missing.json")
    assert code == 1
