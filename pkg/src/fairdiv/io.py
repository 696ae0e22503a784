"""JSON file formats for instances, preferences, lotteries, results and cakes.

Exact numbers are written as ``"p/q"`` strings and read back as Fractions;
plain JSON numbers are read as floats. Items are referred to by their text
labels (see :func:`fairdiv.instance.item_label`).
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .cake import CellMeasure, Decomposition, SimpleAllocation, exact
from .errors import InvalidInstanceError
from .instance import GENERATORS, DeterministicSpace, item_label
from .preferences import EU, MAXMIN, Lottery, Preference
from .qsolver import QSolution, WeightVector
from .sperner import FairCertificate


def _read(src) -> Any:
    if isinstance(src, dict):
        return src
    text = Path(src).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInstanceError(f"{src}: not valid JSON ({exc})") from None


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write(path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def num(x) -> Any:
    """JSON form of a number: Fractions as strings, everything else as float."""
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, int):
        return x
    return float(x)


def parse_num(x) -> Fraction | float:
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(x, int):
        return Fraction(x)
    return float(x)


# --------------------------------------------------------------------------
# instances


def instance_to_dict(space: DeterministicSpace) -> dict:
    if space.name in GENERATORS:
        return {"kind": space.name, "params": dict(space.params)}
    return {"kind": "explicit", "params": {"n_agents": space.n_agents},
            "explicit_allocations": [[item_label(y) for y in x] for x in space.allocations]}


def load_instance(src) -> DeterministicSpace:
    """Build a space from ``{"kind", "params", "explicit_allocations"?}``."""
    d = _read(src)
    kind = d.get("kind")
    params = dict(d.get("params") or {})
    if kind == "explicit" or "explicit_allocations" in d:
        allocs = d.get("explicit_allocations")
        if not allocs:
            raise InvalidInstanceError("explicit instance without allocations")
        n = int(params.get("n_agents", len(allocs[0])))
        return DeterministicSpace.build(n, [tuple(str(y) for y in x) for x in allocs],
                                        "explicit", {"n_agents": n})
    if kind not in GENERATORS:
        raise InvalidInstanceError(f"unknown instance kind {kind!r}; known: {sorted(GENERATORS)}")
    try:
        return GENERATORS[kind](**params)
    except TypeError as exc:
        raise InvalidInstanceError(f"bad parameters for {kind}: {exc}") from None


# --------------------------------------------------------------------------
# preferences


def prefs_to_dict(space: DeterministicSpace, prefs: Sequence[Preference]) -> dict:
    labels = space.item_space.labels
    agents = []
    for p in prefs:
        idx = [{lab: float(u[y]) for lab, y in zip(labels, space.items)} for u in p.indices]
        agents.append({"kind": p.kind, "index": idx[0] if p.kind == EU else idx})
    return {"agents": agents}


def load_prefs(src, space: DeterministicSpace) -> list[Preference]:
    """Per-agent records ``{"kind": "eu"|"maxmin", "index": map or list of maps}``."""
    d = _read(src)
    records = d["agents"] if isinstance(d, dict) else d
    by_label = dict(zip(space.item_space.labels, space.items))
    out = []
    for a, rec in enumerate(records):
        kind = rec.get("kind", EU)
        raw = rec["index"]
        maps = [raw] if isinstance(raw, dict) else list(raw)
        if kind == EU and len(maps) != 1:
            raise InvalidInstanceError(f"agent {a}: an eu preference has exactly one index")
        if kind not in (EU, MAXMIN):
            raise InvalidInstanceError(f"agent {a}: unknown preference kind {kind!r}")
        idx = []
        for m in maps:
            missing = [lab for lab in by_label if lab not in m]
            if missing:
                raise InvalidInstanceError(f"agent {a}: index misses items {missing[:5]}")
            idx.append({by_label[lab]: float(v) for lab, v in m.items() if lab in by_label})
        out.append(Preference(kind, tuple(idx)))
    if len(out) != space.n_agents:
        raise InvalidInstanceError(f"{len(out)} preference records for {space.n_agents} agents")
    return out


# --------------------------------------------------------------------------
# lotteries and results


def lottery_to_dict(p: Lottery) -> dict:
    return {"lottery": [[k, num(w)] for k, w in p.support]}


def load_lottery(src, space: DeterministicSpace | None = None) -> Lottery:
    """``{"lottery": [[allocation index, weight], ...]}``."""
    d = _read(src)
    pairs = d["lottery"] if isinstance(d, dict) else d
    p = Lottery(tuple((int(k), parse_num(w)) for k, w in pairs))
    if space is not None:
        p.validate_for(space)
    return p


def solution_to_dict(space: DeterministicSpace, sol: QSolution, lam: WeightVector,
                     delta: float) -> dict:
    labels = space.item_space.labels
    return {
        "lambda": [str(w) for w in lam.weights],
        "delta": delta,
        "lottery": [[k, num(w)] for k, w in sol.lottery.support],
        "marginals": [{lab: float(v) for lab, v in zip(labels, row) if v}
                      for row in sol.marginals],
        "q_value": sol.q_value,
        "welfare": sol.welfare,
        "duality_gap": sol.duality_gap,
        "iterations": sol.iterations,
        "instance_digest": space.digest,
    }


def certificate_to_json(cert: FairCertificate) -> str:
    return cert.to_json()


def load_certificate(src) -> FairCertificate:
    return FairCertificate.from_dict(_read(src))


# --------------------------------------------------------------------------
# cakes


def cake_to_dict(mu: CellMeasure, widths: Sequence, f: SimpleAllocation | None = None) -> dict:
    d = {"widths": [num(w) for w in widths],
         "masses": [[num(v) for v in row] for row in mu.cell_masses],
         "atoms": list(mu.atoms)}
    if f is not None:
        d["allocation"] = [[num(v) for v in row] for row in f.values]
    return d


def load_cake(src) -> tuple[CellMeasure, tuple, SimpleAllocation | None]:
    """``{"widths", "masses", "atoms"?, "allocation"?}`` as (measure, widths, allocation)."""
    d = _read(src)
    masses = d["masses"]
    n_cells = len(masses[0])
    widths = tuple(exact(w) for w in d.get("widths") or [Fraction(1, n_cells)] * n_cells)
    mu = CellMeasure(tuple(tuple(exact(v) for v in row) for row in masses),
                     tuple(d.get("atoms") or ()))
    f = None
    if d.get("allocation") is not None:
        f = SimpleAllocation(tuple(tuple(exact(v) for v in row) for row in d["allocation"]),
                             widths)
    return mu, widths, f


def decomposition_rows(dec: Decomposition) -> list[tuple[str, str]]:
    """``(weight, assignment)`` rows; the assignment lists the owner (1-based) of each cell."""
    return [(str(a), ",".join(str(j + 1) for j in t.assignment)) for a, t in dec]
