"""Command line interface: ``fairdiv <command> ...``.

Every command exits 0 on success and 1 on failure (invalid input, failed
validation or certification, solver failure).
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .cake import (cake_bridge, decompose_general, decompose_two_agents,
                   decomposition_lottery, farkas_feasibility, lottery_shares)
from .errors import FairDivError
from .instance import gen_cake_space, item_label, validate_space
from .oracle import GRID, LP, certify
from .preferences import envy_matrix
from .qsolver import SolverConfig, WeightVector, solve_q
from .sperner import RefinementTrace, solve_fair


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_csv(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_validate(args) -> int:
    space = io.load_instance(args.instance)
    rep = validate_space(space)
    print(f"name={space.name}")
    print(f"n_agents={space.n_agents}")
    print(f"n_allocations={len(space)}")
    print(f"permutation_invariant={str(rep.permutation_invariant).lower()}")
    print(f"projections_equal={str(rep.projections_equal).lower()}")
    if rep.witness is not None:
        x, i, j = rep.witness
        print(f"witness=({','.join(item_label(y) for y in x)})")
        print(f"witness_agents={i + 1},{j + 1}")
        print(f"missing=({','.join(item_label(y) for y in rep.missing)})")
    print(f"digest={space.digest}")
    return 0 if rep.ok else 1


def cmd_envy(args) -> int:
    space = io.load_instance(args.instance)
    prefs = io.load_prefs(args.prefs, space)
    p = io.load_lottery(args.lottery, space)
    E = envy_matrix(space, p, prefs)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["agent"] + [str(k + 1) for k in range(space.n_agents)])
    for j, row in enumerate(E):
        w.writerow([str(j + 1)] + [repr(float(v)) for v in row])
    return 0


def cmd_maximize(args) -> int:
    space = io.load_instance(args.instance)
    prefs = io.load_prefs(args.prefs, space)
    lam = WeightVector.parse(args.weights) if args.weights else WeightVector.uniform(space.n_agents)
    cfg = SolverConfig(args.delta, args.tol)
    rows: list = []
    sol = solve_q(space, prefs, lam, cfg, trace=rows if args.trace else None)
    if args.trace:
        _write_csv(args.trace, ["iter", "gap", "q_value"], rows)
    _emit(io.dumps(io.solution_to_dict(space, sol, lam, args.delta)), args.out)
    return 0


def _refuse_if_not_invariant(space) -> bool:
    rep = validate_space(space)
    if rep.permutation_invariant:
        return False
    x, i, j = rep.witness
    print(f"error: space '{space.name}' is not closed under agent swaps; swapping agents "
          f"{i + 1} and {j + 1} in ({','.join(item_label(y) for y in x)}) leaves it",
          file=sys.stderr)
    return True


def cmd_solve(args) -> int:
    space = io.load_instance(args.instance)
    if _refuse_if_not_invariant(space):
        return 1
    prefs = io.load_prefs(args.prefs, space)
    tr = RefinementTrace()
    try:
        cert = solve_fair(space, prefs, args.eps, max_nodes=args.max_pivots,
                          workers=args.workers, trace=tr)
    finally:
        if args.trace:
            _write_csv(args.trace, ["round", "mesh", "n_vertices", "n_completely_labeled",
                                    "candidate_lambda", "max_envy"], tr.rows)
    if args.plot:
        if space.n_agents != 3:
            print("warning: --plot is drawn for three agents only; skipped", file=sys.stderr)
        else:
            from .plot import simplex_svg
            Path(args.plot).write_text(simplex_svg(tr), encoding="utf-8")
    _emit(cert.to_json(), args.out)
    return 0


def _decompose(f, method: str):
    if method == "two-agent":
        return decompose_two_agents(f)
    if method == "farkas":
        return farkas_feasibility(f)
    return decompose_general(f)


def _print_rows(dec) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["weight", "assignment"])
    w.writerows(io.decomposition_rows(dec))


def cmd_decompose(args) -> int:
    mu, widths, f = io.load_cake(args.cake)
    if f is None:
        print("error: the cake file carries no 'allocation' to decompose", file=sys.stderr)
        return 1
    dec = _decompose(f, args.method)
    if not dec.reproduces(f):
        print("error: decomposition does not reproduce the allocation", file=sys.stderr)
        return 1
    _print_rows(dec)
    return 0


def cmd_cake_solve(args) -> int:
    mu, widths, _ = io.load_cake(args.cake)
    space = gen_cake_space(mu.n_agents, mu.n_cells)
    prefs = cake_bridge(space, mu)
    cert = solve_fair(space, prefs, args.eps, max_nodes=args.max_pivots)
    f = lottery_shares(space, cert.lottery, widths)
    dec = decompose_general(f)
    if args.out:
        Path(args.out).write_text(cert.to_json(), encoding="utf-8")
    lot = decomposition_lottery(space, dec)
    print(f"# max_envy={cert.max_envy:.6e} wpe_gap={cert.wpe_gap:.6e} terms={len(dec)} "
          f"support={len(lot.support)}")
    _print_rows(dec)
    return 0


def cmd_oracle_check(args) -> int:
    space = io.load_instance(args.instance)
    prefs = io.load_prefs(args.prefs, space)
    cert = io.load_certificate(args.certificate)
    eps = args.eps if args.eps is not None else cert.epsilon
    if not eps > 0:
        print("error: no epsilon given and the certificate records none", file=sys.stderr)
        return 1
    rep = certify(space, prefs, cert, eps, method=args.method, resolution=args.resolution)
    print(f"method={rep.method}")
    print(f"max_envy={rep.max_envy!r}")
    print(f"wpe_gap={rep.best_value!r}")
    print(f"slack={rep.slack!r}")
    print(f"bound={eps + cert.delta_final * space.n_agents!r}")
    for v in rep.violations:
        print(f"violation={v}")
    print(f"result={'pass' if rep.passed else 'fail'}")
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairdiv", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check closure under agent swaps")
    p.add_argument("instance")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("envy", help="envy matrix of a lottery as CSV")
    p.add_argument("instance")
    p.add_argument("prefs")
    p.add_argument("lottery")
    p.set_defaults(func=cmd_envy)

    p = sub.add_parser("maximize", help="maximize regularized welfare at fixed weights")
    p.add_argument("instance")
    p.add_argument("prefs")
    p.add_argument("--lambda", dest="weights", help="weights w1,w2,... (fractions allowed)")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--trace", help="CSV of (iter, gap, q_value)")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_maximize)

    p = sub.add_parser("solve", help="envy-free, efficient lottery with certificate")
    p.add_argument("instance")
    p.add_argument("prefs")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--trace", help="CSV of search rounds")
    p.add_argument("--plot", help="SVG of the labeled weight triangle (three agents)")
    p.add_argument("--out", "-o", help="certificate file (default stdout)")
    p.add_argument("--max-pivots", type=int, default=200000)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("decompose", help="lottery over partitions for a cake allocation")
    p.add_argument("cake")
    p.add_argument("--method", choices=("two-agent", "greedy", "farkas"), default="greedy")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("cake-solve", help="fair cake lottery over partitions")
    p.add_argument("cake")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", "-o", help="also write the certificate here")
    p.add_argument("--max-pivots", type=int, default=200000)
    p.set_defaults(func=cmd_cake_solve)

    p = sub.add_parser("oracle-check", help="independently recheck a certificate")
    p.add_argument("instance")
    p.add_argument("prefs")
    p.add_argument("certificate")
    p.add_argument("--eps", type=float)
    p.add_argument("--method", choices=(LP, GRID), default=LP)
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(func=cmd_oracle_check)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FairDivError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
