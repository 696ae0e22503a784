"""Static SVG picture of a three-agent search: the labeled first-round
subdivision of the weight triangle, its completely labeled cells and the
path of candidate weights."""
from __future__ import annotations

from typing import Sequence

from .qsolver import WeightVector
from .sperner import LabeledComplex, RefinementTrace, Simplex, find_completely_labeled

COLORS = ("#d62728", "#1f77b4", "#2ca02c")


def _xy(lam: Sequence, size: float, pad: float) -> tuple[float, float]:
    a, b, c = (float(w) for w in lam)
    side = size - 2 * pad
    h = side * 3 ** 0.5 / 2
    corners = ((pad, pad + h), (pad + side, pad + h), (pad + side / 2, pad))
    x = a * corners[0][0] + b * corners[1][0] + c * corners[2][0]
    y = a * corners[0][1] + b * corners[1][1] + c * corners[2][1]
    return round(x, 3), round(y, 3)


def simplex_svg(trace: RefinementTrace, size: int = 480) -> str:
    """SVG text for a three-agent trace; raises ValueError for other sizes.

    A search that stopped at the first candidate has no labeled complex; the
    bare triangle is drawn instead.
    """
    cplx = trace.complexes[0] if trace.complexes else LabeledComplex([Simplex.standard(3)])
    if len(cplx.simplices[0].vertices) != 3:
        raise ValueError("plots are drawn for three agents only")
    pad = 24.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           '<rect width="100%" height="100%" fill="white"/>']
    complete = set(find_completely_labeled(cplx, require_odd=False)) if cplx.vertex_labels else set()
    for s in cplx.simplices:
        pts = " ".join(f"{x},{y}" for x, y in (_xy(v.weights, size, pad) for v in s.vertices))
        if s in complete:
            out.append(f'<polygon points="{pts}" fill="#ffe08a" stroke="black" stroke-width="2"/>')
        else:
            out.append(f'<polygon points="{pts}" fill="none" stroke="#999" stroke-width="0.5"/>')
    for v, lab in sorted(cplx.vertex_labels.items(), key=lambda kv: kv[0].weights):
        x, y = _xy(v.weights, size, pad)
        out.append(f'<circle cx="{x}" cy="{y}" r="3.5" fill="{COLORS[lab]}"/>')
    path = [_xy(WeightVector.parse(r[4]).weights, size, pad) for r in trace.rows]
    if len(path) > 1:
        pts = " ".join(f"{x},{y}" for x, y in path)
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1" '
                   'stroke-dasharray="3,2"/>')
    if path:
        x, y = path[-1]
        out.append(f'<circle cx="{x}" cy="{y}" r="5" fill="none" stroke="black" stroke-width="2"/>')
    for j, corner in enumerate(((1, 0, 0), (0, 1, 0), (0, 0, 1))):
        x, y = _xy(corner, size, pad)
        dy = -8 if j == 2 else 16
        out.append(f'<text x="{x}" y="{y + dy}" font-size="12" text-anchor="middle" '
                   f'fill="{COLORS[j]}">agent {j + 1}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

