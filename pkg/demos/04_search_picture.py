# %% [markdown]
# # Watching the weight search
#
# For three agents the Pareto weights live in a triangle. The first round
# labels the vertices of a barycentric subdivision by an envy-free agent; the
# cells carrying all three labels point to where everyone is envy-free.

# %%
from pathlib import Path

import numpy as np

from fairdiv import Preference, RefinementTrace, gen_hz, solve_fair
from fairdiv.plot import simplex_svg

rng = np.random.default_rng(11)
space = gen_hz(3)
base = rng.random(3)
prefs = [Preference.eu({y: float(base[y] + 0.5 * rng.random()) for y in space.items})
         for _ in range(3)]

trace = RefinementTrace()
cert = solve_fair(space, prefs, 1e-4, trace=trace)
print(len(trace.rows), "candidate weights over", trace.rounds, "rounds")
print("round  mesh       pivots  max envy")
for rnd, mesh, piv, _, lam, env in trace.rows[:4] + trace.rows[-3:]:
    print(f"{rnd:5d}  {mesh:.3e}  {piv:6d}  {env:.2e}")
print("final weights", cert.lambda_bar, "max envy %.1e" % cert.max_envy)

# %%
out = Path(__file__).with_name("search.svg")
out.write_text(simplex_svg(trace))
print("wrote", out)
