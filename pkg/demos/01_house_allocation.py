# %% [markdown]
# # Three agents, three houses
#
# Each agent receives one house. A deterministic assignment is a permutation,
# so somebody is always unlucky; a lottery over permutations can be envy-free
# and still leave no way to make everyone better off.

# %%
import numpy as np

from fairdiv import Preference, certify, envy_matrix, gen_hz, marginal_matrix, solve_fair

space = gen_hz(3)
print(space.name, "with", len(space), "allocations:", space.allocations)

# %% [markdown]
# Agent 1 has plain expected utility. Agents 2 and 3 are cautious: each holds
# two value estimates and judges a lottery by the worse of the two.

# %%
prefs = [
    Preference.eu({0: 0.9, 1: 0.6, 2: 0.1}),
    Preference.maxmin([{0: 0.8, 1: 0.7, 2: 0.2}, {0: 0.5, 1: 0.9, 2: 0.3}]),
    Preference.maxmin([{0: 1.0, 1: 0.4, 2: 0.3}, {0: 0.7, 1: 0.8, 2: 0.0}]),
]
print([p.kind for p in prefs])

# %% [markdown]
# `solve_fair` searches the Pareto weights until the regularized welfare
# optimum leaves nobody envious by more than `eps`.

# %%
eps = 1e-3
cert = solve_fair(space, prefs, eps)
print("weights   ", cert.lambda_bar)
print("max envy   %.2e" % cert.max_envy)
print("wPE gap    %.2e" % cert.wpe_gap)
for k, w in cert.lottery.support:
    print(f"  {float(w):.4f}  {space.allocations[k]}")

# %% [markdown]
# Row j of the marginal matrix is agent j's chance of each house. The envy
# matrix compares each agent's own marginal with every other agent's.

# %%
np.set_printoptions(precision=4, suppress=True)
print(marginal_matrix(space, cert.lottery))
print(envy_matrix(space, cert.lottery, prefs))

# %% [markdown]
# The oracle recomputes envy in exact rationals and the Pareto gap with an
# exact linear program, without trusting any number in the certificate.

# %%
report = certify(space, prefs, cert, eps)
print("oracle:", report.method, "passed" if report.passed else report.violations)
