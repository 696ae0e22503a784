# %% [markdown]
# # Cutting a cake into cells
#
# The cake is split into cells and every agent has a value for each cell.
# A deterministic cut hands each cell to one agent, so the cake becomes an
# allocation space with `N^I` points and the general solver applies.

# %%
from fractions import Fraction

from fairdiv import (CellMeasure, cake_bridge, decompose_general, decompose_two_agents,
                     decomposition_lottery, dww_atomless_to_partition, gen_cake_space,
                     lottery_shares, nu_matrix, solve_fair, stirling_column_count)

mu = CellMeasure(((2, 1, 1), (2, 1, 1), (1, 2, 2)))
space = gen_cake_space(3, 3)
print(len(space), "assignments =", stirling_column_count(3, 3))

# %% [markdown]
# Each agent's value for a deterministic cut is linear in the cells they own,
# so a lottery's value is the same as the value of its expected shares.

# %%
cert = solve_fair(space, cake_bridge(space, mu), 1e-3)
f = lottery_shares(space, cert.lottery)
print("max envy %.2e" % cert.max_envy)
for j, row in enumerate(f.values):
    print(f"agent {j + 1} shares:", [f"{float(x):.3f}" for x in row])

# %% [markdown]
# Going back, any fractional share matrix is a lottery over partitions. The
# greedy peel uses at most `I(N-1)+1` of them.

# %%
dec = decompose_general(f)
print(len(dec), "partitions, weights sum to", dec.total_weight)
for w, part in dec:
    print(f"  {float(w):.4f}  {part}")
assert lottery_shares(space, decomposition_lottery(space, dec)).values == f.values

# %% [markdown]
# With two agents the decomposition is a staircase: sort the first agent's
# shares and take consecutive differences as weights.

# %%
from fairdiv import SimpleAllocation

two = SimpleAllocation(((Fraction(1, 5), Fraction(1, 2)), (Fraction(4, 5), Fraction(1, 2))))
for w, part in decompose_two_agents(two):
    print(f"  {w}  agent 1 gets cells {part.cells_of(0)}")

# %% [markdown]
# Without atoms, fractional shares can be replaced by a single deterministic
# partition of a finer cell grid with the same value to every agent. The
# `nu` matrix lists how much each agent values each share.

# %%
ref = dww_atomless_to_partition(f, mu)
print("finer cells:", len(ref.widths))
print("same nu matrix:", ref.nu() == nu_matrix(f, mu))
