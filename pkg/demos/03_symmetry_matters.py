# %% [markdown]
# # Why the allocation space must be symmetric
#
# The search relies on swapping two agents' bundles to turn envy into a
# welfare argument. If a swap can leave the feasible set, envy-freeness can
# become impossible. The classic production example has two agents sharing
# one resource, with a non-convex technology that is not closed under swaps.

# %%
from fairdiv import InvalidInstanceError, Preference, gen_pazner_schmeidler, solve_fair, validate_space
from fairdiv.instance import item_label

space = gen_pazner_schmeidler(5)
report = validate_space(space)
print("invariant:", report.permutation_invariant)
x, i, j = report.witness
swapped = list(x)
swapped[i], swapped[j] = swapped[j], swapped[i]
def show(a):
    return " | ".join(",".join(item_label(v) for v in bundle) for bundle in a)


print("feasible:", show(x))
print("swapped: ", show(swapped), "in space:", tuple(swapped) in space.allocations)

# %% [markdown]
# The solver refuses such a space up front instead of searching in vain.

# %%
prefs = [Preference.eu({y: 1.0 for y in space.items})] * 2
try:
    solve_fair(space, prefs, 1e-3)
except InvalidInstanceError as exc:
    print("refused:", exc)
