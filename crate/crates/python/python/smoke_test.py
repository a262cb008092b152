"""Quick end-to-end check of the Python bindings."""

import math

import kinetic_mlmc as km

p = km.SchemeParams(0.5, 0.2)
assert abs(p.v_mag - 0.5 / 0.45) < 1e-12
assert abs(p.p_collide + p.p_no_collide - 1.0) < 1e-12

assert abs(km.exact_second_moment(1e-3, 0.1, 5) - 1.0) < 1e-3
assert km.heat_limit_moment(0.5) == 1.0
assert abs(km.coarsen_xi([1.0, 1.0]) - math.sqrt(2.0)) < 1e-12
assert km.coarsen_alpha([0.5, 0.25]) == 0.25

xs = km.simulate(1.0, 0.1, 10, 2000, seed=3)
m2 = sum(x * x for x in xs) / len(xs)
exact = km.exact_second_moment(1.0, 0.1, 10)
assert abs(m2 - exact) < 0.1 * exact, (m2, exact)

rows = km.trajectory(0.5, 0.2, 1.0, 10, seed=1)
assert len(rows) == 51

levels = km.build_hierarchy(0.1, 0.5, 5)
assert [round(l["cost_per_sample"], 9) for l in levels] == [1, 3, 6, 12, 24]
assert km.allocate_samples(0.1, [1.0], [1.0]) == [200]

out = km.run_adaptive(0.1, seed=1)
assert out["table"]["estimate"] > 0.5
print("estimate", out["estimate"], "cost", out["total_cost"], "levels", len(out["table"]["rows"]))

try:
    km.run_adaptive(0.1, seed=1, cost_ceiling=10)
except km.BudgetError:
    pass
else:
    raise AssertionError("expected BudgetError")

try:
    km.SchemeParams(-1.0, 0.1)
except ValueError:
    pass
else:
    raise AssertionError("expected ValueError")

print("smoke test passed")
