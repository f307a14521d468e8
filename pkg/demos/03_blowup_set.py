"""Where does the solution blow up?

A compactly supported bump on a wide interval blows up at its centre while
the rest of the domain stays bounded.  A point ``a`` is classified from the
limit of its energy series and last similarity frame: ``w -> 1`` means
blow-up, ``w -> 0`` means regular.  Points near the edge of the blow-up
region have not settled within the resolved window and come out
inconclusive.  Constant data on a Neumann interval blows up everywhere at
once, and there the compactness test has nothing to say.

Run:  python demos/03_blowup_set.py
"""

# %%
import numpy as np

from blowlab import build_profile, get_entry, graded_interval, run_to_blowup, uniform_interval
from blowlab.heat_solver import initial_snapshot
from blowlab.verify import check_compact_blowup_set, classify_point, prepare

nl = get_entry("pure_power", p=3.0)
prof = build_profile(nl)

# %%
grid = graded_interval(-16.0, 16.0, 2049, lam=1.2)
traj = run_to_blowup(initial_snapshot(grid, lambda x: 5.0 * np.clip(1 - x**2, 0, None) ** 2), grid, nl)
an = prepare(traj, prof)
print(f"compact bump: {traj.status}, T = {traj.T_est:.8f}")
for a in (0.0, 0.5, 2.0, 8.0):
    print(f"  a = {a:4.1f}: {classify_point(an, a)}")
c = check_compact_blowup_set(an)
print(f"  R = {c.measured['R']:.3f}; outer points {sorted(c.measured['outer_classes'].items())}")
print(f"  verdict: {c.verdict}")

# %%
g = uniform_interval(-1.0, 1.0, 257, boundary="neumann")
flat = prepare(run_to_blowup(initial_snapshot(g, np.full(257, 2.0)), g, nl), prof)
c = check_compact_blowup_set(flat)
print(f"\nconstant data on a Neumann interval: {c.verdict} ({c.reason})")
