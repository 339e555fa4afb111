"""
Repeating an absorption-free measurement until it works
=======================================================

If one object were perfectly transparent, a protocol could tell them apart
without any absorption at all, but only with some probability of failing.
Repeating it until it succeeds costs absorbed photons, and for two grey
objects that cost sits right at the single-pixel bound.
"""

import numpy as np

from minabs import afm_repeat_bound, make_task
from minabs.single_pixel import trial_rng

task = make_task(0.6, 0.62)
eta, nbar = afm_repeat_bound(task)
print(f"eta = {eta:.6f}, repeats absorb at least {nbar:.1f} photons on average")
print(f"leading order beta^4 / (2 eps^2) = {task.beta_mean**4 / (2 * abs(task.epsilon) ** 2):.1f}")

# Monte Carlo: each run absorbs with probability eta; count absorbing runs before the first clean one.
counts = np.array([trial_rng(1, i).geometric(1 - eta) - 1 for i in range(20000)])
print(f"simulated {counts.mean():.1f} +- {counts.std(ddof=1) / np.sqrt(counts.size):.1f}")
