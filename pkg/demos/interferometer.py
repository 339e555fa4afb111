"""
Telling phases apart with a Mach-Zehnder interferometer
=======================================================

When the two objects have the same transmission and differ only in phase,
counting photons learns nothing. Putting the object in one arm of an
interferometer turns the phase difference into a difference in detector
counts. Letting the photon pass the object k times helps when the object is
nearly transparent.
"""

import math

from minabs import CountingFailsError, make_task, single_pixel_bound
from minabs.single_pixel import plan_counting, plan_interferometer, simulate_interferometer


def phase_pair(alpha, eps):
    eta = math.asin(eps / alpha)
    return make_task(alpha * complex(math.cos(eta), -math.sin(eta)), alpha * complex(math.cos(eta), math.sin(eta)))


task = phase_pair(0.8, 0.01)
try:
    plan_counting(task, 0.1)
except CountingFailsError as exc:
    print("counting:", exc)

plan = plan_interferometer(task, k=1, target_pe=0.1)
print(f"single pass: launch {plan.N} photons, {plan.n_detected} expected to survive")
print(f"  arm-0 probabilities {plan.chi1:.5f} vs {plan.chi2:.5f}")
print(f"  exact error {plan.predicted_pe:.4f}, absorbed {plan.predicted_nabs:.1f}, bound {single_pixel_bound(task, 0.1):.1f}")

mc = simulate_interferometer(plan, trials=2000, seed=3)
print(f"  Monte Carlo error {mc.error_rate:.3f} +- {mc.error_se:.3f}, absorbed {mc.mean_absorbed:.1f}")

# Nearly transparent objects: alpha = 1 - delta. One pass wastes photons;
# k = 1/delta passes brings the absorption down to order delta^2.
print("\n delta   k  absorbed(k=auto)  absorbed(k=1)  per-photon absorption")
for delta in (0.1, 0.05, 0.025):
    t = phase_pair(1 - delta, 1e-3)
    auto = plan_interferometer(t, "auto", 0.1, exact_pe=False)
    one = plan_interferometer(t, 1, 0.1, exact_pe=False)
    print(f"{delta:6.3f} {auto.k:3d} {auto.predicted_nabs:14.0f} {one.predicted_nabs:14.0f} {auto.absorption_prob:14.4f}")
print(f"per-photon absorption tends to (1 - e^-2)/2 = {0.5 * (1 - math.exp(-2)):.4f}")
