"""
Counting transmitted photons
============================

Two grey pixels differ only slightly in transmission. We send N photons,
count how many come through, and guess. How many photons does the object
absorb on the way to a 10% error rate, and how close is that to the bound?
"""

from minabs import make_task, single_pixel_bound
from minabs.single_pixel import plan_counting, simulate_counting

task = make_task(0.59, 0.61)
print(f"mean transparency {task.alpha_mean.real:.2f}, half-difference {task.epsilon.real:.3f}")

# The plan picks N from a Gaussian criterion, then computes the exact error
# of the likelihood-ratio test at that N.
plan = plan_counting(task, target_pe=0.1)
print(f"photons sent N = {plan.N}, guess object 1 if at most {plan.threshold} get through")
print(f"exact error {plan.predicted_pe:.4f}, mean absorbed {plan.predicted_nabs:.1f}")

# The bound says no protocol can do better than this many absorbed photons.
bound = single_pixel_bound(task, 0.1)
print(f"lower bound {bound:.1f}; counting pays a factor {plan.predicted_nabs / bound:.2f}")

mc = simulate_counting(plan, task, trials=5000, seed=1)
print(f"Monte Carlo: error {mc.error_rate:.4f} +- {mc.error_se:.4f}, absorbed {mc.mean_absorbed:.1f} +- {mc.absorbed_se:.1f}")

# Halving the difference costs four times the absorption.
for eps in (0.02, 0.01, 0.005):
    p = plan_counting(make_task(0.6 - eps, 0.6 + eps), 0.1)
    print(f"eps={eps:<6} absorbed {p.predicted_nabs:8.1f}   absorbed*eps^2 = {p.predicted_nabs * eps**2:.4f}")

# A coherent (Poisson) source adds shot noise and needs more photons.
coh = plan_counting(task, 0.1, source="poisson")
print(f"coherent source: mean photon number {coh.N}, absorbed {coh.predicted_nabs:.1f}")
