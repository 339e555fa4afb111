"""
Grover search through a weakly absorbing oracle
===============================================

The marked pixel is found by letting one photon interfere with itself over
all M pixels. Every passage through the object loses a little amplitude.
Because the loss is the same on every pixel it commutes with the search, so
the success probability is the ideal one times the survival probability.
"""

from minabs.multi_pixel import GroverInstance, grover_damped, grover_density_evolution, sample_grover

small = GroverInstance(m=3, x0=5, beta2=0.02)
res = grover_damped(small)
succ, surv = grover_density_evolution(small, res.iterations)
print(f"M=8: {res.iterations} iterations, success {res.success_prob:.12f} (density matrix {succ:.12f})")

big = GroverInstance(m=10, x0=123, beta2=1e-4)
res = grover_damped(big)
print(f"M=1024: {res.iterations} oracle calls, survival {res.survival_prob:.4f}, success {res.success_prob:.4f}")
print(f"probing all 1024 pixels one by one would survive with probability {res.individual_survival:.4f}")
print("sampled success/survival:", sample_grover(big, 2000, seed=1))

# If each passage only imprints a small phase, one oracle call is pi/phase passages.
weak = GroverInstance(m=4, x0=2, beta2=1e-4, phase=0.1)
res = grover_damped(weak)
print(f"\nweak phase 0.1: {res.passages} passages, survival {res.survival_prob:.4f}, success {res.success_prob:.4f}")
