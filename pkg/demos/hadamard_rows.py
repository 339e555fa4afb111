"""
Finding a hidden Hadamard row: one photon for all pixels
========================================================

An image of M pixels has transparencies alpha + eps * H[p, i] for a hidden
row p of the Sylvester Hadamard matrix. Imaging pixel by pixel needs to
resolve every pixel. Sending each photon through all pixels at once and
applying a Hadamard transform reveals p directly whenever the photon lands
in mode p, and the saving grows like log M.
"""

import numpy as np

from minabs.multi_pixel import (
    HadamardInstance,
    collective_post_state,
    collective_runs_required,
    individual_absorption_floor,
    individual_identify,
    individual_photons_for_error,
    mutual_information_cap,
    pixel_mutual_information,
    plan_collective,
)

inst = HadamardInstance(m=3, p=5, alpha=0.6, eps=0.01)
survival, amps = collective_post_state(inst)
print(f"survival {survival:.4f}; output amplitudes {np.round(amps, 6)}")

plan = plan_collective(inst, 0.1)
print(f"collective: {plan.runs} surviving photons, error {plan.error_prob:.4f}, absorbed {plan.expected_absorbed:.0f}")

print("\n   M   individual  collective  ratio   floor")
for m in range(3, 8):
    h = HadamardInstance(m, 1, 0.6, 0.01)
    N = individual_photons_for_error(h, 0.1)
    ind = np.mean([individual_identify(h, N, (m, i)).absorbed for i in range(200)])
    col = plan_collective(h, 0.1, collective_runs_required(h, 0.1 / (1 - 1 / (h.M - 1))))
    print(f"{h.M:4d} {ind:11.0f} {col.expected_absorbed:11.0f} {ind / col.expected_absorbed:6.2f} {individual_absorption_floor(h):8.0f}")

# Each absorbed photon tells us at most about 2 eps^2 / (beta^2 ln 2) bits.
small = HadamardInstance(3, 5, 0.6, 1e-3)
exact, approx = pixel_mutual_information(small, 5)
print(f"\nbits per photon at one pixel: exact {exact:.4e}, second order {approx:.4e}, cap {mutual_information_cap(small):.4e}")
