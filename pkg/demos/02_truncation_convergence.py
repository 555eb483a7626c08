"""Cooling toward the Gibbs state and the effect of the truncation radius.

Reproduces the desk-scale version of the energy-convergence experiment: a
mixed-field Ising ring initialized in the maximally mixed state, evolved by
the deterministic Trotter product, for several truncation radii.  Larger
patches push the energy-density error down until the Trotter step dominates.
"""

import numpy as np

from localgibbs.dissipator import DensityMatrix, build_lindbladian, gibbs_state
from localgibbs.evolution import TrotterPlan, deterministic_trotter_evolve
from localgibbs.hamiltonian import build_model
from localgibbs.lattice import Lattice
from localgibbs.observables import energy_expectation, two_point_correlator

n, beta, tau, t_final = 8, 1.0, 0.1, 20.0
lat = Lattice([n])
h = build_model("mfi", lat)
rho_beta = gibbs_state(h, beta)
e_ref = energy_expectation(rho_beta, h) / n
print(f"mfi n={n}, beta={beta}: Gibbs energy density {e_ref:.6f}")

plan = TrotterPlan(tau=tau, steps=int(t_final / tau))
for r in (1, 2):  # r = 3 means 7-site patches; feasible but needs ~8 GB
    lind = build_lindbladian(h, beta, r)
    marks = {}

    def record(step, rho, _marks=marks):
        t = (step + 1) * tau
        if t in (5.0, 10.0, 20.0):
            _marks[t] = energy_expectation(rho, h) / n

    deterministic_trotter_evolve(lind, DensityMatrix.maximally_mixed(n), plan, record)
    row = "  ".join(f"t={t:>4}: dE={abs(e - e_ref):.2e}" for t, e in sorted(marks.items()))
    print(f"r={r}:  {row}")

# Connected ZZ correlators of the final state vs the exact Gibbs profile.
print("\nconnected correlators at beta = 1.5 (t = 10, r = 2) vs exact:")
beta = 1.5
rho_beta = gibbs_state(h, beta)
lind = build_lindbladian(h, beta, 2)
rho = deterministic_trotter_evolve(
    lind, DensityMatrix.maximally_mixed(n), TrotterPlan(tau=tau, steps=100)
)
for ell in (1, 2, 3):
    got = two_point_correlator(rho, n // 2, n // 2 + ell)
    want = two_point_correlator(rho_beta, n // 2, n // 2 + ell)
    print(f"  l={ell}: steady {got:+.5f}   exact {want:+.5f}")
