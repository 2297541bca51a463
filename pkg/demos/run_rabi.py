"""Two-site Rabi oscillation.

A single boson hopping between two sites with unit amplitude is the
smallest nontrivial check of the evolution machinery: the occupation of
the starting site must follow cos(t)^2 exactly.

Run:  python3 demos/run_rabi.py
"""

import numpy as np

import bhlab as bh

lat = bh.chain(2)
basis = bh.build_basis(lat, ("fixed_n", 1))

# amplitude 2^alpha makes the nearest-neighbour hop exactly 1
J = bh.power_law_couplings(lat, bh.HOPPING, 2.5, 2.0**2.5)
prop = bh.Propagator(bh.hamiltonian(basis, J))

psi = bh.basis_vector(basis, (1, 0))
n0 = bh.site_number_operator(basis, 0)

times = np.linspace(0.0, np.pi, 17)
print(f"{'t':>8} {'<n0>':>12} {'cos^2(t)':>12} {'error':>10}")
worst = 0.0
for t in times:
    out = bh.evolve(prop, psi, float(t))
    val = n0.expectation(out).real
    ref = np.cos(t) ** 2
    worst = max(worst, abs(val - ref))
    print(f"{t:8.4f} {val:12.8f} {ref:12.8f} {abs(val - ref):10.2e}")
print(f"\nmax deviation from cos^2(t): {worst:.3e}")
