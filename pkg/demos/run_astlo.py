"""Smoothed shell observables tracking particle transport.

Build the adiabatic spacetime-localized observables N_{f-,t,l} and
N_{f+,t,l} for a two-level schedule and monitor their expectation values
along the evolution of a half-filled chain.  The minus family dominates
the particle number in the inner ball and the plus family is dominated
by the number in the outer ball, so their ratio against the density
floor certifies that no level goes bad before the analytic time floor.

Run:  python3 demos/run_astlo.py
"""

import numpy as np

import bhlab as bh

lat = bh.centered_chain(8)
basis = bh.build_basis(lat, ("fixed_n", 4))

J = bh.power_law_couplings(lat, bh.HOPPING, 2.5, 1.0)
V = bh.power_law_couplings(lat, bh.INTERACTION, 2.5, 0.5, onsite=1.0)
psi = bh.basis_vector(basis, (1, 0, 1, 0, 1, 0, 1, 0))

window = bh.density_window_check(psi, 1)
print(f"density window feasible: {window['feasible']}, lambda1 = {window['lambda1']}")

kap = bh.kappa(J)
v = 12.0 * kap
sched = bh.make_schedule(R=3.0, r=1.0, v=v, kappa=kap, l_max=1)
cut = bh.make_cutoff(sched.omega, resolution=1501)
print(f"kappa = {kap:.4f}, v = {v:.4f}, T1 floor = {sched.t1_floor:.5f}")

prop = bh.Propagator(bh.hamiltonian(basis, J, V))
times = np.linspace(0.0, 2.0 * sched.t1_floor, 13)

series = {
    (l, s): np.zeros(len(times))
    for l in range(len(sched.levels))
    for s in ("minus", "plus")
}
cur, prev = psi, 0.0
for i, t in enumerate(times):
    cur = bh.evolve(prop, cur, float(t) - prev)
    prev = float(t)
    for (l, s) in series:
        op = bh.astlo_operator(basis, sched, l, cut, s, float(t))
        series[(l, s)][i] = op.operator.expectation(cur).real

print(f"\n{'t':>8}" + "".join(f"  l{l}-{s[:1]}" for l in (0, 1) for s in ("minus", "plus")))
for i, t in enumerate(times):
    row = "".join(f" {series[(l, s)][i]:5.2f}" for l in (0, 1) for s in ("minus", "plus"))
    print(f"{t:8.4f}{row}")

mon = bh.bad_time_monitor(times, series, sched, window["lambda1"], lat.dimension)
t1 = mon["t1"]
print(f"\nmin ratio = {mon['min_ratio']:.3f} (threshold 1/e = {1/np.e:.3f})")
print(f"first bad time = {'none on this horizon' if not np.isfinite(t1) else t1}")
