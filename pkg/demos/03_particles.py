"""
Simulating the particle system
==============================

Exact event-driven simulation of the empirical measure, compared with the
mean-field ODE (law of large numbers) and with the exact lattice chain.
"""

import numpy as np

from mfrelent import curie_weiss, limit_rate_family, prelimit_rate_family, solve_forward
from mfrelent.chain import build_generator, nearest_point_mass, transient_distribution
from mfrelent.particle import (
    lln_gaps,
    simulate_empirical,
    simulate_replicas,
    simulate_tagged_replicas,
)

model = curie_weiss(0.5)
p0 = np.array([0.9, 0.1])
ode = solve_forward(limit_rate_family(model), p0, 5.0, 1e-2)
times = np.linspace(0, 5, 101)

# One path, with its event log.
run = simulate_empirical(prelimit_rate_family(model, 1000), 1000, p0, 5.0, seed=0)
print(f"N=1000: {run.n_events} jumps, first three {run.event_log[:3]}")

# Sup-time l1 gap to the ODE shrinks like N^(-1/2).
for N in (500, 2000, 8000):
    snaps = simulate_replicas(prelimit_rate_family(model, N), N, p0, 5.0, seed=1, replicas=50,
                              snapshot_times=times)
    print(f"N={N:5d}  median gap {np.median(lln_gaps(snaps, times, N, ode)):.4f}")

# Small N: Monte Carlo histogram against the exact transient law.
N = 20
fam = prelimit_rate_family(curie_weiss(1.5), N)
gen = build_generator(fam, N)
exact = transient_distribution(gen, nearest_point_mass(gen.lattice, [0.8, 0.2]), 1.0).weights
snaps = simulate_replicas(fam, N, (16, 4), 1.0, seed=2, replicas=20_000, snapshot_times=[1.0])
freq = np.bincount([gen.lattice.index(tuple(c)) for c in snaps[:, 0]], minlength=gen.size) / 20_000
print("max |MC - exact| over cells:", f"{np.abs(freq - exact).max():.4f}")

# Two tagged particles become independent with marginal p(t).
out = simulate_tagged_replicas(prelimit_rate_family(model, 200), 200, 2, (160, 40), 1.0, seed=3,
                               replicas=20_000, snapshot_times=[1.0])[:, 0]
joint = np.zeros((2, 2))
np.add.at(joint, (out[:, 0], out[:, 1]), 1 / 20_000)
p1 = solve_forward(limit_rate_family(model), [0.8, 0.2], 1.0, 1e-3).final
print("joint law of two tagged particles:\n", joint.round(4), "\nproduct of ODE marginals:\n",
      np.outer(p1, p1).round(4))
