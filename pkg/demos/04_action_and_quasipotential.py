"""
Action functional and quasipotential
====================================

The large-deviation rate of the empirical measure is an action
J_t(q) = inf { J_0(phi(0)) + int L(phi, phi') }.  The local cost L is the
Legendre transform of the jump Hamiltonian.  We check it against exact
finite-N relative entropies, then take long horizons to obtain the
quasipotential.
"""

import numpy as np

from mfrelent import curie_weiss, gibbs_constant_C, limit_rate_family, lyapunov_F
from mfrelent.action import local_lagrangian, minimize_action_Jt, quasipotential
from mfrelent.chain import entropy_curve_Ft, nearest_point_mass, richardson
from mfrelent.dynamics import drift
from mfrelent.simplex import Lattice

model = curie_weiss(0.5)
fam = limit_rate_family(model)
pi_star = np.array([0.5, 0.5])
q = np.array([0.7, 0.3])

# L vanishes on the mean-field velocity and is positive elsewhere.
p = np.array([0.6, 0.4])
v = drift(fam, p)
print(f"L(p, drift) = {local_lagrangian(fam, p, v):.1e}, L(p, drift + 0.1*(1,-1)) = "
      f"{local_lagrangian(fam, p, v + [0.1, -0.1]):.5f}")

# J_1(q) from a deterministic start, against the N -> infinity extrapolation
# of (1/N) R(q^N || law of the chain at t=1).
Ns = [25, 50, 100, 200]
vals = [entropy_curve_Ft(model, q, nearest_point_mass(Lattice(N, 2), pi_star), [1.0])[0] for N in Ns]
J = minimize_action_Jt(fam, pi_star, q, 1.0, nodes=64, restarts=4)
print("F_1^N:", np.round(vals, 6), f"-> Richardson {richardson(vals, Ns):.6f}")
print(f"J_1(q) = {J.value:.6f}")

# Longer horizons make reaching q cheaper; the limit is the quasipotential.
# For reversible Gibbs dynamics it equals F(q) - F(pi*).  The time grid
# adds an O(dt^2) quadrature error of either sign, here a few 1e-5.
res = quasipotential(fam, pi_star, q, horizons=(2, 5, 10, 20), restarts=4)
C = gibbs_constant_C(model)
print("horizon sweep:", {h: round(float(v), 6) for h, v in zip(res.horizons, res.raw_values)})
print(f"V(q) = {res.value:.6f}, F(q) - F(pi*) = {lyapunov_F(model, q, C) - lyapunov_F(model, pi_star, C):.6f}")
