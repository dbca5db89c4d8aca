"""Endpoint-constrained LQ control: penalty pipeline vs dense KKT solve.

A 4-state / 2-control linear system on a 50-step grid must steer to a
prescribed terminal state while minimizing a quadratic cost.  The
penalty pipeline extracts a normal multiplier pair (z0 well away from
zero); a single dense solve of the stationarity system gives the same
multiplier, and the discrete adjoint certifies pointwise stationarity.
Run:  python3 demos/demo_lq_endpoint.py
"""

import numpy as np

from fcopt.problems import lq_endpoint_problem
from fcopt.penalty import PenaltyConfig, extract_multiplier
from fcopt.evolution import adjoint_evolution, maximum_principle_residual

p = lq_endpoint_problem(N=50)
pair, trace = extract_multiplier(p, p.u_bar, p.extras["schedule"],
                                 PenaltyConfig(seed=7))

print("extracted pair: z0 = %.6f, z = %s" % (pair.z0,
                                             np.round(pair.z.coords, 6)))

H = np.asarray(p.extras["H"])
c = np.asarray(p.extras["c"])
G = np.asarray(p.extras["endpoint_matrix"])
rhs = np.asarray(p.extras["y_target"]) - np.asarray(p.extras["y_free"])
nu, nl = H.shape[0], G.shape[0]
K = np.block([[H, G.T], [G, np.zeros((nl, nl))]])
lam = np.linalg.solve(K, np.concatenate([-c, rhs]))[nu:]
print("dense KKT lam:  %s" % np.round(lam, 6))

ref = np.concatenate([[1.0], lam])
ref /= np.linalg.norm(ref)
got = np.concatenate([[pair.z0], np.asarray(pair.z.coords)])
got /= np.linalg.norm(got)
print("normalized pair error vs dense solve: %.3g" % np.linalg.norm(got - ref))

sysm = p.extras["system"]
psi = adjoint_evolution(sysm, pair.z0, pair.z)
mp = maximum_principle_residual(sysm, pair, psi, seed=7)
print("adjoint stationarity residual:        %.3g" % mp["stationarity"])
print()
print("z0 = %.3f >= 0.1: the endpoint map is surjective here, so the" % pair.z0)
print("multiplier is normal and matches the one dense factorization.")
