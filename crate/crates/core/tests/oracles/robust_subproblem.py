"""Independent oracle for one robust subproblem at N = 2.

Builds the safe LMI restriction from scratch with cvxpy (full dual blocks,
separate alpha_a and alpha_b, no eliminations) for a fixed instance, solves
phi1 minus the linearized phi2 at a fixed anchor, and writes the instance and
optimal value (bits) to ../fixtures/robust_n2.json.

Run: python3 robust_subproblem.py
"""

import json
import os

import cvxpy as cp
import numpy as np

N = 2
rng = np.random.default_rng(2024)


def cn(n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


ch = {k: cn(N) for k in ["h_ab", "h_ae", "h_aa", "h_ba", "h_be", "h_bb"]}
P = 10 ** 0.5
sig = 1.0
zeta = 0.01
eps = 0.05
tau1, tau2 = 0.05, 0.05
xi = 0.01 * (1 + 1j) * np.ones(N)
om = np.outer(xi, xi.conj()) + 0.002 * np.eye(N)
anchor_q = (P / (2 * N)) * np.eye(N)
anchor_nu = 0.5

Qa = cp.Variable((N, N), hermitian=True)
Qb = cp.Variable((N, N), hermitian=True)
nu = cp.Variable(nonneg=True)
mu = cp.Variable(nonneg=True)
al = cp.Variable(2)
G = [cp.Variable((N + 1, N + 1), hermitian=True) for _ in range(2)]
F = [cp.Variable((2 * N, 2 * N), hermitian=True) for _ in range(2)]

Psi = np.block([[tau1 * np.eye(N), -xi[:, None]], [-xi[None, :].conj(), np.array([[tau1]])]])
Xi = np.block([[tau2 * np.eye(N), -om], [-om, tau2 * np.eye(N)]])

cons = [Qa >> 0, Qb >> 0, cp.real(cp.trace(Qa)) <= P, cp.real(cp.trace(Qb)) <= P]
cost = 0
for i in range(2):
    cons += [G[i] >> 0, F[i] >> 0]
    # The off-diagonal blocks of Phi are required to be Hermitian.
    cons += [F[i][:N, N:] == F[i][:N, N:].H]
    cost += cp.real(cp.trace(G[i] @ Psi)) + cp.real(cp.trace(F[i] @ Xi)) + al[i]
cons += [cost <= eps * mu]

lam = [G[i][:N, N] for i in range(2)]
B = [F[i][:N, N:] for i in range(2)]
Z = np.zeros((N, N))


def block(with_q, corner):
    d1 = 2 * B[0] + (Qa if with_q else 0)
    d2 = 2 * B[1] + (Qb if with_q else 0)
    top = cp.hstack([d1, Z, cp.reshape(lam[0], (N, 1), order="F")])
    mid = cp.hstack([Z, d2, cp.reshape(lam[1], (N, 1), order="F")])
    bot = cp.hstack([cp.reshape(cp.conj(lam[0]), (1, N), order="F"), cp.reshape(cp.conj(lam[1]), (1, N), order="F"), cp.reshape(corner, (1, 1), order="F")])
    return cp.vstack([top, mid, bot])


M1 = block(False, -(al[0] + al[1]))
M2 = block(True, mu - al[0] - al[1] - sig * nu)
cons += [(M1 + M1.H) / 2 << 0, (M2 + M2.H) / 2 << 0]


def q(Q, h):
    return cp.real(h.conj() @ Q @ h)


def qv(Q, h):
    return float(np.real(h.conj() @ Q @ h))


phi1 = cp.log(sig + zeta * q(Qa, ch["h_aa"]) + q(Qb, ch["h_ba"])) + cp.log(sig + zeta * q(Qb, ch["h_bb"]) + q(Qa, ch["h_ab"]))
sa = sig + zeta * qv(anchor_q, ch["h_aa"])
sb = sig + zeta * qv(anchor_q, ch["h_bb"])
phi2_lin = (
    np.log1p(anchor_nu)
    + np.log(sa)
    + np.log(sb)
    + (nu - anchor_nu) / (1 + anchor_nu)
    + zeta * (q(Qa, ch["h_aa"]) - qv(anchor_q, ch["h_aa"])) / sa
    + zeta * (q(Qb, ch["h_bb"]) - qv(anchor_q, ch["h_bb"])) / sb
)
prob = cp.Problem(cp.Maximize(phi1 - phi2_lin), cons)
prob.solve(solver=cp.CLARABEL)
value_bits = prob.value / np.log(2)


def vec(v):
    return [[float(z.real), float(z.imag)] for z in v]


def mat(m):
    return [vec(row) for row in m]


out = {
    "params": {"n_tx": N, "sigma_a2": sig, "sigma_b2": sig, "sigma_e2": sig, "zeta_a": zeta, "zeta_b": zeta, "p_a": P, "p_b": P},
    "channels": {k: vec(v) for k, v in ch.items()},
    "moments": {
        "xi_a": vec(xi), "xi_b": vec(xi), "omega_a": mat(om), "omega_b": mat(om),
        "tau_1a": tau1, "tau_1b": tau1, "tau_2a": tau2, "tau_2b": tau2, "epsilon": eps,
    },
    "anchor_q": mat(anchor_q),
    "anchor_nu": anchor_nu,
    "status": prob.status,
    "value_bits": value_bits,
}
path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures", "robust_n2.json")
with open(path, "w") as f:
    json.dump(out, f, indent=1)
print(prob.status, value_bits)
