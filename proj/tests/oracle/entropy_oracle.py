"""Reference values frozen into the C++ tests.

cvxpy + Clarabel, written independently of the C++ engine.  hmax at eps=0
comes from max_sigma F(rho, 1 x sigma)^2, not from duality, once as an SDP
and once by direct Nelder-Mead over sigma.
Run: python3 tests/oracle/entropy_oracle.py
"""
import numpy as np
import cvxpy as cp
from scipy.linalg import sqrtm
from scipy.optimize import minimize


def run(p):
    # clarabel sometimes stops at optimal_inaccurate; scs at 1e-10 then
    p.solve(solver=cp.CLARABEL, tol_gap_abs=1e-8, tol_gap_rel=1e-8, tol_feas=1e-8)
    if p.status != cp.OPTIMAL:
        p.solve(solver=cp.SCS, eps=1e-10, max_iters=200000)
    if p.status != cp.OPTIMAL:
        print(f'  ({p.status})')
    return p.value


def ket(v):
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def state_s1():
    a = ket([1, 0.5, 0.2j, 0.7])
    b = ket([0, 1, 1, -0.3])
    return 0.7 * np.outer(a, a.conj()) + 0.3 * np.outer(b, b.conj()), 2, 2


def state_s2():
    # qubit A, qutrit B
    a = ket([1, 0, 0.3, 0, 0.4j, 0.5])
    b = ket([0.2, 1, 0, -0.5, 0, 0.1])
    c = ket([0, 0, 1, 1j, 0, 0])
    r = 0.5 * np.outer(a, a.conj()) + 0.3 * np.outer(b, b.conj()) + 0.2 * np.outer(c, c.conj())
    return r, 2, 3


def hmin(rho, dA, dB, eps=0.0):
    d = dA * dB
    Y = cp.Variable((dB, dB), hermitian=True)
    cons = []
    if eps == 0:
        cons.append(cp.kron(np.eye(dA), Y) - rho >> 0)
    else:
        R = cp.Variable((d, d), hermitian=True)
        X = cp.Variable((d, d), complex=True)
        cons += [cp.kron(np.eye(dA), Y) - R >> 0, R >> 0, cp.real(cp.trace(R)) <= 1,
                 cp.bmat([[rho, X], [X.H, R]]) >> 0,
                 cp.real(cp.trace(X)) >= np.sqrt(1 - eps ** 2)]
    return -np.log2(run(cp.Problem(cp.Minimize(cp.real(cp.trace(Y))), cons)))


def hmax0(rho, dA, dB):
    d = dA * dB
    S = cp.Variable((dB, dB), hermitian=True)
    X = cp.Variable((d, d), complex=True)
    cons = [S >> 0, cp.real(cp.trace(S)) == 1, cp.bmat([[rho, X], [X.H, cp.kron(np.eye(dA), S)]]) >> 0]
    return 2 * np.log2(run(cp.Problem(cp.Maximize(cp.real(cp.trace(X))), cons)))


def hmax0_direct(rho, dA, dB, starts=30):
    # no SDP: Nelder-Mead over sigma = g g^dag / tr
    sr = sqrtm(rho)

    def negf(x):
        g = (x[:dB * dB] + 1j * x[dB * dB:]).reshape(dB, dB)
        s = g @ g.conj().T
        s /= np.trace(s).real
        m = sr @ np.kron(np.eye(dA), s) @ sr
        return -np.sum(np.sqrt(np.clip(np.linalg.eigvalsh((m + m.conj().T) / 2), 0, None)))

    best = 0
    for seed in range(starts):
        x0 = np.random.default_rng(seed).normal(size=2 * dB * dB)
        r = minimize(negf, x0, method='Nelder-Mead',
                     options={'xatol': 1e-12, 'fatol': 1e-14, 'maxiter': 40000, 'maxfev': 40000})
        best = min(best, r.fun)
    return 2 * np.log2(-best)


def purify_complement(rho, dA, dB):
    # pure state on A B M, return marginal on A M
    w, V = np.linalg.eigh(rho)
    keep = w > 1e-12
    w, V = w[keep], V[:, keep]
    r = len(w)
    psi = sum(np.sqrt(w[k]) * np.kron(V[:, k], np.eye(r)[k]) for k in range(r))
    t = psi.reshape(dA, dB, r)
    am = np.einsum('abm,cbn->amcn', t, t.conj()).reshape(dA * r, dA * r)
    return am, r


def hmax(rho, dA, dB, eps):
    am, r = purify_complement(rho, dA, dB)
    return -hmin(am, dA, r, eps)


if __name__ == '__main__':
    for name, f in [('s1', state_s1), ('s2', state_s2)]:
        rho, dA, dB = f()
        print(f'{name} hmin0   {hmin(rho, dA, dB):.8f}')
        print(f'{name} hmax0   {hmax0(rho, dA, dB):.8f}')
        print(f'{name} hmax0 direct {hmax0_direct(rho, dA, dB):.8f}')
        print(f'{name} hmin.1  {hmin(rho, dA, dB, 0.1):.8f}')
        print(f'{name} hmax.1  {hmax(rho, dA, dB, 0.1):.8f}')
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 2 ** -0.5
    bc = np.outer(phi, phi.conj())
    print(f'merge hmin.01(BC) {hmin(bc, 4, 1, 0.01):.8f}')
    print(f'merge hmin.12(B)  {hmin(np.eye(2) / 2, 2, 1, 0.12):.8f}')
    print(f'pure  hmin.1      {hmin(np.diag([1.0, 0.0]), 2, 1, 0.1):.8f}')
    print(f'pi2   hmin.1      {hmin(np.eye(2) / 2, 2, 1, 0.1):.8f}')
