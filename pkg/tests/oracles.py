"""Independent reference computations and random-instance generators for the tests.

Nothing here reuses the solver code paths it is used to check.
"""

import itertools

import numpy as np

from gmmsteer import Gaussian, Gmm, LtvSystem, QuadraticCost

# ---------------------------------------------------------------- instances


def random_pd(rng, n, scale=1.0, floor=0.1):
    W = rng.standard_normal((n, n))
    return scale * (W @ W.T / n + floor * np.eye(n))


def random_psd(rng, n, rank=None):
    rank = rng.integers(0, n + 1) if rank is None else rank
    F = rng.standard_normal((n, rank))
    return F @ F.T / max(rank, 1)


def random_system(rng, n, m, N, time_varying=True):
    """Random controllable system with spectral radius around one."""
    while True:
        count = N if time_varying else 1
        A = rng.standard_normal((count, n, n))
        A /= np.maximum(np.abs(np.linalg.eigvals(A)).max(axis=1), 1e-3)[:, None, None]
        A *= rng.uniform(0.6, 1.1, size=(count, 1, 1))
        B = rng.standard_normal((count, n, m))
        if not time_varying:
            A, B = np.repeat(A, N, axis=0), np.repeat(B, N, axis=0)
        sys = LtvSystem(A, B)
        G = naive_grammian(sys)
        s = np.linalg.svd(G, compute_uv=False)
        if N * m >= n and s[-1] > 1e-3 * s[0]:
            return sys


def random_cost(rng, n, m, N, zero_q=False, zero_ref=False):
    Q = np.array([np.zeros((n, n)) if zero_q else random_psd(rng, n) for _ in range(N + 1)])
    R = np.array([random_pd(rng, m) for _ in range(N)])
    x_ref = np.zeros((N + 1, n)) if zero_ref else rng.standard_normal((N + 1, n))
    return QuadraticCost(Q, R, x_ref)


def random_gaussian(rng, n, spread=1.0):
    return Gaussian(spread * rng.standard_normal(n), random_pd(rng, n, scale=0.3))


def random_gmm(rng, n, k):
    w = rng.dirichlet(np.ones(k)) * 0.9 + 0.1 / k
    return Gmm(w / w.sum(), tuple(random_gaussian(rng, n, spread=2.0) for _ in range(k)))


# ---------------------------------------------------------------- dynamics


def naive_transition(sys, k1, k2):
    Phi = np.eye(sys.n)
    for k in range(k2 - 1, k1 - 1, -1):
        Phi = Phi @ sys.A_seq[k]
    return Phi


def naive_grammian(sys):
    G = np.zeros((sys.n, sys.n))
    for k in range(sys.N):
        P = naive_transition(sys, k + 1, sys.N) @ sys.B_seq[k]
        G += P @ P.T
    return G


def step_rollout(sys, x0, U):
    U = np.asarray(U).reshape(sys.N, sys.m)
    xs = [np.asarray(x0, dtype=float)]
    for k in range(sys.N):
        xs.append(sys.A_seq[k] @ xs[-1] + sys.B_seq[k] @ U[k])
    return np.concatenate(xs)


def loop_cost(states, inputs, cost):
    total = 0.0
    for k in range(cost.N):
        total += inputs[k] @ cost.R_seq[k] @ inputs[k]
    for k in range(cost.N + 1):
        d = states[k] - cost.x_ref[k]
        total += d @ cost.Q_seq[k] @ d
    return total


# ---------------------------------------------------------------- steering


def kkt_mean(lift, mu0, mud):
    """Equality-constrained QP solved through its full KKT matrix."""
    M = lift.R_blk + lift.H_u.T @ lift.Q_blk @ lift.H_u
    Y = lift.Gamma @ mu0 - lift.X_ref
    Nm, n = lift.B_N.shape[1], lift.n
    K = np.block([[2 * M, -lift.B_N.T], [lift.B_N, np.zeros((n, n))]])
    rhs = np.concatenate([-2 * lift.H_u.T @ lift.Q_blk @ Y, mud - lift.Phi_N0 @ mu0])
    sol = np.linalg.solve(K, rhs)
    return sol[:Nm], sol[Nm:]


def sym_sqrt(S):
    w, V = np.linalg.eigh(S)
    return V @ np.diag(np.sqrt(w)) @ V.T


def best_feedback_lstsq(lift, Sigma0, Sigmad, T):
    """Optimal feasible ``L`` for a fixed orthogonal ``T`` via a Kronecker least-squares solve."""
    n = lift.n
    Nm = lift.B_N.shape[1]
    G = lift.B_N @ lift.B_N.T
    S0h = sym_sqrt(Sigma0)
    h = lift.B_N.T @ np.linalg.solve(G, sym_sqrt(Sigmad) @ T @ np.linalg.inv(S0h) - lift.Phi_N0)
    _, s, Vt = np.linalg.svd(lift.B_N)
    D = Vt[n:].T
    if D.shape[1] == 0:
        return h
    Rh = np.linalg.cholesky(lift.R_blk).T
    wq, Vq = np.linalg.eigh(lift.Q_blk)
    Qh = (Vq * np.sqrt(np.clip(wq, 0, None))) @ Vq.T
    # residual blocks: Rh (h + D Z) S0h and Qh (Gamma + H_u h + H_u D Z) S0h
    blocks_A = [np.kron(S0h.T, Rh @ D), np.kron(S0h.T, Qh @ lift.H_u @ D)]
    blocks_b = [(Rh @ h @ S0h).ravel(order="F"), (Qh @ (lift.Gamma + lift.H_u @ h) @ S0h).ravel(order="F")]
    z, *_ = np.linalg.lstsq(np.vstack(blocks_A), -np.concatenate(blocks_b), rcond=None)
    Z = z.reshape(Nm - n, n, order="F")
    return h + D @ Z


def random_orthogonal(rng, n):
    Qm, Rm = np.linalg.qr(rng.standard_normal((n, n)))
    return Qm * np.sign(np.diag(Rm))


# ---------------------------------------------------------------- transport


def brute_force_transport(C, p0, pd):
    """Minimum of the transportation LP over every basic feasible solution."""
    r, t = C.shape
    cells = [(i, j) for i in range(r) for j in range(t)]
    A = np.zeros((r + t, r * t))
    for k, (i, j) in enumerate(cells):
        A[i, k] = 1
        A[r + j, k] = 1
    b = np.concatenate([p0, pd])
    best = np.inf
    best_x = None
    for basis in itertools.combinations(range(r * t), r + t - 1):
        Ab = A[:, basis]
        if np.linalg.matrix_rank(Ab) < r + t - 1:
            continue
        xb, *_ = np.linalg.lstsq(Ab, b, rcond=None)
        if np.abs(Ab @ xb - b).max() > 1e-10 or xb.min() < -1e-12:
            continue
        val = float(C.ravel()[list(basis)] @ xb)
        if val < best:
            best = val
            best_x = np.zeros(r * t)
            best_x[list(basis)] = xb
    return best, best_x.reshape(r, t)


# ---------------------------------------------------------------- densities


def naive_gaussian_pdf(x, mean, cov):
    x, mean, cov = map(np.atleast_1d, (x, mean, cov))
    cov = np.atleast_2d(cov)
    n = mean.size
    d = x - mean
    return float(np.exp(-0.5 * d @ np.linalg.inv(cov) @ d) / np.sqrt((2 * np.pi) ** n * np.linalg.det(cov)))


# ---------------------------------------------------------------- 2-D example


def lqr_2d_problem():
    """2-D LQR example with two-component initial and desired mixtures."""
    N = 10
    A = np.array([[0.9, -0.1], [-0.1, 0.8]])
    B = np.array([[1.0], [0.0]])
    sys = LtvSystem.time_invariant(A, B, N)
    cost = QuadraticCost.time_invariant(np.eye(2), [[1.0]], N)
    initial = Gmm([0.8, 0.2], (Gaussian([-0.5, -0.6], 0.02 * np.eye(2)), Gaussian([0.0, 0.0], np.diag([0.02, 0.04]))))
    desired = Gmm([0.5, 0.5], (Gaussian([0.5, 0.5], 0.02 * np.eye(2)), Gaussian([0.6, -0.6], np.diag([0.02, 0.01]))))
    return sys, cost, initial, desired
