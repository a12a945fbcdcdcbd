"""Linear time-varying dynamics, quadratic costs and their lifted (stacked) form.

The dynamics are deterministic, ``x[k+1] = A[k] x[k] + B[k] u[k]`` for
``k = 0..N-1``. Stacking the whole horizon gives ``X = Gamma x0 + H_u U``
with ``X = [x0; ...; xN]`` and ``U = [u0; ...; u(N-1)]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import NotControllableError

DEFAULT_CONTROLLABILITY_TOL = 1e-9


def _as_stack(mats, count, rows, cols, name):
    arr = np.asarray(mats, dtype=float)
    if arr.ndim == 2:
        arr = np.broadcast_to(arr, (count,) + arr.shape).copy()
    if arr.shape != (count, rows, cols):
        raise ValueError(f"{name} must have shape ({count}, {rows}, {cols}), got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LtvSystem:
    """Time-varying pair ``(A[k], B[k])`` over a horizon of ``N`` steps.

    ``A_seq`` has shape ``(N, n, n)`` and ``B_seq`` shape ``(N, n, m)``.
    """

    A_seq: np.ndarray
    B_seq: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A_seq, dtype=float)
        B = np.asarray(self.B_seq, dtype=float)
        if A.ndim != 3 or B.ndim != 3:
            raise ValueError("A_seq and B_seq must be stacks of matrices")
        N, n, n2 = A.shape
        if N < 1 or n < 1 or n != n2:
            raise ValueError(f"A_seq must have shape (N, n, n) with N, n >= 1, got {A.shape}")
        if B.shape[0] != N or B.shape[1] != n or B.shape[2] < 1:
            raise ValueError(f"B_seq must have shape ({N}, {n}, m), got {B.shape}")
        object.__setattr__(self, "A_seq", _as_stack(A, N, n, n, "A_seq"))
        object.__setattr__(self, "B_seq", _as_stack(B, N, n, B.shape[2], "B_seq"))

    @classmethod
    def time_invariant(cls, A, B, N: int) -> "LtvSystem":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        B = np.atleast_2d(B)
        if N < 1:
            raise ValueError("horizon N must be a positive integer")
        return cls(np.broadcast_to(A, (N,) + A.shape), np.broadcast_to(B, (N,) + B.shape))

    @property
    def N(self) -> int:
        return self.A_seq.shape[0]

    @property
    def n(self) -> int:
        return self.A_seq.shape[1]

    @property
    def m(self) -> int:
        return self.B_seq.shape[2]


@dataclass(frozen=True)
class QuadraticCost:
    """Stage and terminal weights of the tracking cost.

    ``Q_seq`` holds ``N + 1`` state weights (the last one is terminal),
    ``R_seq`` holds ``N`` input weights and ``x_ref`` the ``N + 1``
    reference states.
    """

    Q_seq: np.ndarray
    R_seq: np.ndarray
    x_ref: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q_seq, dtype=float)
        R = np.asarray(self.R_seq, dtype=float)
        x_ref = np.asarray(self.x_ref, dtype=float)
        if Q.ndim != 3 or R.ndim != 3 or Q.shape[1] != Q.shape[2] or R.shape[1] != R.shape[2]:
            raise ValueError("Q_seq and R_seq must be stacks of square matrices")
        N = R.shape[0]
        n = Q.shape[1]
        if Q.shape[0] != N + 1:
            raise ValueError(f"Q_seq needs N + 1 = {N + 1} matrices, got {Q.shape[0]}")
        if x_ref.shape != (N + 1, n):
            raise ValueError(f"x_ref must have shape ({N + 1}, {n}), got {x_ref.shape}")
        for k, Qk in enumerate(Q):
            scale = max(1.0, np.abs(Qk).max())
            if not np.allclose(Qk, Qk.T, atol=1e-12 * scale):
                raise ValueError(f"Q_seq[{k}] is not symmetric")
            if np.linalg.eigvalsh(Qk).min() < -1e-10 * scale:
                raise ValueError(f"Q_seq[{k}] is not positive semidefinite")
        for k, Rk in enumerate(R):
            scale = max(1.0, np.abs(Rk).max())
            if not np.allclose(Rk, Rk.T, atol=1e-12 * scale):
                raise ValueError(f"R_seq[{k}] is not symmetric")
            if np.linalg.eigvalsh(Rk).min() <= 1e-10 * scale:
                raise ValueError(f"R_seq[{k}] is not positive definite")
        for name, arr in (("Q_seq", Q), ("R_seq", R), ("x_ref", x_ref)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def time_invariant(cls, Q, R, N: int, x_ref=None) -> "QuadraticCost":
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        R = np.atleast_2d(np.asarray(R, dtype=float))
        n = Q.shape[0]
        if x_ref is None:
            x_ref = np.zeros((N + 1, n))
        x_ref = np.asarray(x_ref, dtype=float)
        if x_ref.ndim == 1:
            x_ref = np.broadcast_to(x_ref, (N + 1, n))
        return cls(np.broadcast_to(Q, (N + 1, n, n)), np.broadcast_to(R, (N,) + R.shape), x_ref)

    @property
    def N(self) -> int:
        return self.R_seq.shape[0]

    @property
    def n(self) -> int:
        return self.Q_seq.shape[1]

    @property
    def m(self) -> int:
        return self.R_seq.shape[1]


@dataclass(frozen=True)
class LiftedMatrices:
    """Stacked horizon matrices.

    Attributes:
        Gamma: ``(N+1)n x n``, block row ``k`` is ``Phi(k, 0)``.
        H_u: ``(N+1)n x Nm``, block ``(k, j)`` is ``Phi(k, j+1) B[j]`` for ``j < k``.
        B_N: ``n x Nm``, the last block row of ``H_u``.
        Phi_N0: ``n x n`` state transition over the full horizon.
        Q_blk, R_blk: block-diagonal cost weights.
        X_ref: stacked reference trajectory.
    """

    Gamma: np.ndarray
    H_u: np.ndarray
    B_N: np.ndarray
    Phi_N0: np.ndarray
    Q_blk: np.ndarray
    R_blk: np.ndarray
    X_ref: np.ndarray

    @property
    def n(self) -> int:
        return self.Phi_N0.shape[0]

    @property
    def N(self) -> int:
        return self.Gamma.shape[0] // self.n - 1

    @property
    def m(self) -> int:
        return self.B_N.shape[1] // self.N

    @cached_property
    def M(self) -> np.ndarray:
        """``R + H_u^T Q H_u``, the Hessian (up to a factor 2) of both steering costs."""
        M = self.R_blk + self.H_u.T @ self.Q_blk @ self.H_u
        return 0.5 * (M + M.T)

    @cached_property
    def grammian(self) -> np.ndarray:
        G = self.B_N @ self.B_N.T
        return 0.5 * (G + G.T)


def _check_index(sys: LtvSystem, k, name):
    if not isinstance(k, (int, np.integer)) or k < 0 or k > sys.N:
        raise ValueError(f"{name}={k!r} is outside 0..{sys.N}")


def state_transition(sys: LtvSystem, k1: int, k2: int) -> np.ndarray:
    """Return ``Phi(k2, k1) = A[k2-1] ... A[k1]`` (identity when ``k1 == k2``)."""
    _check_index(sys, k1, "k1")
    _check_index(sys, k2, "k2")
    if k1 > k2:
        raise ValueError(f"state_transition needs k1 <= k2, got k1={k1}, k2={k2}")
    Phi = np.eye(sys.n)
    for k in range(k1, k2):
        Phi = sys.A_seq[k] @ Phi
    return Phi


def grammian(sys: LtvSystem) -> np.ndarray:
    """Controllability Grammian ``sum_k Phi(N, k+1) B[k] B[k]^T Phi(N, k+1)^T``."""
    G = np.zeros((sys.n, sys.n))
    Phi = np.eye(sys.n)
    # Walk backwards so Phi(N, k+1) is built by right-multiplication.
    for k in range(sys.N - 1, -1, -1):
        PB = Phi @ sys.B_seq[k]
        G += PB @ PB.T
        Phi = Phi @ sys.A_seq[k]
    return 0.5 * (G + G.T)


def assert_controllable(sys: LtvSystem, tol: float = DEFAULT_CONTROLLABILITY_TOL) -> bool:
    """True iff the Grammian's singular values satisfy ``s_min > tol * s_max``.

    Returns ``False`` rather than raising; :func:`require_controllable` raises.
    """
    s = np.linalg.svd(grammian(sys), compute_uv=False)
    return bool(s[0] > 0 and s[-1] > tol * s[0])


is_controllable = assert_controllable


def require_controllable(sys: LtvSystem, tol: float = DEFAULT_CONTROLLABILITY_TOL) -> None:
    if not is_controllable(sys, tol):
        raise NotControllableError(f"system is not controllable over horizon N={sys.N}")


def lift(sys: LtvSystem, cost: QuadraticCost) -> LiftedMatrices:
    """Build the stacked matrices for ``sys`` and ``cost``."""
    if (cost.N, cost.n, cost.m) != (sys.N, sys.n, sys.m):
        raise ValueError(
            f"cost dimensions (N={cost.N}, n={cost.n}, m={cost.m}) do not match "
            f"system (N={sys.N}, n={sys.n}, m={sys.m})"
        )
    N, n, m = sys.N, sys.n, sys.m
    Gamma = np.zeros(((N + 1) * n, n))
    H_u = np.zeros(((N + 1) * n, N * m))
    Gamma[:n] = np.eye(n)
    for k in range(N):
        rows, nxt = slice(k * n, (k + 1) * n), slice((k + 1) * n, (k + 2) * n)
        Gamma[nxt] = sys.A_seq[k] @ Gamma[rows]
        H_u[nxt, : k * m] = sys.A_seq[k] @ H_u[rows, : k * m]
        H_u[nxt, k * m : (k + 1) * m] = sys.B_seq[k]
    return LiftedMatrices(
        Gamma=Gamma,
        H_u=H_u,
        B_N=H_u[N * n :].copy(),
        Phi_N0=Gamma[N * n :].copy(),
        Q_blk=scipy.linalg.block_diag(*cost.Q_seq),
        R_blk=scipy.linalg.block_diag(*cost.R_seq),
        X_ref=cost.x_ref.reshape(-1).copy(),
    )


def null_basis(B_N: np.ndarray, tol: float = DEFAULT_CONTROLLABILITY_TOL) -> np.ndarray:
    """Orthonormal basis ``D`` of the kernel of the full-row-rank matrix ``B_N``.

    Returns an ``Nm x (Nm - n)`` matrix with ``B_N @ D == 0`` and
    ``D.T @ D == I``. When ``Nm == n`` the result has zero columns.
    """
    B_N = np.atleast_2d(np.asarray(B_N, dtype=float))
    n, Nm = B_N.shape
    if Nm < n:
        raise NotControllableError(f"B_N has fewer columns ({Nm}) than rows ({n})")
    _, s, Vt = np.linalg.svd(B_N, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    if rank < n:
        raise NotControllableError(f"B_N has rank {rank} < {n}; system not controllable")
    return Vt[n:].T.copy()
