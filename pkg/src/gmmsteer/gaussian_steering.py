"""Closed-form Gaussian-to-Gaussian steering.

A Gaussian ``N(mu0, Sigma0)`` is steered to ``N(mud, Sigmad)`` by the input
sequence ``U = L (x0 - mu0) + U_bar``. The expected cost separates into a mean
part depending only on ``U_bar`` and a covariance part depending only on ``L``;
both have closed-form minimizers.

The covariance part parameterizes every feasible ``L`` by an orthogonal
``T`` and a free ``Z``::

    L(T, Z) = B_N^T G^-1 (Sigmad^1/2 T Sigma0^-1/2 - Phi) + D Z

where ``D`` spans the kernel of ``B_N``. Minimizing over ``Z`` is an
unconstrained QP, and the remaining problem ``min_T const + 2 tr(Omega T)``
is solved by ``T = -V U^T`` from the SVD ``Omega = U S V^T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import ConditioningError, NotControllableError
from .gmm import Gaussian
from .system import LiftedMatrices, null_basis

RCOND_MIN = 1e-12
SQRT_EIG_FLOOR = 1e-12


def _cho(A, what, exc):
    A = 0.5 * (A + A.T)
    if A.size == 0:
        return None
    w = np.linalg.eigvalsh(A)
    if w[-1] <= 0 or w[0] <= RCOND_MIN * w[-1]:
        raise exc(f"{what} is numerically singular (eigenvalues {w[0]:.3g}..{w[-1]:.3g})")
    return scipy.linalg.cho_factor(A, lower=True)


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition, eigenvalues clamped at 1e-12."""
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V * np.sqrt(np.maximum(w, SQRT_EIG_FLOOR))) @ V.T


def psd_inv_sqrt(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return (V / np.sqrt(np.maximum(w, SQRT_EIG_FLOOR))) @ V.T


@dataclass(frozen=True, eq=False)
class SteeringLaw:
    """Feedforward stack ``U_bar`` (``Nm``) and feedback stack ``L`` (``Nm x n``)."""

    U_bar: np.ndarray
    L: np.ndarray

    def inputs(self, x0, mu0) -> np.ndarray:
        """Stacked inputs ``L (x0 - mu0) + U_bar``; ``x0`` may be ``(count, n)``."""
        return (np.asarray(x0) - mu0) @ self.L.T + self.U_bar


@dataclass(frozen=True, eq=False)
class MeanSteeringSolution:
    U_bar: np.ndarray
    multiplier: np.ndarray
    cost: float


@dataclass(frozen=True, eq=False)
class CovSteeringSolution:
    L: np.ndarray
    T: np.ndarray
    Z: np.ndarray
    Omega: np.ndarray
    cost: float


@dataclass(frozen=True, eq=False)
class PairCost:
    cost: float
    mean_cost: float
    cov_cost: float
    law: SteeringLaw


class SteeringFactors:
    """Quantities that depend on the system and cost but not on the Gaussians.

    Building these once per problem avoids refactoring ``M``, the Grammian and
    ``D^T M D`` for every pair of components.
    """

    def __init__(self, lift: LiftedMatrices, D: np.ndarray | None = None):
        self.lift = lift
        self.D = null_basis(lift.B_N) if D is None else np.asarray(D, dtype=float)
        Nm = lift.B_N.shape[1]
        if self.D.shape[0] != Nm or self.D.shape[1] != Nm - lift.n:
            raise ValueError(f"D must have shape ({Nm}, {Nm - lift.n}), got {self.D.shape}")
        self.M = lift.M
        self.M_cho = _cho(self.M, "R + H_u^T Q H_u", ConditioningError)
        self.G_cho = _cho(lift.grammian, "controllability Grammian", NotControllableError)
        self.Minv_BNt = scipy.linalg.cho_solve(self.M_cho, lift.B_N.T)
        self.S_cho = _cho(lift.B_N @ self.Minv_BNt, "B_N M^-1 B_N^T", NotControllableError)
        # B_N^T G^-1, shape Nm x n
        self.BNt_Ginv = scipy.linalg.cho_solve(self.G_cho, lift.B_N).T
        self.HuT_Q = lift.H_u.T @ lift.Q_blk
        self.P = self.HuT_Q @ lift.Gamma

    @cached_property
    def _dmd(self):
        D = self.D
        if D.shape[1] == 0:
            return None
        return _cho(D.T @ self.M @ D, "D^T M D", ConditioningError)

    def z_star(self, h: np.ndarray) -> np.ndarray:
        """Optimal null-space coordinates for a fixed particular solution ``h``."""
        if self._dmd is None:
            return np.zeros((0, h.shape[1]))
        return -scipy.linalg.cho_solve(self._dmd, self.D.T @ (self.M @ h + self.P))

    @cached_property
    def theta1(self) -> np.ndarray:
        Nm = self.D.shape[0]
        if self._dmd is None:
            return np.eye(Nm)
        return np.eye(Nm) - self.D @ scipy.linalg.cho_solve(self._dmd, self.D.T @ self.M)

    @cached_property
    def theta2(self) -> np.ndarray:
        if self._dmd is None:
            return np.zeros_like(self.P)
        return self.D @ scipy.linalg.cho_solve(self._dmd, self.D.T @ self.P)

    @cached_property
    def theta4(self) -> np.ndarray:
        theta3 = self.BNt_Ginv @ self.lift.Phi_N0
        return self.theta1 @ theta3 + self.theta2

    @cached_property
    def theta5(self) -> np.ndarray:
        return self.lift.Gamma - self.lift.H_u @ self.theta4

    @cached_property
    def omega_left(self) -> np.ndarray:
        """``(Theta5^T Q H_u - Theta4^T R) Theta1 B_N^T G^-1``, shape ``n x n``."""
        lift = self.lift
        left = self.theta5.T @ lift.Q_blk @ lift.H_u - self.theta4.T @ lift.R_blk
        return left @ self.theta1 @ self.BNt_Ginv

    @cached_property
    def const_sigma0(self) -> np.ndarray:
        # Sigma0-dependent constant terms collapse to tr(K Sigma0) with K below.
        lift = self.lift
        t4, t5 = self.theta4, self.theta5
        K = t4.T @ lift.R_blk @ t4 + t5.T @ lift.Q_blk @ t5
        return 0.5 * (K + K.T)

    @cached_property
    def const_sigmad(self) -> np.ndarray:
        lift = self.lift
        W = self.theta1 @ self.BNt_Ginv
        HW = lift.H_u @ W
        K = W.T @ lift.R_blk @ W + HW.T @ lift.Q_blk @ HW
        return 0.5 * (K + K.T)


def mean_cost(lift: LiftedMatrices, mu0, U_bar) -> float:
    """``U_bar^T R U_bar + (X_bar - X')^T Q (X_bar - X')`` with ``X_bar = Gamma mu0 + H_u U_bar``."""
    U_bar = np.asarray(U_bar, dtype=float)
    Xt = lift.Gamma @ np.asarray(mu0, dtype=float) + lift.H_u @ U_bar - lift.X_ref
    return float(U_bar @ lift.R_blk @ U_bar + Xt @ lift.Q_blk @ Xt)


def cov_cost(lift: LiftedMatrices, Sigma0, L) -> float:
    """``tr(R L Sigma0 L^T) + tr(Q (Gamma + H_u L) Sigma0 (Gamma + H_u L)^T)``."""
    Sigma0 = np.asarray(Sigma0, dtype=float)
    L = np.asarray(L, dtype=float)
    F = lift.Gamma + lift.H_u @ L
    return float(np.trace(lift.R_blk @ L @ Sigma0 @ L.T) + np.trace(lift.Q_blk @ F @ Sigma0 @ F.T))


def _factors(lift, D, factors):
    if factors is not None:
        if factors.lift is not lift:
            raise ValueError("factors were built for a different LiftedMatrices")
        return factors
    return SteeringFactors(lift, D)


def solve_mean(lift: LiftedMatrices, mu0, mud, factors: SteeringFactors | None = None) -> MeanSteeringSolution:
    """Minimum-cost feedforward ``U_bar`` with ``Phi mu0 + B_N U_bar = mud``."""
    f = _factors(lift, None, factors)
    mu0 = np.asarray(mu0, dtype=float)
    mud = np.asarray(mud, dtype=float)
    Y = lift.Gamma @ mu0 - lift.X_ref
    g = f.HuT_Q @ Y
    rhs = f.Minv_BNt.T @ g + (mud - lift.Phi_N0 @ mu0)
    multiplier = 2.0 * scipy.linalg.cho_solve(f.S_cho, rhs)
    U_bar = 0.5 * scipy.linalg.cho_solve(f.M_cho, lift.B_N.T @ multiplier - 2.0 * g)
    return MeanSteeringSolution(U_bar=U_bar, multiplier=multiplier, cost=mean_cost(lift, mu0, U_bar))


def _check_pd(S, name):
    S = np.atleast_2d(np.asarray(S, dtype=float))
    try:
        np.linalg.cholesky(0.5 * (S + S.T))
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None
    return 0.5 * (S + S.T)


def feedback_for_rotation(lift: LiftedMatrices, Sigma0, Sigmad, T, Z=None, D=None,
                          factors: SteeringFactors | None = None) -> np.ndarray:
    """Feasible feedback ``L(T, Z)`` for an orthogonal ``T``.

    ``Z=None`` selects the optimal ``Z`` for this ``T``. Every returned ``L``
    satisfies the terminal covariance constraint; useful for comparing the
    optimum against other feasible gains.
    """
    f = _factors(lift, D, factors)
    Sigma0 = _check_pd(Sigma0, "Sigma0")
    Sigmad = _check_pd(Sigmad, "Sigmad")
    h = f.BNt_Ginv @ (psd_sqrt(Sigmad) @ np.asarray(T, dtype=float) @ psd_inv_sqrt(Sigma0) - lift.Phi_N0)
    if Z is None:
        Z = f.z_star(h)
    return h + f.D @ np.asarray(Z, dtype=float).reshape(f.D.shape[1], lift.n)


def solve_cov(lift: LiftedMatrices, D, Sigma0, Sigmad, factors: SteeringFactors | None = None) -> CovSteeringSolution:
    """Minimum-cost feedback ``L`` with ``(Phi + B_N L) Sigma0 (Phi + B_N L)^T = Sigmad``."""
    f = _factors(lift, D, factors)
    Sigma0 = _check_pd(Sigma0, "Sigma0")
    Sigmad = _check_pd(Sigmad, "Sigmad")
    S0h = psd_sqrt(Sigma0)
    Sdh = psd_sqrt(Sigmad)

    Omega = S0h @ f.omega_left @ Sdh
    U, s, Vt = np.linalg.svd(Omega)
    T = -Vt.T @ U.T

    h = f.BNt_Ginv @ (Sdh @ T @ psd_inv_sqrt(Sigma0) - lift.Phi_N0)
    Z = f.z_star(h)
    L = h + f.D @ Z

    const = np.sum(f.const_sigmad * Sigmad) + np.sum(f.const_sigma0 * Sigma0)
    cost = float(const - 2.0 * s.sum())
    return CovSteeringSolution(L=L, T=T, Z=Z, Omega=Omega, cost=cost)


def pair_cost(lift: LiftedMatrices, D, g0: Gaussian, gd: Gaussian,
              factors: SteeringFactors | None = None) -> PairCost:
    """Optimal expected cost of steering ``g0`` to ``gd`` and the law achieving it."""
    f = _factors(lift, D, factors)
    mean = solve_mean(lift, g0.mean, gd.mean, factors=f)
    cov = solve_cov(lift, f.D, g0.cov, gd.cov, factors=f)
    return PairCost(
        cost=mean.cost + cov.cost,
        mean_cost=mean.cost,
        cov_cost=cov.cost,
        law=SteeringLaw(U_bar=mean.U_bar, L=cov.L),
    )
