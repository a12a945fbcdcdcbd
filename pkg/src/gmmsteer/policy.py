"""Randomized mixture-steering policy.

Given ``x0``, the policy picks a pair ``(i, j)`` with probability
``gamma[i, j](x0) = resp_i(x0) * lam[i, j]``, where ``resp_i`` is the posterior
probability that ``x0`` came from base component ``i``, and then applies
``U = L_ij (x0 - mu_i) + U_bar_ij``. Under this policy a mixture initial state
is pushed to a mixture terminal state, and the optimal mixing weights come
from a transportation LP over pairwise Gaussian steering costs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import InconsistentPolicyError
from .gmm import Gaussian, Gmm
from .gaussian_steering import SteeringFactors, SteeringLaw, pair_cost
from .system import LiftedMatrices, LtvSystem, QuadraticCost, lift as lift_system, require_controllable
from .transport import TransportPlan, mixing_weights, solve_transport

STRUCTURAL_ZERO = 1e-12
PUSH_FORWARD_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class GmmPolicy:
    """Base mixture, row-stochastic mixing weights and the ``r x t`` grid of laws.

    ``laws[i][j]`` is ``None`` wherever ``lam[i, j]`` is a structural zero.
    """

    base: Gmm
    lam: np.ndarray
    laws: tuple
    N: int
    n: int
    m: int

    def __post_init__(self):
        lam = np.atleast_2d(np.asarray(self.lam, dtype=float)).copy()
        if lam.shape[0] != len(self.base):
            raise ValueError("lambda must have one row per base component")
        if np.any(lam < 0) or np.any(np.abs(lam.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("lambda rows must be nonnegative and sum to 1")
        laws = tuple(tuple(row) for row in self.laws)
        if len(laws) != lam.shape[0] or any(len(row) != lam.shape[1] for row in laws):
            raise ValueError("laws must form an r x t grid")
        Nm = self.N * self.m
        for i, row in enumerate(laws):
            for j, law in enumerate(row):
                if law is None:
                    if lam[i, j] > 0:
                        raise ValueError(f"pair ({i}, {j}) has positive weight but no law")
                    continue
                if law.U_bar.shape != (Nm,) or law.L.shape != (Nm, self.n):
                    raise ValueError(f"law ({i}, {j}) does not match N={self.N}, n={self.n}, m={self.m}")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "laws", laws)

    @property
    def r(self) -> int:
        return self.lam.shape[0]

    @property
    def t(self) -> int:
        return self.lam.shape[1]

    def to_dict(self) -> dict:
        laws = []
        for i, row in enumerate(self.laws):
            for j, law in enumerate(row):
                if law is not None:
                    laws.append({"i": i, "j": j, "U_bar": law.U_bar.tolist(), "L": law.L.tolist()})
        return {
            "N": self.N,
            "n": self.n,
            "m": self.m,
            "base": self.base.to_dict(),
            "lambda": self.lam.tolist(),
            "laws": laws,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GmmPolicy":
        base = Gmm.from_dict(data["base"])
        lam = np.asarray(data["lambda"], dtype=float)
        grid = [[None] * lam.shape[1] for _ in range(lam.shape[0])]
        for entry in data["laws"]:
            grid[entry["i"]][entry["j"]] = SteeringLaw(
                U_bar=np.asarray(entry["U_bar"], dtype=float),
                L=np.asarray(entry["L"], dtype=float).reshape(len(entry["U_bar"]), -1),
            )
        return cls(base=base, lam=lam, laws=grid, N=int(data["N"]), n=int(data["n"]), m=int(data["m"]))


@dataclass(frozen=True, eq=False)
class Synthesis:
    policy: GmmPolicy
    cost_matrix: np.ndarray
    plan: TransportPlan
    expected_cost: float
    lift: LiftedMatrices
    mean_costs: np.ndarray
    cov_costs: np.ndarray
    wall_time: float


def synthesize(sys: LtvSystem, cost: QuadraticCost, initial: Gmm, desired: Gmm) -> Synthesis:
    """Optimal mixing weights and per-pair laws for steering ``initial`` into ``desired``."""
    start = time.perf_counter()
    if initial.n != sys.n or desired.n != sys.n:
        raise ValueError("mixture dimension does not match the system state dimension")
    require_controllable(sys)
    lifted = lift_system(sys, cost)
    factors = SteeringFactors(lifted)

    r, t = len(initial), len(desired)
    C = np.empty((r, t))
    mean_costs = np.empty((r, t))
    cov_costs = np.empty((r, t))
    all_laws = [[None] * t for _ in range(r)]
    for i, g0 in enumerate(initial.components):
        for j, gd in enumerate(desired.components):
            pc = pair_cost(lifted, factors.D, g0, gd, factors=factors)
            C[i, j], mean_costs[i, j], cov_costs[i, j] = pc.cost, pc.mean_cost, pc.cov_cost
            all_laws[i][j] = pc.law

    plan = solve_transport(C, initial.weights, desired.weights)
    p0 = initial.weights
    lam = np.full((r, t), 1.0 / t)
    live = p0 > 0
    if live.any():
        lam[live] = mixing_weights(TransportPlan(plan.tilde_lambda[live], plan.objective), p0[live])
    lam[lam <= STRUCTURAL_ZERO] = 0.0
    lam /= lam.sum(axis=1, keepdims=True)
    laws = [[all_laws[i][j] if lam[i, j] > 0 else None for j in range(t)] for i in range(r)]

    policy = GmmPolicy(base=initial, lam=lam, laws=laws, N=sys.N, n=sys.n, m=sys.m)
    return Synthesis(
        policy=policy,
        cost_matrix=C,
        plan=plan,
        expected_cost=float(np.sum(C * plan.tilde_lambda)),
        lift=lifted,
        mean_costs=mean_costs,
        cov_costs=cov_costs,
        wall_time=time.perf_counter() - start,
    )


def gamma(policy: GmmPolicy, x0) -> np.ndarray:
    """Pair probabilities at ``x0``: shape ``(r, t)``, or ``(count, r, t)`` for a batch."""
    resp = policy.base.responsibilities(np.asarray(x0, dtype=float))
    return resp[..., :, None] * policy.lam


def sample_pairs(policy: GmmPolicy, x0, rng: np.random.Generator) -> np.ndarray:
    """Draw one flattened (row-major) pair index per row of ``x0`` by inverse CDF."""
    g = gamma(policy, np.atleast_2d(x0)).reshape(-1, policy.r * policy.t)
    cdf = np.cumsum(g, axis=1)
    u = rng.random(g.shape[0])
    idx = (cdf <= u[:, None]).sum(axis=1)
    # Rounding can leave u above the last cdf entry; fall back to the last live pair.
    overflow = idx >= g.shape[1]
    if overflow.any():
        last_live = g.shape[1] - 1 - np.argmax(g[overflow][:, ::-1] > 0, axis=1)
        idx[overflow] = last_live
    return idx


def sample_control(policy: GmmPolicy, x0, seed=None):
    """Draw ``(i, j)`` from ``gamma(x0)`` and return ``((i, j), U)``."""
    x0 = np.asarray(x0, dtype=float)
    rng = np.random.default_rng(seed)
    i, j = divmod(int(sample_pairs(policy, x0, rng)[0]), policy.t)
    law = policy.laws[i][j]
    return (i, j), law.inputs(x0, policy.base.components[i].mean)


def same_mixture(a: Gmm, b: Gmm, tol=1e-12) -> bool:
    if len(a) != len(b) or not np.allclose(a.weights, b.weights, rtol=0, atol=tol):
        return False
    return all(
        np.allclose(ca.mean, cb.mean, rtol=0, atol=tol) and np.allclose(ca.cov, cb.cov, rtol=0, atol=tol)
        for ca, cb in zip(a.components, b.components)
    )


def push_forward(lift: LiftedMatrices, component: Gaussian, law: SteeringLaw) -> Gaussian:
    """Terminal Gaussian reached from ``component`` under ``law``."""
    H = lift.Phi_N0 + lift.B_N @ law.L
    mean = lift.Phi_N0 @ component.mean + lift.B_N @ law.U_bar
    cov = H @ component.cov @ H.T
    return Gaussian(mean, 0.5 * (cov + cov.T))


def predict_terminal(policy: GmmPolicy, initial: Gmm, lift: LiftedMatrices,
                     tol: float = PUSH_FORWARD_TOL) -> Gmm:
    """Terminal mixture implied by ``policy`` when ``x0`` follows ``initial``.

    Terminal component ``j`` has weight ``sum_i p_i lam[i, j]``; every active
    pair in column ``j`` must push its initial component to the same Gaussian.
    Columns that receive no mass are omitted.
    """
    if not same_mixture(policy.base, initial):
        raise ValueError("policy base components must equal the initial mixture")
    p = initial.weights
    q = p @ policy.lam
    weights, comps = [], []
    for j in range(policy.t):
        active = [i for i in range(policy.r) if p[i] > 0 and policy.lam[i, j] > STRUCTURAL_ZERO]
        if not active:
            continue
        images = [push_forward(lift, initial.components[i], policy.laws[i][j]) for i in active]
        ref = images[0]
        for i, g in zip(active[1:], images[1:]):
            dmean = np.abs(g.mean - ref.mean).max()
            dcov = np.linalg.norm(g.cov - ref.cov) / max(np.linalg.norm(ref.cov), 1e-300)
            if dmean > tol or dcov > tol:
                raise InconsistentPolicyError(
                    f"components {active[0]} and {i} reach different Gaussians in terminal component {j}"
                )
        weights.append(q[j])
        comps.append(ref)
    weights = np.asarray(weights)
    return Gmm(weights / weights.sum(), tuple(comps))
