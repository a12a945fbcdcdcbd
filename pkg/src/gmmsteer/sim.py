"""Rollouts and Monte-Carlo validation of a synthesized policy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gmm import Gmm, sample
from .policy import GmmPolicy, sample_pairs
from .system import LtvSystem, QuadraticCost

MC_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: np.ndarray
    inputs: np.ndarray
    pair: tuple | None = None
    realized_cost: float | None = None


def _inputs_matrix(sys, U):
    U = np.asarray(U, dtype=float)
    if U.size != sys.N * sys.m:
        raise ValueError(f"expected {sys.N * sys.m} stacked inputs, got {U.size}")
    return U.reshape(sys.N, sys.m)


def rollout(sys: LtvSystem, x0, U) -> Trajectory:
    """Step ``x[k+1] = A[k] x[k] + B[k] u[k]`` from ``x0`` under stacked inputs ``U``."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (sys.n,):
        raise ValueError(f"x0 must have shape ({sys.n},), got {x0.shape}")
    inputs = _inputs_matrix(sys, U)
    states = np.empty((sys.N + 1, sys.n))
    states[0] = x0
    for k in range(sys.N):
        states[k + 1] = sys.A_seq[k] @ states[k] + sys.B_seq[k] @ inputs[k]
    return Trajectory(states=states, inputs=inputs)


def _batch_cost(states, inputs, cost: QuadraticCost):
    dx = states - cost.x_ref
    c = np.einsum("skn,knl,skl->s", dx, cost.Q_seq, dx)
    return c + np.einsum("skm,kml,skl->s", inputs, cost.R_seq, inputs)


def evaluate_cost(traj: Trajectory, cost: QuadraticCost) -> float:
    """Quadratic tracking cost of one trajectory, terminal term included."""
    if traj.states.shape != (cost.N + 1, cost.n) or traj.inputs.shape != (cost.N, cost.m):
        raise ValueError("trajectory length does not match the cost horizon")
    return float(_batch_cost(traj.states[None], traj.inputs[None], cost)[0])


@dataclass(frozen=True, eq=False)
class McReport:
    """Empirical statistics of ``sample_count`` closed-loop rollouts.

    ``pairs[s]`` is the ``(i, j)`` drawn for sample ``s``; the per-pair terminal
    moments are NaN where a pair was drawn too rarely to estimate them.
    """

    sample_count: int
    pair_counts: np.ndarray
    pair_frequencies: np.ndarray
    per_pair_terminal_mean: np.ndarray
    per_pair_terminal_cov: np.ndarray
    empirical_mean_cost: float
    cost_std_error: float
    initial_samples: np.ndarray
    initial_labels: np.ndarray
    pairs: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    costs: np.ndarray

    @property
    def terminal_samples(self) -> np.ndarray:
        return self.states[:, -1]

    def trajectory(self, s: int) -> Trajectory:
        return Trajectory(self.states[s], self.inputs[s], tuple(int(v) for v in self.pairs[s]), float(self.costs[s]))

    def to_dict(self) -> dict:
        def clean(a):
            return [clean(v) for v in a] if isinstance(a, list) else (None if math.isnan(a) else a)

        return {
            "sample_count": self.sample_count,
            "pair_counts": self.pair_counts.tolist(),
            "pair_frequencies": self.pair_frequencies.tolist(),
            "per_pair_terminal_mean": clean(self.per_pair_terminal_mean.tolist()),
            "per_pair_terminal_cov": clean(self.per_pair_terminal_cov.tolist()),
            "empirical_mean_cost": clean(self.empirical_mean_cost),
            "cost_std_error": clean(self.cost_std_error),
        }


def _block_seeds(seed, count, block):
    root = np.random.SeedSequence(seed)
    for b, start in enumerate(range(0, count, block)):
        # spawn_key fixes block b's stream regardless of how blocks are scheduled.
        child = np.random.SeedSequence(root.entropy, spawn_key=(b,))
        yield start, min(start + block, count), np.random.default_rng(child)


def monte_carlo(sys: LtvSystem, cost: QuadraticCost, initial: Gmm, policy: GmmPolicy,
                count: int, seed=0, block: int = MC_BLOCK) -> McReport:
    """Sample ``x0 ~ initial``, draw controls from ``policy`` and roll out each sample.

    Samples are generated in fixed-size blocks, each with its own seed stream,
    so the result depends only on ``seed`` and ``count``.
    """
    if (policy.N, policy.n, policy.m) != (sys.N, sys.n, sys.m):
        raise ValueError("policy dimensions do not match the system")
    if count < 0:
        raise ValueError("count must be nonnegative")
    N, n, m, r, t = sys.N, sys.n, sys.m, policy.r, policy.t
    x0 = np.empty((count, n))
    labels = np.empty(count, dtype=int)
    flat = np.empty(count, dtype=int)
    for lo, hi, rng in _block_seeds(seed, count, block):
        x0[lo:hi], labels[lo:hi] = sample(initial, hi - lo, rng)
        flat[lo:hi] = sample_pairs(policy, x0[lo:hi], rng)
    pairs = np.stack(np.divmod(flat, t), axis=1) if count else np.empty((0, 2), dtype=int)

    U = np.empty((count, N * m))
    for k in np.unique(flat):
        i, j = divmod(int(k), t)
        sel = flat == k
        U[sel] = policy.laws[i][j].inputs(x0[sel], policy.base.components[i].mean)
    inputs = U.reshape(count, N, m)
    states = np.empty((count, N + 1, n))
    states[:, 0] = x0
    for k in range(N):
        states[:, k + 1] = states[:, k] @ sys.A_seq[k].T + inputs[:, k] @ sys.B_seq[k].T
    costs = _batch_cost(states, inputs, cost)

    pair_counts = np.bincount(flat, minlength=r * t).reshape(r, t)
    means = np.full((r, t, n), np.nan)
    covs = np.full((r, t, n, n), np.nan)
    for i in range(r):
        for j in range(t):
            xN = states[flat == i * t + j, -1]
            if len(xN) >= 1:
                means[i, j] = xN.mean(axis=0)
            if len(xN) >= 2:
                covs[i, j] = np.cov(xN, rowvar=False).reshape(n, n)
    if count:
        freqs = pair_counts / count
        mean_cost = float(costs.mean())
        se = float(costs.std(ddof=1) / np.sqrt(count)) if count > 1 else math.nan
    else:
        freqs = np.zeros((r, t))
        mean_cost = se = math.nan
    return McReport(
        sample_count=count,
        pair_counts=pair_counts,
        pair_frequencies=freqs,
        per_pair_terminal_mean=means,
        per_pair_terminal_cov=covs,
        empirical_mean_cost=mean_cost,
        cost_std_error=se,
        initial_samples=x0,
        initial_labels=labels,
        pairs=pairs,
        states=states,
        inputs=inputs,
        costs=costs,
    )
