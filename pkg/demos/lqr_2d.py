"""
Two-component mixture steering on a 2-D LQR problem
===================================================

Steer x0 ~ GMM(0.8, 0.2) into a two-component target in N = 10 steps with
Q = I and R = 1, then check the policy by Monte-Carlo.
"""

import numpy as np

from gmmsteer import Gaussian, Gmm, LtvSystem, QuadraticCost, monte_carlo, predict_terminal, synthesize

np.set_printoptions(precision=4, suppress=True)

N = 10
A = np.array([[0.9, -0.1], [-0.1, 0.8]])
B = np.array([[1.0], [0.0]])
sys = LtvSystem.time_invariant(A, B, N)
cost = QuadraticCost.time_invariant(np.eye(2), [[1.0]], N)

initial = Gmm([0.8, 0.2], (Gaussian([-0.5, -0.6], 0.02 * np.eye(2)),
                           Gaussian([0.0, 0.0], np.diag([0.02, 0.04]))))
desired = Gmm([0.5, 0.5], (Gaussian([0.5, 0.5], 0.02 * np.eye(2)),
                           Gaussian([0.6, -0.6], np.diag([0.02, 0.01]))))

# %% Synthesis: one closed-form steering problem per (i, j), then a 2 x 2 transport LP.
res = synthesize(sys, cost, initial, desired)
print(f"synthesis took {res.wall_time * 1e3:.2f} ms")
print("pair costs C =\n", res.cost_matrix)
print("  mean part\n", res.mean_costs)
print("  covariance part\n", res.cov_costs)
print("optimal coupling tilde_lambda =\n", res.plan.tilde_lambda)
print("mixing weights lambda =\n", res.policy.lam)
print(f"expected cost {res.expected_cost:.6f}")

# Only three pairs carry mass: a vertex of the 2 x 2 transportation polytope
# has at most r + t - 1 = 3 positive entries.
for i in range(2):
    for j in range(2):
        if res.policy.lam[i, j] > 0:
            print(f"  initial {i} -> desired {j}: {res.policy.lam[i, j]:.3f} of its mass")

# %% The policy pushes the initial mixture exactly onto the target.
pred = predict_terminal(res.policy, initial, res.lift)
for j, c in enumerate(pred.components):
    print(f"terminal component {j}: weight {pred.weights[j]:.3f}, mean {c.mean}, "
          f"cov error {np.abs(c.cov - desired.components[j].cov).max():.1e}")

# %% Monte-Carlo check with 1000 samples, as a picture-sized run, then 1e5 for the statistics.
for count in (1000, 100_000):
    rep = monte_carlo(sys, cost, initial, res.policy, count, seed=1)
    print(f"\n{count} samples: mean cost {rep.empirical_mean_cost:.4f} +- {rep.cost_std_error:.4f} "
          f"(analytic {res.expected_cost:.4f})")
    print("pair frequencies\n", rep.pair_frequencies)

# Evolution of the cloud at a few time steps.
for k in (0, 2, 8, 10):
    Xk = rep.states[:, k]
    print(f"k = {k:2d}: mean {Xk.mean(axis=0)}, spread {Xk.std(axis=0)}")
