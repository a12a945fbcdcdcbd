import numpy as np
import pytest

from gmmsteer import (
    Gaussian,
    Gmm,
    GmmPolicy,
    InconsistentPolicyError,
    LtvSystem,
    NotControllableError,
    QuadraticCost,
    SteeringLaw,
    gamma,
    lift,
    predict_terminal,
    push_forward,
    sample_control,
    synthesize,
)
from gmmsteer.policy import sample_pairs
from oracles import lqr_2d_problem, random_cost, random_gmm, random_system


def assert_same_gmm(a, b, tol):
    assert len(a) == len(b)
    np.testing.assert_allclose(a.weights, b.weights, atol=tol)
    for ca, cb in zip(a.components, b.components):
        np.testing.assert_allclose(ca.mean, cb.mean, atol=tol)
        assert np.linalg.norm(ca.cov - cb.cov) <= tol * max(1.0, np.linalg.norm(cb.cov))


def identity_problem(g, N=3):
    n = g.n
    sys = LtvSystem.time_invariant(np.eye(n), np.eye(n), N)
    return sys, QuadraticCost.time_invariant(np.zeros((n, n)), np.eye(n), N)


@pytest.fixture(scope="module")
def lqr_synth():
    sys, cost, initial, desired = lqr_2d_problem()
    return synthesize(sys, cost, initial, desired), initial, desired


class TestSynthesize:
    def test_identity_single_gaussian(self):
        g = Gmm([1.0], (Gaussian([0.3, -0.2], [[0.2, 0.05], [0.05, 0.1]]),))
        res = synthesize(*identity_problem(g), g, g)
        assert abs(res.expected_cost) < 1e-12
        np.testing.assert_array_equal(res.policy.lam, [[1.0]])

    def test_2d_example(self, lqr_synth):
        res, initial, desired = lqr_synth
        assert res.expected_cost == pytest.approx(res.plan.objective, abs=1e-12)
        assert res.expected_cost == pytest.approx(float(np.sum(res.cost_matrix * res.plan.tilde_lambda)), abs=1e-12)
        X = res.plan.tilde_lambda
        np.testing.assert_allclose(X.sum(axis=1), initial.weights, atol=1e-9)
        np.testing.assert_allclose(X.sum(axis=0), desired.weights, atol=1e-9)
        np.testing.assert_allclose(res.policy.lam.sum(axis=1), 1.0, atol=1e-12)
        # the smaller initial component moves entirely to the first target
        np.testing.assert_allclose(res.policy.lam[1], [1.0, 0.0], atol=1e-12)
        assert res.policy.lam[0, 1] > 0.5

    def test_expected_cost_is_weighted_pair_sum(self, lqr_synth):
        res, initial, _ = lqr_synth
        total = sum(initial.weights[i] * res.policy.lam[i, j] * (res.mean_costs[i, j] + res.cov_costs[i, j])
                    for i in range(2) for j in range(2))
        assert total == pytest.approx(res.expected_cost, abs=1e-9)

    def test_structural_zeros_have_no_law(self, lqr_synth):
        res, *_ = lqr_synth
        for i in range(res.policy.r):
            for j in range(res.policy.t):
                assert (res.policy.laws[i][j] is None) == (res.policy.lam[i, j] == 0)

    def test_predicts_desired(self, lqr_synth):
        res, initial, desired = lqr_synth
        assert_same_gmm(predict_terminal(res.policy, initial, res.lift), desired, 1e-6)

    def test_exact_push_forward_targets(self):
        # each target is the zero-input image of one initial component; the anti-diagonal costs more
        initial = Gmm([0.4, 0.6], (Gaussian([-2.0, 0.0], 0.1 * np.eye(2)), Gaussian([2.0, 1.0], 0.2 * np.eye(2))))
        sys, cost = identity_problem(initial)
        res = synthesize(sys, cost, initial, initial)
        assert abs(res.expected_cost) < 1e-12
        np.testing.assert_allclose(res.plan.tilde_lambda, np.diag([0.4, 0.6]), atol=1e-12)
        np.testing.assert_allclose(np.diag(res.cost_matrix), 0.0, atol=1e-12)

    def test_random_problems_predict_desired(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            n, m = int(rng.integers(1, 4)), int(rng.integers(1, 3))
            N = int(rng.integers(max(2, n), 8))
            sys = random_system(rng, n, m, N)
            initial = random_gmm(rng, n, int(rng.integers(1, 4)))
            desired = random_gmm(rng, n, int(rng.integers(1, 4)))
            res = synthesize(sys, random_cost(rng, n, m, N), initial, desired)
            assert_same_gmm(predict_terminal(res.policy, initial, res.lift), desired, 1e-6)

    def test_uncontrollable(self):
        g = Gmm([1.0], (Gaussian([0.0, 0.0], np.eye(2)),))
        sys = LtvSystem.time_invariant(np.eye(2), [[1.0], [0.0]], 5)
        with pytest.raises(NotControllableError):
            synthesize(sys, QuadraticCost.time_invariant(np.eye(2), [[1.0]], 5), g, g)

    def test_dimension_mismatch(self):
        g1 = Gmm([1.0], (Gaussian([0.0], [[1.0]]),))
        sys, cost, *_ = lqr_2d_problem()
        with pytest.raises(ValueError):
            synthesize(sys, cost, g1, g1)


class TestGamma:
    def test_single_row(self, lqr_synth):
        res, *_ = lqr_synth
        g = Gmm([1.0], (res.policy.base.components[0],))
        pol = GmmPolicy(base=g, lam=res.policy.lam[:1], laws=res.policy.laws[:1], N=10, n=2, m=1)
        np.testing.assert_allclose(gamma(pol, [0.3, 0.1]), pol.lam, atol=1e-15)

    def test_normalized(self, lqr_synth):
        res, *_ = lqr_synth
        X = np.random.default_rng(0).normal(scale=3.0, size=(1000, 2))
        np.testing.assert_allclose(gamma(res.policy, X).sum(axis=(1, 2)), 1.0, atol=1e-12)

    def test_weight_scaling_invariance(self, lqr_synth):
        res, *_ = lqr_synth
        x = np.random.default_rng(1).standard_normal((50, 2))
        base = res.policy.base
        # responsibilities depend on weight ratios only
        logp = np.stack([c.logpdf(x) for c in base.components], axis=-1) + np.log(base.weights * 7.0)
        resp = np.exp(logp - np.logaddexp.reduce(logp, axis=1, keepdims=True))
        np.testing.assert_allclose(resp[:, :, None] * res.policy.lam, gamma(res.policy, x), atol=1e-12)

    def test_separated_components(self):
        sep = Gmm([0.5, 0.5], (Gaussian([0.0], [[1.0]]), Gaussian([100.0], [[1.0]])))
        lam = np.array([[0.3, 0.7], [0.6, 0.4]])
        law = SteeringLaw(np.zeros(2), np.zeros((2, 1)))
        pol = GmmPolicy(base=sep, lam=lam, laws=[[law, law], [law, law]], N=2, n=1, m=1)
        g = gamma(pol, [0.0])
        np.testing.assert_allclose(g[0], lam[0], atol=1e-12)
        assert g[1].max() < 1e-300
        assert np.all(np.isfinite(gamma(pol, [1e6])))


class TestSampleControl:
    def test_single_pair(self):
        g = Gmm([1.0], (Gaussian([1.0], [[0.5]]),))
        law = SteeringLaw(np.array([0.2, -0.1]), np.array([[0.5], [1.5]]))
        pol = GmmPolicy(base=g, lam=[[1.0]], laws=[[law]], N=2, n=1, m=1)
        for seed in range(5):
            pair, U = sample_control(pol, [3.0], seed=seed)
            assert pair == (0, 0)
            np.testing.assert_allclose(U, law.U_bar + law.L @ [2.0], atol=1e-15)

    def test_at_component_mean(self, lqr_synth):
        res, initial, _ = lqr_synth
        (i, j), U = sample_control(res.policy, initial.components[1].mean, seed=0)
        assert i == 1
        np.testing.assert_array_equal(U, res.policy.laws[i][j].U_bar)

    def test_deterministic(self, lqr_synth):
        res, *_ = lqr_synth
        a = sample_control(res.policy, [-0.3, -0.3], seed=42)
        b = sample_control(res.policy, [-0.3, -0.3], seed=42)
        assert a[0] == b[0]
        np.testing.assert_array_equal(a[1], b[1])

    def test_frequencies(self, lqr_synth):
        res, *_ = lqr_synth
        x0 = np.array([-0.25, -0.3])
        count = 100_000
        flat = sample_pairs(res.policy, np.tile(x0, (count, 1)), np.random.default_rng(7))
        freq = np.bincount(flat, minlength=4).reshape(2, 2) / count
        g = gamma(res.policy, x0)
        assert np.all(np.abs(freq - g) <= 4 * np.sqrt(g * (1 - g) / count) + 1e-15)


class TestPredictTerminal:
    def test_identity(self):
        g = random_gmm(np.random.default_rng(2), 2, 3)
        sys, cost = identity_problem(g)
        res = synthesize(sys, cost, g, g)
        assert_same_gmm(predict_terminal(res.policy, g, res.lift), g, 1e-9)

    def test_single_pair_direct(self):
        rng = np.random.default_rng(4)
        sys = random_system(rng, 2, 1, 4)
        L = lift(sys, random_cost(rng, 2, 1, 4))
        g0 = Gaussian([0.5, 0.1], [[0.3, 0.1], [0.1, 0.2]])
        law = SteeringLaw(rng.standard_normal(4), rng.standard_normal((4, 2)))
        pol = GmmPolicy(base=Gmm([1.0], (g0,)), lam=[[1.0]], laws=[[law]], N=4, n=2, m=1)
        out = predict_terminal(pol, pol.base, L)
        H = L.Phi_N0 + L.B_N @ law.L
        np.testing.assert_allclose(out.weights, [1.0])
        np.testing.assert_allclose(out.components[0].mean, L.Phi_N0 @ g0.mean + L.B_N @ law.U_bar, atol=1e-12)
        np.testing.assert_allclose(out.components[0].cov, H @ g0.cov @ H.T, atol=1e-12)
        pf = push_forward(L, g0, law)
        np.testing.assert_array_equal(pf.mean, out.components[0].mean)

    def test_inconsistent_column(self):
        sys = LtvSystem.time_invariant([[1.0]], [[1.0]], 2)
        L = lift(sys, QuadraticCost.time_invariant([[0.0]], [[1.0]], 2))
        base = Gmm([0.5, 0.5], (Gaussian([0.0], [[1.0]]), Gaussian([3.0], [[1.0]])))
        zero = SteeringLaw(np.zeros(2), np.zeros((2, 1)))
        pol = GmmPolicy(base=base, lam=[[1.0], [1.0]], laws=[[zero], [zero]], N=2, n=1, m=1)
        with pytest.raises(InconsistentPolicyError):
            predict_terminal(pol, base, L)

    def test_wrong_base(self, lqr_synth):
        res, _, desired = lqr_synth
        with pytest.raises(ValueError):
            predict_terminal(res.policy, desired, res.lift)


class TestGmmPolicy:
    def test_round_trip(self, lqr_synth):
        res, *_ = lqr_synth
        back = GmmPolicy.from_dict(res.policy.to_dict())
        np.testing.assert_array_equal(back.lam, res.policy.lam)
        for i in range(2):
            for j in range(2):
                a, b = back.laws[i][j], res.policy.laws[i][j]
                assert (a is None) == (b is None)
                if a is not None:
                    np.testing.assert_array_equal(a.U_bar, b.U_bar)
                    np.testing.assert_array_equal(a.L, b.L)

    def test_validation(self):
        g = Gmm([1.0], (Gaussian([0.0], [[1.0]]),))
        law = SteeringLaw(np.zeros(2), np.zeros((2, 1)))
        with pytest.raises(ValueError):
            GmmPolicy(base=g, lam=[[0.5, 0.4]], laws=[[law, law]], N=2, n=1, m=1)
        with pytest.raises(ValueError):
            GmmPolicy(base=g, lam=[[0.5, 0.5]], laws=[[law, None]], N=2, n=1, m=1)
        with pytest.raises(ValueError):
            GmmPolicy(base=g, lam=[[1.0]], laws=[[law]], N=3, n=1, m=1)
        with pytest.raises(ValueError):
            GmmPolicy(base=g, lam=[[1.0], [0.0]], laws=[[law], [None]], N=2, n=1, m=1)
