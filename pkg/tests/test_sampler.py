import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import importance_posterior_mean, k_kernel
from scipy import stats
from scipy.special import ndtr

from truncgraph.model import Hyperparams, ProposalSpec, log_posterior_k
from truncgraph.sampler import (
    ChainState,
    DegenerateStateError,
    LabelData,
    PosteriorSummary,
    Trace,
    accuracy,
    init_state,
    initial_k,
    run_baseline_full,
    run_chain,
    sample_truncated_normal,
    summarize,
    truncated_normal,
    update_c,
    update_gk,
    update_z,
)
from truncgraph.spectral import path_eigenpairs

SQRT_2_OVER_PI = np.sqrt(2 / np.pi)


def make_state(basis, k, c=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return ChainState(rng.standard_normal(basis.n), rng.standard_normal(k), k, c)


def batch_means_se(samples, batches=25):
    """Per-column Monte Carlo standard error of the mean from batch means."""
    usable = len(samples) - len(samples) % batches
    means = samples[:usable].reshape(batches, -1, samples.shape[1]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(batches)


def trace_from(f):
    f = np.asarray(f, dtype=float)
    z = np.zeros(3, dtype=np.int64)
    return Trace(np.ones(3, dtype=np.int64), np.ones(3), np.ones(3, bool), z, f, 0, 1)


class TestTruncatedNormal:
    def test_positive_standard(self):
        x = truncated_normal(np.zeros(200_000), True, np.random.default_rng(0))
        assert np.all(x > 0)
        se = np.sqrt((1 - 2 / np.pi) / len(x))
        assert abs(x.mean() - SQRT_2_OVER_PI) < 3 * se

    def test_negative_standard(self):
        x = truncated_normal(np.zeros(200_000), False, np.random.default_rng(1))
        assert np.all(x < 0)
        assert abs(x.mean() + SQRT_2_OVER_PI) < 3 * np.sqrt((1 - 2 / np.pi) / len(x))

    def test_mean_five(self):
        x = truncated_normal(np.full(200_000, 5.0), True, np.random.default_rng(2))
        ref = 5 + stats.norm.pdf(5) / stats.norm.cdf(5)
        assert abs(x.mean() - ref) < 3 * x.std() / np.sqrt(len(x))

    @pytest.mark.parametrize("mean", [-30.0, -8.0, -3.0, -0.2, 0.7, 4.0, 30.0])
    def test_matches_scipy(self, mean):
        x = truncated_normal(np.full(20_000, mean), True, np.random.default_rng(3))
        assert np.all(np.isfinite(x)) and np.all(x > 0)
        ref = stats.truncnorm(-mean, np.inf, loc=mean)
        assert stats.kstest(x, ref.cdf).pvalue > 0.01

    def test_far_tail_negative_side(self):
        x = truncated_normal(np.full(1000, 25.0), False, np.random.default_rng(4))
        assert np.all(np.isfinite(x)) and np.all(x < 0)
        assert abs(x.mean() + 1 / 25) < 0.01

    def test_scalar_wrapper(self):
        rng = np.random.default_rng(5)
        assert sample_truncated_normal(-8.0, "positive", rng) > 0
        assert sample_truncated_normal(8.0, "negative", rng) < 0
        with pytest.raises(ValueError):
            sample_truncated_normal(0.0, "up", rng)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-40, 40), st.booleans(), st.integers(0, 2**32 - 1))
    def test_support(self, mean, positive, seed):
        x = truncated_normal(np.full(16, mean), positive, np.random.default_rng(seed))
        assert np.all(np.isfinite(x))
        assert np.all(x > 0) if positive else np.all(x < 0)


class TestLabelData:
    def test_signs(self):
        d = LabelData(5, [0, 3], [1, 0])
        np.testing.assert_array_equal(d.signs(), [1, 0, 0, -1, 0])

    def test_from_full(self):
        d = LabelData.from_full([1, 0, 1, 1], [True, False, False, True])
        np.testing.assert_array_equal(d.vertices, [0, 3])
        np.testing.assert_array_equal(d.labels, [1, 1])

    @pytest.mark.parametrize("v,y", [([0, 0], [1, 1]), ([5], [1]), ([0], [2]), ([0, 1], [1])])
    def test_invalid(self, v, y):
        with pytest.raises(ValueError):
            LabelData(5, v, y)


class TestUpdateZ:
    def test_unobserved_is_gaussian(self):
        b = path_eigenpairs(3)
        s = ChainState(np.zeros(3), np.array([0.0, 1.0]), 2, 1.0)
        f = b.synthesize(s.g)
        rng = np.random.default_rng(0)
        data = LabelData(3, [], [])
        Z = np.array([update_z(s, data, b, rng).z for _ in range(20_000)])
        np.testing.assert_allclose(Z.mean(axis=0), f, atol=0.03)
        np.testing.assert_allclose(Z.var(axis=0), 1.0, atol=0.04)

    def test_observed_sign_and_mean(self):
        b = path_eigenpairs(4)
        s = ChainState(np.zeros(4), np.zeros(1), 1, 1.0)
        data = LabelData(4, [0, 2], [1, 0])
        rng = np.random.default_rng(1)
        Z = np.array([update_z(s, data, b, rng).z for _ in range(20_000)])
        assert np.all(Z[:, 0] > 0) and np.all(Z[:, 2] < 0)
        assert abs(Z[:, 0].mean() - SQRT_2_OVER_PI) < 0.02
        assert abs(Z[:, 2].mean() + SQRT_2_OVER_PI) < 0.02

    def test_field_isolation(self):
        b = path_eigenpairs(6)
        s = make_state(b, 3, 0.7)
        out = update_z(s, LabelData(6, [1], [1]), b, np.random.default_rng(2))
        assert out.k == s.k and out.c == s.c and out.g is s.g
        assert not np.array_equal(out.z, s.z)


class TestUpdateGK:
    def test_stay_always_accepted(self):
        b = path_eigenpairs(6)
        h = Hyperparams(gamma=0.1, proposal=ProposalSpec.point_mass()).resolve(6)
        s = make_state(b, 3)
        out, accepted, _ = update_gk(s, b, h, np.random.default_rng(0))
        assert accepted and out.k == 3
        assert not np.array_equal(out.g, s.g)

    def test_redraw_is_exact_conditional(self):
        b = path_eigenpairs(5)
        h = Hyperparams(q=1, gamma=0.1, proposal=ProposalSpec.point_mass())
        s = ChainState(np.array([0.5, -1.0, 2.0, 0.3, -0.2]), np.zeros(2), 2, 1.5)
        rng = np.random.default_rng(1)
        G = np.array([update_gk(s, b, h, rng)[0].g for _ in range(20_000)])
        t = (b.eigenvalues[:2] + 1 / 25) ** 1
        prec = 1 + 1.5 * t
        np.testing.assert_allclose(G.mean(axis=0), b.project(s.z, 2) / prec, atol=0.02)
        np.testing.assert_allclose(G.var(axis=0), 1 / prec, rtol=0.03)

    def test_below_support_rejected(self):
        b = path_eigenpairs(6)
        jump = ProposalSpec(np.array([-2]), np.array([1.0]))
        h = Hyperparams(gamma=0.1, proposal=jump)
        s = make_state(b, 1)
        out, accepted, _ = update_gk(s, b, h, np.random.default_rng(0))
        assert not accepted and out is s

    def test_reject_mode_caps_k(self):
        b = path_eigenpairs(20, 4)
        up = ProposalSpec(np.array([1]), np.array([1.0]))
        h = Hyperparams(gamma=0.0, proposal=up)
        s = make_state(b, 4)
        out, accepted, basis = update_gk(s, b, h, np.random.default_rng(0))
        assert not accepted and out.k == 4 and basis is b

    def test_extend_mode_grows_basis(self):
        b = path_eigenpairs(40, 8)
        up = ProposalSpec(np.array([1]), np.array([1.0]))
        h = Hyperparams(gamma=0.0, proposal=up)
        s = make_state(b, 8)
        rng = np.random.default_rng(0)
        for _ in range(20):
            s, _, b = update_gk(s, b, h, rng, mode="extend")
            assert s.k <= b.m and len(s.g) == s.k
        assert b.m > 8
        np.testing.assert_array_equal(b.eigenvectors, path_eigenpairs(40, b.m).eigenvectors)

    def test_bad_mode(self):
        b = path_eigenpairs(5)
        with pytest.raises(ValueError):
            update_gk(make_state(b, 2), b, Hyperparams(gamma=0.1), np.random.default_rng(), "x")

    def test_detailed_balance_small(self):
        b = path_eigenpairs(4)
        h = Hyperparams(q=1, gamma=0.3)
        z = np.array([1.3, -0.2, 0.6, -2.0])
        P = k_kernel(z, 0.8, b, h)
        pi = np.exp(log_posterior_k(z, 0.8, b, h))
        flow = pi[:, None] * P
        np.testing.assert_allclose(flow, flow.T, atol=1e-12)
        np.testing.assert_allclose(pi @ P, pi, atol=1e-12)

    def test_long_run_frequencies(self):
        b = path_eigenpairs(6)
        h = Hyperparams(q=1, gamma=0.2)
        z = np.array([2.0, -0.5, 1.0, -1.5, 0.8, 0.3])
        s = ChainState(z, np.zeros(3), 3, 0.5)
        rng = np.random.default_rng(7)
        counts = np.zeros(6)
        for _ in range(30_000):
            s = update_gk(s, b, h, rng)[0]
            counts[s.k - 1] += 1
        target = np.exp(log_posterior_k(z, 0.5, b, h))
        assert 0.5 * np.abs(counts / counts.sum() - target).sum() < 0.03


class TestUpdateC:
    def test_gamma_mean(self):
        b = path_eigenpairs(5)
        h = Hyperparams(q=0, a=0, b=0)
        s = ChainState(np.zeros(5), np.array([1.0, 1.0]), 2, 1.0)
        rng = np.random.default_rng(0)
        cs = np.array([update_c(s, b, h, rng).c for _ in range(100_000)])
        assert abs(cs.mean() - 1.0) < 3 * cs.std() / np.sqrt(len(cs))

    def test_distribution_fit(self):
        b = path_eigenpairs(8)
        h = Hyperparams(q=2, a=3, b=2)
        g = np.array([0.3, -1.0, 2.5])
        s = ChainState(np.zeros(8), g, 3, 1.0)
        rng = np.random.default_rng(1)
        cs = np.array([update_c(s, b, h, rng).c for _ in range(20_000)])
        rate = 2 + 0.5 * np.sum((b.eigenvalues[:3] + 1 / 64) ** 2 * g**2)
        assert stats.kstest(cs, stats.gamma(3 + 1.5, scale=1 / rate).cdf).pvalue > 0.01

    def test_degenerate(self):
        b = path_eigenpairs(4)
        s = ChainState(np.zeros(4), np.zeros(2), 2, 1.0)
        with pytest.raises(DegenerateStateError):
            update_c(s, b, Hyperparams(a=0, b=0), np.random.default_rng())

    def test_field_isolation(self):
        b = path_eigenpairs(6)
        s = make_state(b, 3)
        out = update_c(s, b, Hyperparams(), np.random.default_rng(0))
        assert out.z is s.z and out.g is s.g and out.k == s.k
        assert out.c != s.c


class TestInit:
    def test_initial_k(self):
        assert initial_k(0.0, 50) == 10
        assert initial_k(0.0, 4) == 4
        assert initial_k(0.04, 500) == 25
        assert initial_k(5.0, 500) == 1
        assert initial_k(0.001, 30) == 30

    def test_init_state(self):
        b = path_eigenpairs(30)
        h = Hyperparams(gamma=0.25).resolve(30)
        data = LabelData(30, [0, 5], [1, 0])
        s = init_state(data, b, h, np.random.default_rng(0))
        assert s.k == 4 and s.c == 1.0 and len(s.g) == 4
        assert s.z[0] > 0 and s.z[5] < 0
        assert np.sum(s.g**2) > 0


@pytest.fixture(scope="module")
def small_problem():
    b = path_eigenpairs(30)
    f0 = np.cos(np.linspace(0, 3, 30)) * 2
    y = (f0 > 0).astype(int)
    data = LabelData.from_full(y, np.arange(30) % 3 != 0)
    return b, data


class TestRunChain:
    def test_deterministic(self, small_problem):
        b, data = small_problem
        h = Hyperparams(gamma=0.2)
        t1 = run_chain(data, b, h, 600, 100, 5, seed=42)
        t2 = run_chain(data, b, h, 600, 100, 5, seed=42)
        for name in ("k", "c", "accepted", "f"):
            np.testing.assert_array_equal(getattr(t1, name), getattr(t2, name))

    def test_shapes_and_support(self, small_problem):
        b, data = small_problem
        t = run_chain(data, b, Hyperparams(gamma=0.05), 700, 200, 5, seed=1)
        assert t.n_iter == 700 and t.f.shape == (100, 30)
        assert t.k.min() >= 1 and t.k.max() <= b.m
        assert np.all(t.c > 0)

    def test_stored_count_floor(self, small_problem):
        b, data = small_problem
        t = run_chain(data, b, Hyperparams(gamma=0.05), 307, 100, 5, seed=1)
        assert t.f.shape[0] == (307 - 100) // 5

    def test_validation(self, small_problem):
        b, data = small_problem
        with pytest.raises(ValueError):
            run_chain(data, b, Hyperparams(), 100, 100, 1)
        with pytest.raises(ValueError):
            run_chain(LabelData(5, [0], [1]), b, Hyperparams(), 100, 10, 1)

    def test_recovers_labels(self, small_problem):
        b, data = small_problem
        t = run_chain(data, b, Hyperparams(gamma=0.1), 3000, 500, 5, seed=3)
        s = summarize(t)
        truth = (np.cos(np.linspace(0, 3, 30)) > 0).astype(int)
        assert accuracy(s, truth, np.arange(0, 30, 3)) >= 0.9

    def test_extend_mode(self, small_problem):
        _, data = small_problem
        b = path_eigenpairs(30, 3)
        t = run_chain(data, b, Hyperparams(gamma=0.0), 400, 100, 5, seed=0, mode="extend")
        assert t.basis_size > 3
        assert t.k.max() <= t.basis_size

    def test_posterior_matches_importance_sampling(self):
        b = path_eigenpairs(6)
        h = Hyperparams(q=1, gamma=0.5, a=2.0, b=1.0)
        data = LabelData(6, [0, 1, 4, 5], [1, 1, 0, 0])
        ref, ess = importance_posterior_mean(data, b, h, 1_000_000, np.random.default_rng(0))
        assert ess > 10_000
        t = run_chain(data, b, h, 40_000, 2_000, 2, seed=5)
        np.testing.assert_allclose(summarize(t).mean, ref, atol=0.02)


class TestBaseline:
    def test_requires_full_basis(self, small_problem):
        _, data = small_problem
        with pytest.raises(ValueError):
            run_baseline_full(data, path_eigenpairs(30, 10), Hyperparams(), 100, 10, 1)

    def test_k_pinned(self, small_problem):
        b, data = small_problem
        t = run_baseline_full(data, b, Hyperparams(), 300, 50, 5, seed=0)
        assert np.all(t.k == 30) and np.all(t.accepted)

    def test_agrees_with_point_mass_chain(self, small_problem):
        # same target, different random streams: compare within Monte Carlo error
        b, data = small_problem
        h = Hyperparams(proposal=ProposalSpec.point_mass())
        base = run_baseline_full(data, b, h, 12_000, 1000, 2, seed=0)
        chain = run_chain(data, b, h, 12_000, 1000, 2, seed=1, k_init=30)
        diff = summarize(base).mean - summarize(chain).mean
        se = np.hypot(batch_means_se(ndtr(base.f)), batch_means_se(ndtr(chain.f)))
        assert np.all(np.abs(diff) <= 4 * se + 1e-3)


class TestSummarize:
    def test_constant_zero(self):
        s = summarize(trace_from(np.zeros((3, 4))))
        np.testing.assert_array_equal(s.mean, 0.5)
        np.testing.assert_array_equal(s.ci_width, 0.0)
        np.testing.assert_array_equal(s.hard, 0)

    def test_two_samples(self):
        f = np.array([[stats.norm.ppf(0.2)], [stats.norm.ppf(0.8)]])
        s = summarize(trace_from(f))
        assert s.mean[0] == pytest.approx(0.5, abs=1e-12)

    def test_quantiles_and_bounds(self):
        f = np.random.default_rng(0).standard_normal((400, 5)) + np.arange(5)
        s = summarize(trace_from(f), level=0.9)
        p = ndtr(f)
        np.testing.assert_allclose(s.lower, np.quantile(p, 0.05, axis=0))
        np.testing.assert_allclose(s.upper, np.quantile(p, 0.95, axis=0))
        assert np.all((0 <= s.lower) & (s.lower <= s.mean) & (s.mean <= s.upper) & (s.upper <= 1))

    def test_k_histogram(self):
        t = Trace(np.array([1, 2, 2, 3, 3, 3]), np.ones(6), np.array([1, 1, 0, 1, 0, 0], bool),
                  np.zeros(6, np.int64), np.zeros((2, 2)), 2, 2)
        s = summarize(t)
        np.testing.assert_array_equal(s.k_values, [2, 3])
        np.testing.assert_array_equal(s.k_counts, [1, 3])
        assert s.acceptance_rate == 0.25

    def test_errors(self):
        with pytest.raises(ValueError):
            summarize(trace_from(np.zeros((0, 3))))
        with pytest.raises(ValueError):
            summarize(trace_from(np.zeros((3, 3))), level=1.0)


class TestAccuracy:
    def summary(self, hard):
        hard = np.asarray(hard)
        z = np.zeros(len(hard))
        return PosteriorSummary(z, z, z, hard, np.array([1]), np.array([1]), 0.5)

    def test_perfect_and_wrong(self):
        y = np.array([0, 1, 1, 0])
        assert accuracy(self.summary(y), y, [0, 1, 2, 3]) == 1.0
        assert accuracy(self.summary(1 - y), y, [0, 1, 2, 3]) == 0.0

    def test_coin(self):
        rng = np.random.default_rng(0)
        pred, truth = rng.integers(0, 2, 10_000), rng.integers(0, 2, 10_000)
        assert abs(accuracy(pred, truth, np.arange(10_000)) - 0.5) < 0.015

    def test_label_data_truth(self):
        truth = LabelData(4, [1, 3], [1, 0])
        assert accuracy(self.summary([0, 1, 0, 1]), truth, [1, 3]) == 0.5
        with pytest.raises(ValueError):
            accuracy(self.summary([0, 1, 0, 1]), truth, [0])

    def test_empty(self):
        with pytest.raises(ValueError):
            accuracy(self.summary([0, 1]), [0, 1], [])
