import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from popcompress import _backend, _lloyd_py
from popcompress.compressors import (
    OracleChannel,
    Quantization,
    c_wstar_estimate,
    codebook_diameter,
    diameter_reg_quantize,
    distortion,
    hessian_kmeans_quantize,
    kmeans_quantize,
    oracle_compress,
    quadratic_distortion,
    rate_estimate,
    reconstruct,
    weighted_cost,
)
from popcompress.errors import DomainError, ParameterError
from popcompress.linreg import (
    Dataset,
    LinearProblem,
    erm_fit,
    sample_dataset,
    sample_problem,
)


def _q(centroids, assignments):
    return Quantization(np.asarray(centroids, float), np.asarray(assignments), 1, 0.0)


def brute_force_cost(w, h, k):
    """Minimum weighted cost over every assignment of points to k labels."""
    labels = np.array(list(itertools.product(range(k), repeat=w.size)))
    total = np.zeros(labels.shape[0])
    for c in range(k):
        m = (labels == c).astype(np.float64)
        sh, shw, shw2 = m @ h, m @ (h * w), m @ (h * w * w)
        with np.errstate(divide="ignore", invalid="ignore"):
            total += np.where(sh > 0, shw2 - shw * shw / sh, 0.0)
    return float(max(total.min(), 0.0))


class TestDistortion:
    fixture = Dataset(np.array([[1.0, -1.0]]), np.array([1.0, -1.0]))

    def test_identity_and_hand_value(self):
        w = erm_fit(self.fixture)
        assert w[0] == pytest.approx(1.0)
        assert distortion(w, w, self.fixture) == 0.0
        assert distortion([0.5], w, self.fixture) == pytest.approx(0.25)
        assert quadratic_distortion([0.5], w, self.fixture) == pytest.approx(0.25)
        assert quadratic_distortion(w, w, self.fixture) == 0.0

    def test_antisymmetry(self):
        ds = sample_dataset(sample_problem(4, 1.0, seed=0), 9, seed=0)
        a, b = np.arange(4.0), -np.ones(4)
        assert distortion(a, b, ds) == -distortion(b, a, ds)

    def test_quadratic_identity_on_erm(self):
        rng = np.random.default_rng(5)
        for i in range(100):
            d = int(rng.integers(1, 12))
            n = d + int(rng.integers(2, 30))
            p = sample_problem(d, float(rng.uniform(0.1, 3)), rng.uniform(0.2, 3, size=d), seed=i)
            ds = sample_dataset(p, n, seed=i)
            w = erm_fit(ds)
            w_hat = w + rng.normal(scale=rng.uniform(0.01, 2), size=d)
            assert quadratic_distortion(w_hat, w, ds) == pytest.approx(
                distortion(w_hat, w, ds), rel=1e-8)

    def test_mismatch(self):
        with pytest.raises(ParameterError):
            distortion([1.0, 2.0], [1.0], self.fixture)


class TestOracle:
    problem = sample_problem(50, 1.0, seed=0)

    def test_alpha_one_returns_wstar(self):
        w = np.random.default_rng(0).standard_normal(50)
        out = oracle_compress(w, self.problem, 80, 50 / 80, seed=3)
        assert out.tobytes() == self.problem.w_star.tobytes()

    def test_channel_fields(self):
        ch = OracleChannel.for_problem(self.problem, 80, 0.3)
        assert ch.alpha == 80 * 0.3 / 50
        np.testing.assert_allclose(ch.noise_scale_diag, (1 - ch.alpha) * 0.3 / 50)
        assert OracleChannel.for_problem(self.problem, 80, 0.625).noise_scale_diag.max() == 0.0

    def test_small_distortion_keeps_w(self):
        w = np.random.default_rng(0).standard_normal(50)
        gaps = [np.linalg.norm(oracle_compress(w, self.problem, 80, dist, seed=1) - w)
                for dist in (1e-3, 1e-6, 1e-9)]
        assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-3

    def test_deterministic(self):
        w = np.zeros(50)
        a = oracle_compress(w, self.problem, 80, 0.3, seed=11)
        b = oracle_compress(w, self.problem, 80, 0.3, seed=11)
        assert a.tobytes() == b.tobytes()

    def test_domain(self):
        with pytest.raises(DomainError):
            oracle_compress(np.zeros(50), self.problem, 80, 0.7)
        with pytest.raises(DomainError):
            oracle_compress(np.zeros(50), self.problem, 80, 0.0)

    @pytest.mark.slow
    def test_mean_distortion_non_identity_covariance(self):
        # nondiagonal-identity Sigma_X: E[d_S] = D still holds
        p = sample_problem(5, 0.8, [0.5, 1.0, 2.0, 4.0, 1.5], seed=1)
        n, target = 12, 0.2
        vals = []
        for seed in range(4000):
            ds = sample_dataset(p, n, seed=seed)
            w = erm_fit(ds)
            vals.append(distortion(oracle_compress(w, p, n, target, seed=seed + 10**6), w, ds))
        vals = np.array(vals)
        assert abs(vals.mean() - target) < 3 * vals.std(ddof=1) / np.sqrt(vals.size)


class TestKMeans:
    def test_examples(self):
        q = kmeans_quantize([1.0, 1.0, -1.0, -1.0], 2, seed=0)
        assert sorted(q.centroids) == [-1.0, 1.0]
        assert q.final_objective == 0.0
        assert kmeans_quantize([0.0, 1.0, 2.0], 1, seed=0).centroids[0] == pytest.approx(1.0)
        for k in (1, 2, 4):
            assert kmeans_quantize(np.full(5, 0.3), k, seed=1).final_objective == 0.0

    def test_invalid_k(self):
        with pytest.raises(ParameterError):
            kmeans_quantize([1.0, 2.0], 3)
        with pytest.raises(ParameterError):
            kmeans_quantize([1.0, 2.0], 0)

    def test_weighted_mean(self):
        q = hessian_kmeans_quantize([0.0, 2.0], [3.0, 1.0], 1, seed=0)
        assert q.centroids[0] == pytest.approx(0.5)

    def test_enumerated_partition(self):
        q = hessian_kmeans_quantize([0.0, 0.0, 10.0], [1.0, 1.0, 1.0], 2, seed=0)
        assert sorted(q.centroids) == [0.0, 10.0] and q.final_objective == 0.0
        assert brute_force_cost(np.array([0.0, 0.0, 10.0]), np.ones(3), 2) == 0.0

    def test_uniform_h_matches_kmeans(self):
        rng = np.random.default_rng(2)
        for seed in range(20):
            w = rng.standard_normal(30)
            a = kmeans_quantize(w, 4, seed=seed)
            b = hessian_kmeans_quantize(w, np.ones(30), 4, seed=seed)
            assert a.centroids.tobytes() == b.centroids.tobytes()
            assert np.array_equal(a.assignments, b.assignments)
            c = hessian_kmeans_quantize(w, np.full(30, 3.0), 4, seed=seed)
            np.testing.assert_allclose(c.centroids, a.centroids, rtol=1e-12)
            assert np.array_equal(c.assignments, a.assignments)

    def test_h_validation(self):
        with pytest.raises(ParameterError):
            hessian_kmeans_quantize([1.0, 2.0], [0.0, 0.0], 1)
        with pytest.raises(ParameterError):
            hessian_kmeans_quantize([1.0, 2.0], [1.0, -1.0], 1)
        with pytest.raises(ParameterError):
            hessian_kmeans_quantize([1.0, 2.0], [1.0], 1)

    def test_zero_importance_points_allowed(self):
        q = hessian_kmeans_quantize([0.0, 1.0, 5.0, 6.0], [1.0, 0.0, 0.0, 1.0], 2, seed=0)
        assert np.isfinite(q.centroids).all()

    def test_final_objective_recomputes(self):
        rng = np.random.default_rng(4)
        for seed in range(50):
            d = int(rng.integers(2, 60))
            w, h = rng.standard_normal(d), rng.random(d)
            k = int(rng.integers(1, min(d, 6) + 1))
            beta = float(rng.choice([0.0, 1.0, 25.0]))
            q = diameter_reg_quantize(w, h, k, beta, seed=seed)
            assert q.final_objective == pytest.approx(
                weighted_cost(w, h, q.centroids, q.assignments), rel=1e-10, abs=1e-300)
            assert q.assignments.min() >= 0 and q.assignments.max() < k
            assert np.all(np.bincount(q.assignments, minlength=k) > 0)

    def test_lloyd_monotone(self):
        rng = np.random.default_rng(7)
        for seed in range(100):
            d = int(rng.integers(2, 80))
            k = int(rng.integers(1, min(d, 8) + 1))
            w = rng.standard_normal(d) * rng.uniform(0.1, 5)
            h = rng.random(d) if seed % 2 else np.ones(d)
            q = hessian_kmeans_quantize(w, h, k, seed=seed)
            hist = q.objective_history
            assert np.all(np.diff(hist) <= 1e-12 * (1 + hist[:-1]))

    def test_assignment_step_optimal(self):
        # exhaustive single-point moves with centroids fixed
        rng = np.random.default_rng(8)
        for _ in range(60):
            d = int(rng.integers(1, 13))
            k = int(rng.integers(1, min(d, 3) + 1))
            w, h = rng.standard_normal(d), rng.random(d) + 0.01
            c = rng.standard_normal(k)
            a = _backend.assign(w, c)
            base = weighted_cost(w, h, c, a)
            for j in range(d):
                for other in range(k):
                    moved = a.copy()
                    moved[j] = other
                    assert weighted_cost(w, h, c, moved) >= base - 1e-12

    def test_small_instances_vs_enumeration(self):
        # Lloyd is a local method: every result must be a fixed point and never
        # beat enumeration; best-of-10 hits the global optimum on almost all instances
        rng = np.random.default_rng(9)
        hits = 0
        trials = 200
        for i in range(trials):
            d = int(rng.integers(2, 11))
            k = int(rng.integers(1, min(d, 3) + 1))
            w, h = rng.standard_normal(d), rng.random(d) + 0.05
            q = hessian_kmeans_quantize(w, h, k, seed=i, restarts=10)
            opt = brute_force_cost(w, h, k)
            assert q.final_objective >= opt * (1 - 1e-12) - 1e-15
            hits += q.final_objective <= opt * (1 + 1e-8) + 1e-12
            np.testing.assert_array_equal(_backend.assign(w, q.centroids), q.assignments)
            for c in range(k):
                m = q.assignments == c
                assert q.centroids[c] == pytest.approx(np.sum(h[m] * w[m]) / h[m].sum(), rel=1e-12)
        assert hits >= 0.95 * trials


class TestDiameterReg:
    def test_beta_zero_bit_identical(self):
        rng = np.random.default_rng(10)
        for seed in range(100):
            d = int(rng.integers(1, 60))
            k = int(rng.integers(1, min(d, 7) + 1))
            w, h = rng.standard_normal(d), rng.random(d)
            a = hessian_kmeans_quantize(w, h, k, seed=seed)
            b = diameter_reg_quantize(w, h, k, 0.0, seed=seed)
            assert a.centroids.tobytes() == b.centroids.tobytes()
            assert a.assignments.tobytes() == b.assignments.tobytes()
            assert a.iterations_run == b.iterations_run
            assert a.final_objective == b.final_objective

    def test_hand_iteration(self):
        q = diameter_reg_quantize([0.0, 2.0], [1.0, 1.0], 2, 0.5, max_iters=1, init=[0.0, 2.0])
        np.testing.assert_allclose(q.centroids, [2 / 3, 4 / 3], rtol=1e-15)
        assert codebook_diameter(q) == pytest.approx(4 / 9)
        q1 = diameter_reg_quantize([0.0, 2.0], [1.0, 1.0], 2, 1.0, max_iters=1, init=[0.0, 2.0])
        np.testing.assert_allclose(q1.centroids, [1.0, 1.0])
        assert codebook_diameter(q1) == 0.0

    def test_signed_gap_monotone_in_beta(self):
        # one step, same init: the signed gap of the pulled pair shrinks as beta grows
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = int(rng.integers(4, 40))
            w, h = rng.standard_normal(d), rng.random(d) + 0.1
            init = np.sort(rng.choice(w, 3, replace=False))
            prev_gap = math.inf
            for beta in (0.0, 0.1, 1.0, 5.0, 50.0):
                c = diameter_reg_quantize(w, h, 3, beta, max_iters=1, init=init).centroids
                gap = c[2] - c[0]
                assert gap <= prev_gap + 1e-12
                prev_gap = gap

    def test_diameter_monotone_before_crossing(self):
        w, h = np.array([0.0, 2.0]), np.ones(2)
        diams = [codebook_diameter(diameter_reg_quantize(w, h, 2, b, max_iters=1, init=[0.0, 2.0]))
                 for b in (0.0, 0.25, 0.5, 0.75, 1.0)]
        assert np.all(np.diff(diams) <= 0)

    def test_large_beta_overshoots(self):
        # past the crossing point a single pull swaps the pair and the diameter grows again
        q = diameter_reg_quantize([0.0, 2.0], [1.0, 1.0], 2, 3.0, max_iters=1, init=[0.0, 2.0])
        np.testing.assert_allclose(q.centroids, [1.5, 0.5])
        assert codebook_diameter(q) == pytest.approx(1.0)

    def test_converged_diameter_shrinks(self):
        rng = np.random.default_rng(12)
        w = np.concatenate([rng.normal(-1, 0.2, 25), rng.normal(1, 0.2, 25)])
        h = np.ones(50)
        diams = [diameter_reg_quantize(w, h, 2, b, seed=0).diameter for b in (0, 1, 10, 100)]
        assert np.all(np.diff(diams) <= 0)


class TestReconstructAndRate:
    def test_reconstruct(self):
        np.testing.assert_array_equal(reconstruct(_q([-1.0, 1.0], [0, 0, 1, 1])), [-1, -1, 1, 1])
        r = reconstruct(_q([0.7], [0, 0, 0]))
        assert np.all(r == 0.7)

    def test_requantize_fixed_point(self):
        rng = np.random.default_rng(13)
        w, h = rng.standard_normal(40), rng.random(40)
        q = hessian_kmeans_quantize(w, h, 5, seed=0)
        again = hessian_kmeans_quantize(reconstruct(q), h, 5, init=q.centroids)
        assert again.centroids.tobytes() == q.centroids.tobytes()
        assert np.array_equal(again.assignments, q.assignments)

    def test_rate_values(self):
        assert rate_estimate(_q([1.0, 2.0], [0, 0, 0, 0]), 4) == 0.0
        assert rate_estimate(_q([1.0, 2.0], [0, 0, 1, 1]), 4) == pytest.approx(4 * math.log(2))
        q = _q(np.arange(3.0), np.repeat(np.arange(3), 4))
        assert rate_estimate(q, 12) == pytest.approx(12 * math.log(3), rel=1e-14)
        assert rate_estimate(q, 12, mode="log_k") == 12 * math.log(3)

    @settings(max_examples=100)
    @given(st.lists(st.integers(0, 4), min_size=1, max_size=40))
    def test_rate_bounded(self, labels):
        q = _q(np.arange(5.0), labels)
        assert 0.0 <= rate_estimate(q) <= len(labels) * math.log(5)

    def test_diameter(self):
        assert codebook_diameter(_q([0.0, 2.0], [0, 1])) == 4.0
        assert codebook_diameter(_q([3.0], [0])) == 0.0
        assert codebook_diameter(_q([-1.0, 0.0, 3.0], [0, 1, 2])) == 16.0

    def test_c_wstar(self):
        ws = np.array([1.0, -1.0])
        assert c_wstar_estimate(ws, ws) == 0.0
        assert c_wstar_estimate(ws + 1, ws) == pytest.approx(2.0)
        u = np.array([0.3, -2.0])
        for t in (0.5, 2.0, -3.0):
            assert c_wstar_estimate(ws + t * u, ws) == pytest.approx(t * t * (u @ u))


def test_backend_agreement():
    from popcompress import _lloyd_py

    rng = np.random.default_rng(14)
    for _ in range(200):
        d = int(rng.integers(1, 50))
        k = int(rng.integers(1, min(d, 6) + 1))
        w = np.round(rng.standard_normal(d), 1)
        h = rng.random(d) * (rng.random(d) > 0.2)
        h[0] = 1.0
        init = rng.choice(w, k)
        beta = float(rng.choice([0.0, 0.5, 10.0]))
        reg = bool(rng.integers(2))
        a = _backend.run_lloyd(w, h, init, beta, 30, reg)
        b = _lloyd_py.run_lloyd(w, h, init, beta, 30, reg)
        assert a[0].tobytes() == b[0].tobytes()
        assert np.array_equal(a[1], b[1])
        assert a[2] == b[2]
        assert a[3].tobytes() == b[3].tobytes()
