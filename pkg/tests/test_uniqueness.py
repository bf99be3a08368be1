"""Tests for mixed-derivative separability and the empirical classifier."""

import numpy as np
import pytest

from bvd import catalog
from bvd.uniqueness import (
    ClassifierConfig,
    UnreliableHessianError,
    classify_loss,
    mixed_hessian_fd,
    separability_rank_test,
)

from conftest import random_spd, sample_points


def minkowski_mixed(eps, t, y):
    """Analytic d2/(dy dt) of |t - y|^eps in one dimension."""
    return -eps * (eps - 1.0) * abs(t - y) ** (eps - 2.0)


class TestMixedHessianFixtures:
    def test_squared_error_constant(self, rng):
        loss = catalog("sq_euclidean", dim=1)
        for _ in range(5):
            t, y = rng.uniform(-3, 3, 2)
            s = mixed_hessian_fd(loss, [t], [y])
            assert s.matrix[0, 0] == pytest.approx(-2.0, rel=1e-6)
            assert s.reliable

    def test_kl_diagonal(self):
        loss = catalog("kl", dim=2)
        s = mixed_hessian_fd(loss, [0.3, 0.7], [0.5, 0.5])
        np.testing.assert_allclose(s.matrix, np.diag([-2.0, -2.0]), atol=2e-6)
        assert s.reliable

    def test_minkowski_interior_point(self):
        loss = catalog("minkowski", epsilon=1.5, dim=1)
        s = mixed_hessian_fd(loss, [0.0], [2.0])
        want = minkowski_mixed(1.5, 0.0, 2.0)
        assert want == pytest.approx(-0.530330, abs=1e-6)
        assert s.matrix[0, 0] == pytest.approx(want, rel=1e-5)

    def test_fd_matches_analytic_forms(self, rng):
        # Squared error, forward KL, and Minkowski interior points all have
        # closed-form mixed derivatives to compare against.
        kl = catalog("kl", dim=2)
        for _ in range(5):
            t = rng.uniform(0.2, 0.8, 2)
            y = rng.uniform(0.2, 0.8, 2)
            s = mixed_hessian_fd(kl, t, y)
            np.testing.assert_allclose(s.matrix, np.diag(-1.0 / y), rtol=1e-5)
        mk = catalog("minkowski", epsilon=1.5, dim=1)
        for _ in range(5):
            t = rng.uniform(-3, 0, 1)
            y = rng.uniform(1, 3, 1)
            s = mixed_hessian_fd(mk, t, y)
            assert s.matrix[0, 0] == pytest.approx(
                minkowski_mixed(1.5, t[0], y[0]), rel=1e-5
            )

    def test_mahalanobis_constant_minus_two_k(self, rng):
        K = random_spd(rng, 2)
        loss = catalog("mahalanobis", K=K)
        for _ in range(5):
            t = rng.uniform(-3, 3, 2)
            y = rng.uniform(-3, 3, 2)
            s = mixed_hessian_fd(loss, t, y)
            np.testing.assert_allclose(s.matrix, -2.0 * K, atol=1e-6)

    def test_near_kink_flagged_unreliable(self):
        loss = catalog("minkowski", epsilon=1.5, dim=1)
        s = mixed_hessian_fd(loss, [0.0], [2.5e-4], step=1e-4)
        assert not s.reliable

    def test_stencil_leaving_domain_rejected(self):
        loss = catalog("kl", dim=2)
        with pytest.raises(ValueError, match="stencil"):
            mixed_hessian_fd(loss, [0.5, 0.5], [1.0, 0.5])

    def test_bad_step_rejected(self):
        loss = catalog("sq_euclidean", dim=1)
        with pytest.raises(ValueError, match="step"):
            mixed_hessian_fd(loss, [0.0], [1.0], step=0.0)


class TestSeparability:
    def test_sq_euclidean_rank_d(self, rng):
        loss = catalog("sq_euclidean", dim=2)
        grids = rng.uniform(-3, 3, (2, 5, 2))
        v = separability_rank_test(loss, grids[0], grids[1])
        assert v.separable and v.numerical_rank <= 2

    def test_kl_rank_d_with_tiny_tail(self, rng):
        loss = catalog("kl", dim=2)
        label_grid = rng.uniform(0.15, 0.85, (5, 2))
        pred_grid = rng.uniform(0.15, 0.85, (5, 2))
        v = separability_rank_test(loss, label_grid, pred_grid)
        assert v.separable
        sv = v.singular_values
        assert sv[2] / sv[0] < 1e-8

    def test_minkowski_determinant_witness(self):
        loss = catalog("minkowski", epsilon=1.5, dim=1)
        v = separability_rank_test(loss, [[0.0], [1.0]], [[2.0], [4.0]])
        assert not v.separable
        assert v.witness is not None
        want = (
            minkowski_mixed(1.5, 0.0, 2.0) * minkowski_mixed(1.5, 1.0, 4.0)
            - minkowski_mixed(1.5, 0.0, 4.0) * minkowski_mixed(1.5, 1.0, 2.0)
        )
        assert want == pytest.approx(-0.0516103, abs=1e-6)
        assert v.witness["determinant"] == pytest.approx(want, abs=1e-3)

    def test_sign_structure_in_one_dimension(self, rng):
        # Scalar mixed derivative of a divergence is strictly negative on
        # the interior: it equals -g'(t) f'(y) with both maps monotone.
        for name in ("sq_euclidean", "kl", "reverse_kl", "alpha", "bernoulli_kl"):
            if name == "bernoulli_kl":
                loss = catalog(name)
            elif name == "alpha":
                loss = catalog(name, alpha=0.5, dim=1)
            else:
                loss = catalog(name, dim=1)
            T = sample_points(name, rng, 6, 1)
            Y = sample_points(name, rng, 6, 1)
            for t, y in zip(T, Y):
                s = mixed_hessian_fd(loss, t, y)
                assert s.matrix[0, 0] < 0, name

    def test_grid_too_small_rejected(self):
        loss = catalog("sq_euclidean", dim=2)
        with pytest.raises(ValueError, match="at least"):
            separability_rank_test(loss, [[0.0, 0.0]], [[1.0, 1.0]])

    def test_unreliable_grid_withholds_verdict(self):
        # Grids straddling the L1 kink produce divergent stencils.
        loss = catalog("l1", dim=1)
        pts = np.linspace(0.0, 1e-3, 6)[:, None]
        with pytest.raises(UnreliableHessianError, match="withheld"):
            separability_rank_test(loss, pts, pts, step=1e-4)


class TestClassifier:
    def test_kl_consistent(self):
        result = classify_loss(catalog("kl", dim=2), ClassifierConfig(seed=3))
        assert result.verdict == "consistent_with_gbregman"
        assert result.evidence["separability"]
        assert all(s["separable"] for s in result.evidence["separability"])

    def test_l1_not_gbregman_via_gap(self):
        result = classify_loss(catalog("l1", dim=1), ClassifierConfig(seed=3))
        assert result.verdict == "not_gbregman"
        gaps = [g["gap"] for g in result.evidence["gap_search"]]
        assert any(abs(g) > 1e-3 for g in gaps)

    def test_minkowski_not_gbregman_via_determinant(self):
        result = classify_loss(
            catalog("minkowski", epsilon=1.5, dim=1), ClassifierConfig(seed=3)
        )
        assert result.verdict == "not_gbregman"
        non_separable = [
            s for s in result.evidence["separability"] if not s["separable"]
        ]
        assert non_separable and non_separable[0]["witness"] is not None

    def test_zero_one_grid_not_gbregman(self):
        result = classify_loss(
            catalog("zero_one_grid", dim=1, levels=2),
            ClassifierConfig(seed=5, n_separability_trials=0),
        )
        assert result.verdict == "not_gbregman"

    def test_verdict_is_reproducible(self):
        loss = catalog("minkowski", epsilon=1.5, dim=1)
        a = classify_loss(loss, ClassifierConfig(seed=9))
        b = classify_loss(loss, ClassifierConfig(seed=9))
        assert a.to_json() == b.to_json()

    def test_evidence_carries_seeds_and_sizes(self):
        result = classify_loss(catalog("kl", dim=1), ClassifierConfig(seed=42))
        ev = result.evidence
        assert ev["seed"] == 42
        assert "grid_size" in ev and "gap_threshold" in ev
