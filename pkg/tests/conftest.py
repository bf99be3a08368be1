"""Shared helpers: catalog entry construction and random ensemble sampling.

Sampling boxes keep points well inside each divergence's domain so that
closed-form means stay feasible and log/power evaluations stay clear of
boundaries.
"""

import numpy as np
import pytest

from bvd import catalog, make_ensemble


def random_spd(rng, d, lo=0.5, hi=2.0):
    """Symmetric positive definite matrix with eigenvalues in [lo, hi]."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return Q @ np.diag(rng.uniform(lo, hi, d)) @ Q.T


def make_entry(name, d, rng=None, alpha=0.5):
    """Catalog entry of the requested dimension (random K for mahalanobis)."""
    if name == "sq_euclidean":
        return catalog("sq_euclidean", dim=d)
    if name == "mahalanobis":
        rng = rng or np.random.default_rng(7)
        return catalog("mahalanobis", K=random_spd(rng, d))
    if name == "kl":
        return catalog("kl", dim=d)
    if name == "reverse_kl":
        return catalog("reverse_kl", dim=d)
    if name == "alpha":
        return catalog("alpha", alpha=alpha, dim=d)
    if name == "gaussian_canonical":
        assert d == 2
        return catalog("gaussian_canonical")
    if name == "bernoulli_kl":
        assert d == 1
        return catalog("bernoulli_kl")
    raise ValueError(name)


def sample_points(name, rng, n, d):
    if name in ("kl", "reverse_kl", "alpha", "bernoulli_kl"):
        return rng.uniform(0.1, 0.9, (n, d))
    if name in ("sq_euclidean", "mahalanobis"):
        return rng.uniform(-3.0, 3.0, (n, d))
    if name == "gaussian_canonical":
        m = rng.uniform(-1.0, 1.0, (n, 1))
        s = rng.uniform(0.3, 2.5, (n, 1))
        return np.hstack([m, s])
    raise ValueError(name)


def sample_ensemble(name, rng, n, d):
    return make_ensemble(sample_points(name, rng, n, d), rng.random(n) + 0.1)


def sample_simplex_ensemble(rng, n, d):
    P = rng.uniform(0.1, 0.9, (n, d))
    P = P / P.sum(axis=1, keepdims=True)
    return make_ensemble(P, rng.random(n) + 0.1)


# Divergence family names with the dimensions they support in tests.
GBREGMAN_FAMILIES = [
    ("sq_euclidean", (1, 2, 3)),
    ("mahalanobis", (1, 2, 3)),
    ("kl", (1, 2, 3)),
    ("reverse_kl", (1, 2, 3)),
    ("alpha", (1, 2, 3)),
    ("gaussian_canonical", (2,)),
    ("bernoulli_kl", (1,)),
]


def all_entries(rng=None):
    """One representative instance per family (largest supported dim)."""
    rng = rng or np.random.default_rng(11)
    out = []
    for name, dims in GBREGMAN_FAMILIES:
        out.append((name, dims[-1] if name != "mahalanobis" else 2, None))
    return [(n, d, make_entry(n, d, rng)) for n, d, _ in out]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
