"""Expected loss = intrinsic noise + bias + variance, with the gap reported.

Every decomposition returns all four quantities plus the additivity gap
(expected loss minus the sum of the three terms). The gap is never silently
asserted to vanish: for divergences that admit an additive decomposition it
sits at float noise, and for counterexample losses its magnitude is the
measurement of interest.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    Domain,
    LossFunction,
    WeightedEnsemble,
    pair_expectation,
    side_expectation,
)
from .divergences import GBregmanDivergence, Generator
from .centroids import (
    brute_force_centroid,
    constrained_central_label,
    constrained_central_prediction,
    f_mean_prediction,
    g_mean_label,
)

TERM_FLOOR = -1e-10


@dataclass(frozen=True)
class DecompositionReport:
    expected_loss: float
    intrinsic_noise: float
    bias: float
    variance: float
    gap: float
    central_label: np.ndarray
    central_prediction: np.ndarray
    multipliers: np.ndarray | None = None
    method: str = "generic"

    def to_json(self) -> dict:
        return {
            "expected_loss": self.expected_loss,
            "intrinsic_noise": self.intrinsic_noise,
            "bias": self.bias,
            "variance": self.variance,
            "gap": self.gap,
            "central_label": np.asarray(self.central_label).tolist(),
            "central_prediction": np.asarray(self.central_prediction).tolist(),
            "multipliers": None
            if self.multipliers is None
            else np.asarray(self.multipliers).tolist(),
            "method": self.method,
        }


def _gap(expected: float, noise: float, bias: float, variance: float) -> float:
    return expected - noise - bias - variance


def _check_terms(**terms: float):
    for name, value in terms.items():
        if value < TERM_FLOOR:
            raise ArithmeticError(f"{name} = {value:.3e} is significantly negative")


def decompose_generic(
    loss: LossFunction,
    labels: WeightedEnsemble,
    preds: WeightedEnsemble,
    domain: Domain | None = None,
) -> DecompositionReport:
    """Decompose any loss using brute-force centroids.

    Works for arbitrary losses; the gap is reported as-is and is nonzero in
    general (that is the point for non-divergence losses such as L1).
    """
    domain = domain or loss.domain
    t_star = brute_force_centroid(loss, labels, "second_arg", domain)
    y_star = brute_force_centroid(loss, preds, "first_arg", domain)
    expected = pair_expectation(loss, labels, preds)
    noise = t_star.objective
    bias = loss.eval(t_star.point, y_star.point)
    variance = y_star.objective
    _check_terms(intrinsic_noise=noise, bias=bias, variance=variance)
    return DecompositionReport(
        expected_loss=expected,
        intrinsic_noise=noise,
        bias=bias,
        variance=variance,
        gap=_gap(expected, noise, bias, variance),
        central_label=t_star.point,
        central_prediction=y_star.point,
        multipliers=None,
        method="brute_force",
    )


def decompose_gbregman(
    div: GBregmanDivergence,
    labels: WeightedEnsemble,
    preds: WeightedEnsemble,
) -> DecompositionReport:
    """Closed-form decomposition for a g-Bregman divergence without
    equality constraints.

    Intrinsic noise and variance come from the potentials directly:
    noise = E A(g(T)) - A(g(t*)), variance = E B(f(Y)) - B(f(y*)), with the
    g-mean label t* and f-mean prediction y*.
    """
    if div.domain.n_constraints:
        raise ValueError(
            "domain has equality constraints; use decompose_constrained_bregman"
        )
    B, f = div.dual_pair()
    t_star = g_mean_label(div, labels)
    y_star = f_mean_prediction(div, preds)

    a_vals = div.gen.value(div.map.forward(labels.points))
    noise = float(labels.weights @ a_vals - div.gen.value(div.map.forward(t_star.point)))
    b_vals = B.value(f.forward(preds.points))
    variance = float(preds.weights @ b_vals - B.value(f.forward(y_star.point)))
    bias = div.eval(t_star.point, y_star.point)
    expected = pair_expectation(div, labels, preds)
    _check_terms(intrinsic_noise=noise, bias=bias, variance=variance)
    return DecompositionReport(
        expected_loss=expected,
        intrinsic_noise=noise,
        bias=bias,
        variance=variance,
        gap=_gap(expected, noise, bias, variance),
        central_label=t_star.point,
        central_prediction=y_star.point,
        multipliers=None,
        method="closed_form",
    )


def decompose_constrained_bregman(
    div: GBregmanDivergence,
    labels: WeightedEnsemble,
    preds: WeightedEnsemble,
    domain: Domain | None = None,
) -> DecompositionReport:
    """Decomposition under linear equality constraints W y = b.

    Standard Bregman divergences (identity map) keep the label mean
    feasible automatically; the central prediction picks up Lagrange
    multipliers and the variance a lam . b correction. Reverse Bregman
    divergences (identity dual map) mirror the roles. Anything else falls
    back to the brute-force oracle with a warning, since the transformed
    feasible set need not be convex.
    """
    domain = domain or div.domain
    if domain.n_constraints == 0:
        raise ValueError("domain has no equality constraints; use decompose_gbregman")
    B, f = div.dual_pair()

    if div.map_is_identity:
        y_star = constrained_central_prediction(div, preds, domain)
        lam = y_star.multipliers
        t_bar = np.einsum("k,kd->d", labels.weights, labels.points)
        if not domain.contains(t_bar):
            raise ValueError(f"label mean {t_bar} is infeasible for the domain")
        a_vals = div.gen.value(labels.points)
        noise = float(labels.weights @ a_vals - div.gen.value(t_bar))
        b_vals = B.value(f.forward(preds.points))
        variance = float(
            lam @ domain.eq_rhs
            + preds.weights @ b_vals
            - B.value(f.forward(y_star.point))
        )
        bias = div.eval(t_bar, y_star.point)
        central_label, central_pred = t_bar, y_star.point
    elif div.dual_map_is_identity:
        t_star = constrained_central_label(div, labels, domain)
        lam = t_star.multipliers
        y_bar = np.einsum("k,kd->d", preds.weights, preds.points)
        if not domain.contains(y_bar):
            raise ValueError(f"prediction mean {y_bar} is infeasible for the domain")
        a_vals = div.gen.value(div.map.forward(labels.points))
        noise = float(
            labels.weights @ a_vals
            - div.gen.value(div.map.forward(t_star.point))
            + lam @ domain.eq_rhs
        )
        b_vals = B.value(preds.points)
        variance = float(preds.weights @ b_vals - B.value(y_bar))
        bias = div.eval(t_star.point, y_bar)
        central_label, central_pred = t_star.point, y_bar
    else:
        warnings.warn(
            "neither coordinate map is the identity; the constrained problem "
            "may be nonconvex -- falling back to brute-force centroids",
            stacklevel=2,
        )
        return decompose_generic(div, labels, preds, domain)

    expected = pair_expectation(div, labels, preds)
    _check_terms(intrinsic_noise=noise, bias=bias, variance=variance)
    return DecompositionReport(
        expected_loss=expected,
        intrinsic_noise=noise,
        bias=bias,
        variance=variance,
        gap=_gap(expected, noise, bias, variance),
        central_label=central_label,
        central_prediction=central_pred,
        multipliers=lam,
        method="lagrange",
    )


def ordering_violation_gap(
    div: GBregmanDivergence,
    labels: WeightedEnsemble,
    preds: WeightedEnsemble,
    swap: tuple[str, ...] = (),
) -> float:
    """Additivity gap when chosen terms have their arguments interchanged.

    ``swap`` lists any of "noise", "bias", "variance". With nothing swapped
    this equals the ordinary decomposition gap (zero up to float noise);
    swapping any term breaks additivity for asymmetric divergences while
    symmetric ones cannot tell the difference.
    """
    unknown = set(swap) - {"noise", "bias", "variance"}
    if unknown:
        raise ValueError(f"unknown swap terms {sorted(unknown)}")
    t_star = g_mean_label(div, labels).point
    y_star = f_mean_prediction(div, preds).point
    expected = pair_expectation(div, labels, preds)
    if "noise" in swap:
        noise = side_expectation(div, t_star, labels, point_side="first_arg")
    else:
        noise = side_expectation(div, t_star, labels, point_side="second_arg")
    bias = div.eval(y_star, t_star) if "bias" in swap else div.eval(t_star, y_star)
    if "variance" in swap:
        variance = side_expectation(div, y_star, preds, point_side="second_arg")
    else:
        variance = side_expectation(div, y_star, preds, point_side="first_arg")
    return _gap(expected, noise, bias, variance)


def gaussian_log_partition() -> Generator:
    """Log-partition of the univariate Gaussian in natural parameters.

    Natural parameters are (m/s, -1/(2s)) for mean m and variance s; the
    value includes all additive constants so that
    -log density = -theta . (z, z^2) + value(theta) exactly.
    """

    def value(u):
        u = np.asarray(u, dtype=float)
        u1, u2 = u[..., 0], u[..., 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return -(u1**2) / (4.0 * u2) - 0.5 * np.log(-u2 / np.pi)

    def gradient(u):
        u = np.asarray(u, dtype=float)
        u1, u2 = u[..., 0], u[..., 1]
        return np.stack([-u1 / (2.0 * u2), u1**2 / (4.0 * u2**2) - 0.5 / u2], axis=-1)

    def hessian(u):
        u1, u2 = float(u[0]), float(u[1])
        return np.array(
            [
                [-0.5 / u2, 0.5 * u1 / u2**2],
                [0.5 * u1 / u2**2, -0.5 * u1**2 / u2**3 + 0.5 / u2**2],
            ]
        )

    return Generator(value=value, gradient=gradient, hessian=hessian)


def gaussian_sufficient_stat(z: float) -> np.ndarray:
    return np.array([float(z), float(z) ** 2])


def exp_family_loglik_decompose(
    log_partition: Generator,
    z,
    canonical_preds: WeightedEnsemble,
    sufficient_stat=gaussian_sufficient_stat,
    log_base_measure=None,
) -> DecompositionReport:
    """Bias-variance split of the expected negative log-likelihood.

    Predictions are natural parameters of an exponential family with the
    given log-partition; the observation enters through its sufficient
    statistic. The central parameter is the ensemble mean of the natural
    parameters (equivalently, the normalized geometric mean of the
    predicted densities), giving

        E[-log p(z; theta)] = -log p(z; theta*) + (E B(theta) - B(theta*))

    exactly, for every observation. The first term is the bias and may be
    negative (a log density is not a nonnegative loss); the second is the
    variance and is nonnegative by convexity. All additive constants are
    kept so the two terms sum to the expected loss to float precision.
    """
    phi = np.asarray(sufficient_stat(z), dtype=float)
    log_h = 0.0 if log_base_measure is None else float(log_base_measure(z))
    theta = canonical_preds.points
    w = canonical_preds.weights
    b_vals = np.asarray(log_partition.value(theta), dtype=float)
    if not np.all(np.isfinite(b_vals)):
        raise ValueError("log-partition is not finite at some predicted parameter")
    theta_star = np.einsum("k,kd->d", w, theta)
    b_star = float(log_partition.value(theta_star))
    if not np.isfinite(b_star):
        raise ValueError(f"log-partition is not finite at the central parameter {theta_star}")

    nll = -(theta @ phi) + b_vals - log_h
    expected = float(w @ nll)
    bias = float(-(theta_star @ phi) + b_star - log_h)
    variance = float(w @ b_vals - b_star)
    noise = 0.0
    if variance < TERM_FLOOR:
        raise ArithmeticError(f"variance = {variance:.3e} is significantly negative")
    return DecompositionReport(
        expected_loss=expected,
        intrinsic_noise=noise,
        bias=bias,
        variance=variance,
        gap=_gap(expected, noise, bias, variance),
        central_label=phi,
        central_prediction=theta_star,
        multipliers=None,
        method="exp_family",
    )
