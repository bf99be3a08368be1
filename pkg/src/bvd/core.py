"""Shared domain types: points, weighted ensembles, feasible domains, losses.

Points are plain 1-D numpy arrays. Distributions of labels and predictions
are finite weighted point sets (:class:`WeightedEnsemble`); every quantity
downstream is an expectation over such a set, so no continuous-measure
machinery is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Absolute feasibility tolerance (infinity norm) for box bounds and linear
# equality constraints.
FEASIBILITY_TOL = 1e-10

# Weights must sum to one within this tolerance after normalization.
WEIGHT_TOL = 1e-12


class BoundaryError(ValueError):
    """Evaluation hit the boundary of a divergence's domain (e.g. log of 0)."""


class ConvexityError(ArithmeticError):
    """A divergence evaluated significantly below zero."""


class ConvergenceError(RuntimeError):
    """An iterative solve (Newton, bisection) failed to converge."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class InfeasibleMeanError(ValueError):
    """A closed-form mean fell outside the domain; use a constrained solver."""


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and return ``x`` as a finite 1-D float array."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1 or p.size < 1:
        raise ValueError(f"a point must be a 1-D vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"point has non-finite coordinates: {p}")
    if dim is not None and p.size != dim:
        raise ValueError(f"expected dimension {dim}, got {p.size}")
    return p


@dataclass(frozen=True)
class Domain:
    """Feasible set: box bounds plus optional linear equality constraints.

    A point ``y`` is feasible iff ``lower - tol <= y <= upper + tol``
    coordinatewise and ``|eq_lhs @ y - eq_rhs|_inf <= tol``. Bounds are
    treated as closed; strict-interior requirements (positive coordinates
    for logarithms, positive variances) are enforced by the evaluators
    themselves, which raise :class:`BoundaryError`.
    """

    dim: int
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    eq_lhs: np.ndarray | None = None
    eq_rhs: np.ndarray | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for name in ("lower", "upper"):
            b = getattr(self, name)
            if b is not None:
                b = np.asarray(b, dtype=float)
                if b.shape != (self.dim,):
                    raise ValueError(f"{name} must have shape ({self.dim},)")
                object.__setattr__(self, name, b)
        if (self.eq_lhs is None) != (self.eq_rhs is None):
            raise ValueError("eq_lhs and eq_rhs must be given together")
        if self.eq_lhs is not None:
            W = np.atleast_2d(np.asarray(self.eq_lhs, dtype=float))
            b = np.atleast_1d(np.asarray(self.eq_rhs, dtype=float))
            if W.shape[1] != self.dim or W.shape[0] != b.size:
                raise ValueError("equality constraint shapes inconsistent")
            if W.shape[0] > self.dim:
                raise ValueError("more equality constraints than dimensions")
            if np.linalg.matrix_rank(W) < W.shape[0]:
                raise ValueError("eq_lhs must have full row rank")
            object.__setattr__(self, "eq_lhs", W)
            object.__setattr__(self, "eq_rhs", b)

    @property
    def n_constraints(self) -> int:
        return 0 if self.eq_lhs is None else self.eq_lhs.shape[0]

    @property
    def is_bounded(self) -> bool:
        return (
            self.lower is not None
            and self.upper is not None
            and bool(np.all(np.isfinite(self.lower)))
            and bool(np.all(np.isfinite(self.upper)))
        )

    def contains(self, y, tol: float = FEASIBILITY_TOL) -> bool:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,) or not np.all(np.isfinite(y)):
            return False
        if self.lower is not None and np.any(y < self.lower - tol):
            return False
        if self.upper is not None and np.any(y > self.upper + tol):
            return False
        if self.eq_lhs is not None:
            if np.max(np.abs(self.eq_lhs @ y - self.eq_rhs)) > tol:
                return False
        return True

    def require(self, y, what: str = "point") -> np.ndarray:
        y = as_point(y, self.dim)
        if not self.contains(y):
            raise ValueError(f"{what} {y} is infeasible for this domain")
        return y

    def without_equalities(self) -> "Domain":
        return Domain(self.dim, self.lower, self.upper)

    @staticmethod
    def box(lower, upper) -> "Domain":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or np.any(lower > upper):
            raise ValueError("invalid box bounds")
        return Domain(lower.size, lower, upper)

    @staticmethod
    def unit_box(dim: int) -> "Domain":
        return Domain.box(np.zeros(dim), np.ones(dim))

    @staticmethod
    def simplex(dim: int) -> "Domain":
        """Probability simplex: the unit box plus a sum-to-one constraint."""
        return Domain(
            dim,
            lower=np.zeros(dim),
            upper=np.ones(dim),
            eq_lhs=np.ones((1, dim)),
            eq_rhs=np.ones(1),
        )

    def to_json(self) -> dict:
        out: dict = {"dim": self.dim}
        if self.lower is not None:
            out["lower"] = self.lower.tolist()
        if self.upper is not None:
            out["upper"] = self.upper.tolist()
        if self.eq_lhs is not None:
            out["eq"] = {"W": self.eq_lhs.tolist(), "b": self.eq_rhs.tolist()}
        return out

    @staticmethod
    def from_json(obj: dict) -> "Domain":
        eq = obj.get("eq")
        return Domain(
            dim=int(obj["dim"]),
            lower=None if obj.get("lower") is None else np.asarray(obj["lower"], float),
            upper=None if obj.get("upper") is None else np.asarray(obj["upper"], float),
            eq_lhs=None if eq is None else np.asarray(eq["W"], float),
            eq_rhs=None if eq is None else np.asarray(eq["b"], float),
        )


@dataclass(frozen=True)
class WeightedEnsemble:
    """Finite discrete distribution over points in d-dimensional space.

    ``points`` has shape (n, d) and ``weights`` shape (n,) with nonnegative
    entries summing to one. Use :func:`make_ensemble` to construct with
    normalization.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a non-empty (n, d) array")
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must match the number of points")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("non-finite input")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must sum to 1; use make_ensemble to normalize")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return expectation(self, fn)

    def to_json(self) -> dict:
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    @staticmethod
    def from_json(obj: dict) -> "WeightedEnsemble":
        return make_ensemble(obj["points"], obj["weights"])


def make_ensemble(points, weights) -> WeightedEnsemble:
    """Build a :class:`WeightedEnsemble`, renormalizing the weights.

    ``points`` is a sequence of equal-length coordinate vectors (scalars are
    treated as 1-D points); ``weights`` are nonnegative and not all zero.
    """
    pts = [as_point(p) for p in points]
    if not pts:
        raise ValueError("at least one point is required")
    dim = pts[0].size
    for p in pts:
        if p.size != dim:
            raise ValueError(f"dimension mismatch: expected {dim}, got {p.size}")
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size != len(pts):
        raise ValueError("points and weights must have equal length")
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite weight")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights must not be all zero")
    if abs(total - 1.0) > WEIGHT_TOL:
        w = w / total
    return WeightedEnsemble(np.stack(pts), w)


def expectation(ens: WeightedEnsemble, fn: Callable[[np.ndarray], np.ndarray]):
    """Weighted mean of ``fn`` over the ensemble's support.

    ``fn`` maps a single point to a scalar or vector; it must be finite at
    every support point. Summation runs in support order so results are
    bit-reproducible.
    """
    with np.errstate(all="ignore"):
        values = [np.asarray(fn(p), dtype=float) for p in ens.points]
    for p, v in zip(ens.points, values):
        if not np.all(np.isfinite(v)):
            raise ValueError(f"fn is non-finite at support point {p}")
    acc = ens.weights[0] * values[0]
    for w, v in zip(ens.weights[1:], values[1:]):
        acc = acc + w * v
    if acc.ndim == 0:
        return float(acc)
    return acc


class LossFunction:
    """A nonnegative loss ``eval(label, prediction)`` on a common domain.

    Subclasses implement :meth:`eval_batch`, vectorized over leading axes;
    non-finite outputs there signal boundary trouble without raising, which
    lets grid searches mask bad points. The scalar :meth:`eval` path
    validates feasibility and raises instead.
    """

    def __init__(self, dim: int, domain: Domain, name: str = "loss"):
        if domain.dim != dim:
            raise ValueError("domain dimension mismatch")
        self.dim = dim
        self.domain = domain
        self.name = name

    # Losses that are non-smooth where any t_i == y_i (absolute-value style
    # kinks); finite-difference stencils must keep clear of the diagonal.
    has_diagonal_kinks: bool = False

    def eval_batch(self, T: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eval(self, t, y) -> float:
        t = self.domain.require(t, "label")
        y = self.domain.require(y, "prediction")
        with np.errstate(all="ignore"):
            v = float(self.eval_batch(t, y))
        if not np.isfinite(v):
            raise BoundaryError(
                f"{self.name} is not finite at label={t}, prediction={y}"
            )
        return v

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, dim={self.dim})"


class CallableLoss(LossFunction):
    """Wrap a plain ``(t, y) -> value`` function as a :class:`LossFunction`."""

    def __init__(self, dim, domain, fn, name="loss", has_diagonal_kinks=False):
        super().__init__(dim, domain, name)
        self._fn = fn
        self.has_diagonal_kinks = has_diagonal_kinks

    def eval_batch(self, T, Y):
        return self._fn(np.asarray(T, float), np.asarray(Y, float))


def pair_expectation(
    loss: LossFunction, labels: WeightedEnsemble, preds: WeightedEnsemble
) -> float:
    """E over independent (label, prediction) pairs of the loss.

    Evaluates the full support product in one vectorized call; the reduction
    order is fixed, so repeated runs agree to the last bit.
    """
    T = labels.points[:, None, :]  # (nt, 1, d)
    Y = preds.points[None, :, :]  # (1, ny, d)
    with np.errstate(all="ignore"):
        values = loss.eval_batch(
            np.broadcast_to(T, (labels.size, preds.size, labels.dim)),
            np.broadcast_to(Y, (labels.size, preds.size, preds.dim)),
        )
    if not np.all(np.isfinite(values)):
        raise BoundaryError(f"{loss.name} is not finite on the support product")
    w = labels.weights[:, None] * preds.weights[None, :]
    return float(np.sum(w * values))


def side_expectation(
    loss: LossFunction, point: np.ndarray, ens: WeightedEnsemble, point_side: str
) -> float:
    """E over the ensemble of loss(point, .) or loss(., point)."""
    P = np.broadcast_to(point, (ens.size, ens.dim))
    with np.errstate(all="ignore"):
        if point_side == "first_arg":
            values = loss.eval_batch(P, ens.points)
        elif point_side == "second_arg":
            values = loss.eval_batch(ens.points, P)
        else:
            raise ValueError("point_side must be 'first_arg' or 'second_arg'")
    if not np.all(np.isfinite(values)):
        raise BoundaryError(f"{loss.name} is not finite on the ensemble support")
    return float(np.sum(ens.weights * values))
