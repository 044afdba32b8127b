"""Inexact pre-conditioned proximal maps and membership certificates.

The central object is the query

    min_y  <g, y> + 0.5 ||y - x||_B^2 + psi(y)

for an SPD metric B and a convex regularizer psi. A point u belongs to
the delta-inexact proximal set when its objective value is within delta
of the minimum. Membership can be decided two independent ways:

* primal: compare the objective value at u against a high-accuracy
  reference minimum (``prox_value_gap``);
* dual: construct a subgradient witness (delta', v) with
  v - g - B(u - x) an eps-subgradient of psi at u and
  ||v||_B* <= sqrt(2 (delta - delta')) (``certify_second_prox`` and
  ``certify_second_prox_refined``).

The cheap constructor fixes delta' = 0 and projects onto the exact
subdifferential; it is sufficient but not necessary. The refined
constructor optimizes the witness over eps-subgradients by solving a
small box-constrained quadratic; for the l1 regularizer its optimal
certificate value equals the primal value gap exactly (strong duality),
so the two membership routes agree up to solver tolerances.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._kernels import box_qp_cd, l1_quad_cd
from .problem import L1Regularizer, SpdMetric, soft_threshold

__all__ = [
    "ProxQuery", "ProxCertificate", "DeltaSubgradientWitness",
    "soft_threshold", "exact_prox_l1", "prox_value", "prox_value_gap",
    "prox_reference_min", "certify_second_prox", "certify_second_prox_refined",
    "check_certificate", "delta_optimality_check", "rockafellar_membership",
    "gradient_error_embedding", "lipschitz_bound_rhs",
]


@dataclass
class ProxQuery:
    """One inexact proximal query: center x, linear term g, tolerance delta."""

    x: np.ndarray
    g: np.ndarray
    delta: float
    metric: SpdMetric
    psi: L1Regularizer

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.g = np.asarray(self.g, dtype=float).ravel()
        if self.x.shape != self.g.shape:
            raise ValueError("x and g must have the same length")
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")

    def value(self, y):
        y = np.asarray(y, dtype=float)
        d = y - self.x
        return float(self.g @ y) + 0.5 * self.metric.norm(d) ** 2 + self.psi.value(y)


@dataclass
class ProxCertificate:
    """Subgradient witness for membership in an inexact proximal set.

    ``membership_value`` is 0.5 ||v||_B*^2 + delta'; the witness proves
    membership at every tolerance >= membership_value.
    """

    u: np.ndarray
    v: np.ndarray
    subgrad_residual: np.ndarray
    delta_prime: float
    dual_norm_v: float
    membership_value: float
    feasible: bool
    construction: str = "exact_subgradient"


@dataclass
class DeltaSubgradientWitness:
    """Claimed member s of the delta-subdifferential of psi at x."""

    x: np.ndarray
    s: np.ndarray
    delta: float

    def check(self, psi, ys, tol=1e-9):
        """Verify psi(y) >= psi(x) + <s, y - x> - delta on sample points."""
        px = psi.value(self.x)
        for y in ys:
            y = np.asarray(y, dtype=float)
            lhs = psi.value(y)
            rhs = px + float(self.s @ (y - self.x)) - self.delta
            if lhs < rhs - tol:
                return False
        return True


def exact_prox_l1(x, g, lam, c):
    """Closed-form proximal point for psi = lam ||.||_1 and metric B = c I."""
    if c <= 0.0:
        raise ValueError("metric scale must be positive")
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    return soft_threshold(x - g / c, lam / c)


def prox_value(query, y):
    return query.value(y)


def prox_value_gap(query, u, reference_min):
    """Objective value at u minus an independently computed minimum."""
    return query.value(u) - float(reference_min)


def prox_reference_min(query, tol=None, max_sweeps=200_000):
    """High-accuracy primal solve of the query by coordinate descent.

    Intended for dense, small to moderate metrics. Returns (y_star, value).
    """
    n = query.x.shape[0]
    B = np.ascontiguousarray(query.metric.dense(), dtype=float)
    c = np.ascontiguousarray(query.g - B @ query.x, dtype=float)
    lam = np.full(n, query.psi.lam)
    if tol is None:
        tol = 1e-12 * (1.0 + float(np.max(np.abs(c), initial=0.0)))
    y0 = np.ascontiguousarray(query.x.copy(), dtype=float)
    y, kkt, _ = l1_quad_cd(B, c, lam, y0, tol, max_sweeps)
    return y, query.value(y)


def certify_second_prox(query, u):
    """Witness with delta' = 0 from the exact-subdifferential projection.

    The residual -(g + B(u - x)) is projected componentwise onto the
    subdifferential of psi at u, giving r; the witness is v = r + g +
    B(u - x). Feasible when ||v||_B* <= sqrt(2 delta). Sufficient for
    membership but not necessary: points whose value gap is within delta
    only by way of a positive delta' are not certified by this route.
    """
    u = np.asarray(u, dtype=float)
    w = query.g + query.metric.apply(u - query.x)
    r = query.psi.project_subdifferential(-w, u)
    v = r + w
    dual = query.metric.dual_norm(v)
    membership_value = 0.5 * dual * dual
    feasible = bool(dual <= math.sqrt(2.0 * query.delta))
    return ProxCertificate(u=u, v=v, subgrad_residual=r, delta_prime=0.0,
                           dual_norm_v=dual, membership_value=membership_value,
                           feasible=feasible, construction="exact_subgradient")


def certify_second_prox_refined(query, u, tol=None, max_sweeps=200_000):
    """Witness optimized over eps-subgradients of the l1 regularizer.

    Minimizes 0.5 ||r + g + B(u - x)||_B*^2 + eps(r) over ||r||_inf <= lam,
    where eps(r) = lam ||u||_1 - <r, u> is the smallest slack making r an
    eps-subgradient at u. The minimum equals the primal value gap of u, so
    feasibility of this certificate decides membership exactly.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    lam = query.psi.lam
    B = query.metric.dense()
    w = query.g + B @ u - B @ query.x
    try:
        factor = scipy.linalg.cho_factor(B, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("metric matrix is not positive definite: %s" % exc)
    Binv = scipy.linalg.cho_solve(factor, np.eye(n), check_finite=False)
    Binv = np.ascontiguousarray(0.5 * (Binv + Binv.T))
    c = np.ascontiguousarray(Binv @ w - u)
    if tol is None:
        tol = 1e-13 * (1.0 + float(np.max(np.abs(c), initial=0.0)))
    lo = np.full(n, -lam)
    hi = np.full(n, lam)
    r0 = np.ascontiguousarray(query.psi.project_subdifferential(-w, u))
    r, kkt, _ = box_qp_cd(Binv, c, lo, hi, r0, tol, max_sweeps)
    v = r + w
    dual = query.metric.dual_norm(v)
    delta_prime = query.psi.subgradient_epsilon(r, u)
    membership_value = 0.5 * dual * dual + delta_prime
    feasible = bool(membership_value <= query.delta)
    return ProxCertificate(u=u, v=v, subgrad_residual=r, delta_prime=delta_prime,
                           dual_norm_v=dual, membership_value=membership_value,
                           feasible=feasible, construction="eps_subgradient")


def check_certificate(query, cert, ys=None, n_samples=1000, seed=0, tol=1e-9):
    """Independently re-verify a certificate.

    Checks the norm condition ||v||_B* <= sqrt(2 (delta - delta')) and the
    eps-subgradient inequality of the residual at sampled points. When no
    sample set is given, draws Gaussian points around u and adds the exact
    minimizer together with its coordinate-axis restrictions.
    """
    u = np.asarray(cert.u, dtype=float)
    slack = query.delta - cert.delta_prime
    if cert.dual_norm_v > math.sqrt(2.0 * max(slack, 0.0)) + tol:
        return False
    if ys is None:
        rng = np.random.Generator(np.random.PCG64(seed))
        scale = query.metric.norm(u - query.x) + 1.0
        ys = [u + scale * rng.standard_normal(u.shape[0]) for _ in range(n_samples)]
        y_star, _ = prox_reference_min(query)
        ys.append(y_star)
        for j in range(u.shape[0]):
            axis_point = np.zeros_like(y_star)
            axis_point[j] = y_star[j]
            ys.append(axis_point)
        ys.extend([query.x.copy(), np.zeros_like(u)])
    witness = DeltaSubgradientWitness(x=u, s=np.asarray(cert.subgrad_residual, dtype=float),
                                      delta=cert.delta_prime)
    return witness.check(query.psi, ys, tol=tol)


def delta_optimality_check(value_at_x, min_value, delta):
    """Whether a point's value is within delta of the minimum value."""
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    return bool(value_at_x - min_value <= delta)


def rockafellar_membership(x, delta, u, lam=1.0):
    """Identity-metric membership test from an exact subgradient residual.

    Decides whether some r in the subdifferential of lam ||.||_1 at u has
    ||u + r - x|| <= sqrt(2 delta); the componentwise clamp of x - u onto
    the subdifferential minimizes that norm, so it decides existence.
    Points passing this test lie in the delta-inexact proximal set of x
    (identity metric, zero linear term).
    """
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    norm = rockafellar_residual_norm(x, u, lam)
    return bool(norm <= math.sqrt(2.0 * delta))


def rockafellar_residual_norm(x, u, lam=1.0):
    """min over subgradients r at u of ||u + r - x||, for psi = lam ||.||_1."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    psi = L1Regularizer(lam)
    r = psi.project_subdifferential(x - u, u)
    return float(np.linalg.norm(u + r - x))


def gradient_error_embedding(delta, e_dual_norm):
    """Tolerance at which a perturbed-gradient proximal point still qualifies.

    A delta-inexact proximal point computed with gradient g + e is an
    inexact proximal point for g at the inflated tolerance
    delta + sqrt(2 delta) ||e||_B* + 0.5 ||e||_B*^2.
    """
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    if e_dual_norm < 0.0:
        raise ValueError("error norm must be nonnegative")
    return delta + math.sqrt(2.0 * delta) * e_dual_norm + 0.5 * e_dual_norm ** 2


def lipschitz_bound_rhs(metric, x, y, g, h, delta, eps):
    """Error-dependent continuity bound on two inexact proximal points.

    For u in the delta-set at (x, g) and w in the eps-set at (y, h),
    ||u - w||_B is at most
    ||g - h||_B* + ||y - x||_B + (1 + sqrt(2)/2) (sqrt(delta) + sqrt(eps)).
    """
    if delta < 0.0 or eps < 0.0:
        raise ValueError("tolerances must be nonnegative")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    return (metric.dual_norm(g - h) + metric.norm(y - x)
            + (1.0 + math.sqrt(2.0) / 2.0) * (math.sqrt(delta) + math.sqrt(eps)))
