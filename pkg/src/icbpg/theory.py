"""Executable rate bounds and the worst-case recurrence simulator.

The convergence analysis reduces to a scalar recurrence: nonnegative,
non-increasing A_l with A_{l+1}^2 / gamma <= A_l - A_{l+1} + Delta_{l+1}.
This module evaluates the closed-form bounds for that recurrence (constant
and 1/k^2 error sequences), lifts them to the full objective-gap bounds
and cycle-count estimates, and simulates the extremal sequence that meets
the recurrence with equality to stress-test the bounds numerically.

A note on the constant-error bound: its first branch can drop below the
trivially valid level min(A0, u) when A0 < u = sqrt(Delta * gamma). The
derivation covers that regime only through the observation that A_k <= u
once the shifted sequence turns nonpositive, so the displayed formula by
itself is not a valid bound there. ``floor_completed=True`` adds the
min(A0, u) floor, which is exactly what the derivation establishes; the
default evaluates the displayed formula verbatim.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

GRID_GAMMAS = (1.0, 10.0, 100.0)
GRID_LEVELS = (0.0, 1e-4, 1e-2)
GRID_A0S = (0.1, 1.0, 10.0)

GRID_COLUMNS = ("gamma", "Delta_or_D", "A0", "k", "A_k", "bound", "margin",
                "case_counts")


@dataclass
class RateConstants:
    """Derived constants of the rate bounds, bundled for reporting.

    gamma drives the recurrence; u is the fixed-error floor sqrt(Delta *
    gamma); D and D_tilde describe a 1/k^2 tolerance schedule; A0 is the
    initial objective gap.
    """

    gamma: float
    u: float = 0.0
    D: float = 0.0
    D_tilde: float = 0.0
    A0: float = 0.0

    def __post_init__(self):
        for name in ("gamma", "u", "D", "D_tilde", "A0"):
            if getattr(self, name) < 0.0:
                raise ValueError("%s must be nonnegative" % name)
        if self.gamma < 1.0:
            warnings.warn("gamma < 1 is outside the recurrence lemma "
                          "hypotheses", stacklevel=2)

    @classmethod
    def from_problem(cls, p, L_f, L_max, L_min, R, A0, delta=None,
                     D_tilde=None):
        """Derive the bundle from problem-level constants.

        ``delta`` (a constant tolerance) fills in u; ``D_tilde`` (the
        coefficient of a delta_k <= D_tilde / k^2 schedule) fills in D,
        using delta_1 = D_tilde.
        """
        gamma = gamma_constant(p, L_f, L_max, L_min, R)
        u = 0.0
        if delta is not None:
            Delta = recurrence_delta_coefficient(p, L_f, L_max, L_min, R,
                                                 delta) * delta
            u = error_floor(gamma, Delta)
        D = 0.0
        if D_tilde is not None:
            D = D_tilde * recurrence_delta_coefficient(p, L_f, L_max, L_min,
                                                       R, D_tilde)
        return cls(gamma=gamma, u=u, D=D, D_tilde=D_tilde or 0.0, A0=A0)


def gamma_constant(p, L_f, L_max, L_min, R):
    """gamma = 8 p (L_f + L_max)^2 R^2 / L_min."""
    if R <= 0.0:
        raise ValueError("radius must be positive")
    return 8.0 * p * (L_f + L_max) ** 2 * R ** 2 / L_min


def recurrence_delta_coefficient(p, L_f, L_max, L_min, R, delta1):
    """Coefficient of delta_{k+1} in the recurrence inequality."""
    if R <= 0.0:
        raise ValueError("radius must be positive")
    ratio = (R * math.sqrt(2.0) + math.sqrt(p * delta1)) / ((L_f + L_max) * R)
    return L_min * (3.0 * p + 0.25 * L_max ** 2 * ratio ** 2)


def error_floor(gamma, Delta):
    """u = sqrt(Delta * gamma), the floor of the constant-error bound."""
    return math.sqrt(Delta * gamma)


def lemma_bound_fixed(gamma, Delta, A0, k, floor_completed=False):
    """Bound on A_k for a constant error sequence, valid for k >= 2.

    Accepts a scalar or array k. See the module docstring for the meaning
    of ``floor_completed``.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 2):
        raise ValueError("constant-error bound needs k >= 2")
    u = error_floor(gamma, Delta)
    denom = A0 + 3.0 * u
    if denom == 0.0:
        first = np.full_like(k, u)
    else:
        first = 4.0 * gamma * (A0 - u) / ((k - 1.0) * denom) + u
    geometric = 0.5 ** ((k - 1.0) / 2.0) * A0
    bound = np.maximum(first, geometric)
    if floor_completed:
        bound = np.maximum(bound, min(A0, u))
    return float(bound) if bound.ndim == 0 else bound


def lemma_bound_decreasing(gamma, D, A0, k):
    """Bound on A_k when Delta_l <= D / l^2, valid for k >= 4."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 4):
        raise ValueError("decreasing-error bound needs k >= 4")
    bound = np.maximum.reduce([
        16.0 * gamma / (k - 3.0),
        8.0 * math.sqrt(D * gamma) / (k - 3.0),
        0.5 ** ((k - 1.0) / 2.0) * A0,
    ])
    return float(bound) if bound.ndim == 0 else bound


def theorem_fixed_bound(p, L_f, L_max, L_min, R, delta, F0_gap, k,
                        floor_completed=False):
    """Objective-gap bound after k cycles under a constant tolerance."""
    gamma = gamma_constant(p, L_f, L_max, L_min, R)
    Delta = recurrence_delta_coefficient(p, L_f, L_max, L_min, R, delta) * delta
    return lemma_bound_fixed(gamma, Delta, F0_gap, k,
                             floor_completed=floor_completed)


def corollary_fixed_K(p, L_f, L_max, L_min, R, delta, F0_gap, eps):
    """Cycles guaranteeing gap <= eps under a constant tolerance.

    Requires eps above the error floor u; below it the bound never reaches
    eps and the request is rejected.
    """
    gamma = gamma_constant(p, L_f, L_max, L_min, R)
    Delta = recurrence_delta_coefficient(p, L_f, L_max, L_min, R, delta) * delta
    u = error_floor(gamma, Delta)
    if eps <= u:
        raise ValueError("target below error floor (eps=%g, floor=%g)"
                         % (eps, u))
    if F0_gap <= 0.0:
        return 2
    geometric = 2.0 / math.log(2.0) * math.log(F0_gap / eps)
    rate = 4.0 * gamma * (F0_gap - u) / ((eps - u) * (F0_gap + 3.0 * u))
    return 1 + math.ceil(max(geometric, rate))


def theorem_decreasing_bound(p, L_f, L_max, L_min, R, D_tilde, delta1,
                             F0_gap, k):
    """Objective-gap bound after k cycles when delta_l <= D_tilde / l^2."""
    gamma = gamma_constant(p, L_f, L_max, L_min, R)
    D = D_tilde * recurrence_delta_coefficient(p, L_f, L_max, L_min, R,
                                               delta1)
    return lemma_bound_decreasing(gamma, D, F0_gap, k)


def corollary_decreasing_K(p, L_f, L_max, L_min, R, D_tilde, delta1, F0_gap,
                           eps):
    """Cycles guaranteeing gap <= eps when delta_l <= D_tilde / l^2."""
    if eps <= 0.0:
        raise ValueError("target must be positive")
    gamma = gamma_constant(p, L_f, L_max, L_min, R)
    D = D_tilde * recurrence_delta_coefficient(p, L_f, L_max, L_min, R,
                                               delta1)
    branches = [3.0 + 16.0 * gamma / eps,
                3.0 + 8.0 * math.sqrt(D * gamma) / eps]
    if F0_gap > 0.0:
        branches.append(1.0 + 2.0 / math.log(2.0) * math.log(F0_gap / eps))
    return math.ceil(max(branches))


def simulate_worst_case(gamma, delta_seq, A0, K):
    """Extremal sequence meeting the recurrence with equality.

    ``delta_seq`` supplies Delta_1..Delta_K (an array-like, or a callable
    of the 1-based index). Each step takes the positive root t of
    t^2 / gamma + t = A_l + Delta_{l+1}, clipped to A_l so the sequence
    stays non-increasing as the recurrence's hypotheses require; without
    the clip a large Delta would push the sequence upward and outside the
    hypothesis class. Returns A_0..A_K.
    """
    if A0 < 0.0:
        raise ValueError("A0 must be nonnegative")
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    if gamma < 1.0:
        warnings.warn("gamma < 1 is outside the recurrence lemma hypotheses; "
                      "simulating anyway", stacklevel=2)
    if callable(delta_seq):
        deltas = np.array([delta_seq(l) for l in range(1, K + 1)], dtype=float)
    else:
        deltas = np.asarray(delta_seq, dtype=float)
        if deltas.shape[0] < K:
            raise ValueError("need %d tolerance values, got %d"
                             % (K, deltas.shape[0]))
        deltas = deltas[:K]
    if np.any(deltas < 0.0):
        raise ValueError("tolerances must be nonnegative")
    if np.any(np.diff(deltas) > 0.0):
        raise ValueError("tolerances must be non-increasing")
    A = np.empty(K + 1)
    A[0] = A0
    for l in range(K):
        s = A[l] + deltas[l]
        # Stable evaluation of the positive root of t^2/gamma + t - s = 0.
        root = 2.0 * s / (1.0 + math.sqrt(1.0 + 4.0 * s / gamma))
        A[l + 1] = min(A[l], root)
    return A


def classify_recurrence_steps(A, deltas, gamma):
    """Count step types of a recurrence sequence.

    Steps with ratio A_{l+1}/A_l at most 1/2 are geometric; the remaining
    slow steps split by whether Delta_{l+1} / (A_l A_{l+1}) reaches the
    1/(4 gamma) threshold. Steps from A_l = 0 are counted separately.
    """
    A = np.asarray(A, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    counts = {"geometric": 0, "slow_small": 0, "slow_large": 0, "zero": 0}
    for l in range(A.shape[0] - 1):
        if A[l] == 0.0:
            counts["zero"] += 1
            continue
        ratio = A[l + 1] / A[l]
        if ratio <= 0.5:
            counts["geometric"] += 1
            continue
        if A[l + 1] == 0.0:
            thresh = math.inf if deltas[l] > 0.0 else 0.0
        else:
            thresh = deltas[l] / (A[l] * A[l + 1])
        if thresh >= 1.0 / (4.0 * gamma):
            counts["slow_large"] += 1
        else:
            counts["slow_small"] += 1
    return counts


def _format_counts(counts):
    return ";".join("%s:%d" % (name, counts[name])
                    for name in ("geometric", "slow_small", "slow_large",
                                 "zero"))


class GridCell:
    """Worst margin of one (gamma, level, A0) cell of the domination sweep."""

    def __init__(self, kind, gamma, level, A0, k, A_k, bound, margin,
                 counts, floored):
        self.kind = kind
        self.gamma = gamma
        self.level = level
        self.A0 = A0
        self.k = k
        self.A_k = A_k
        self.bound = bound
        self.margin = margin
        self.counts = counts
        self.floored = floored

    def row(self):
        return [repr(self.gamma), repr(self.level), repr(self.A0), self.k,
                repr(self.A_k), repr(self.bound), repr(self.margin),
                _format_counts(self.counts)]


def worst_case_grid(kind, gammas=GRID_GAMMAS, levels=GRID_LEVELS,
                    A0s=GRID_A0S, horizon=10_000):
    """Sweep the simulator over a parameter grid against the lemma bound.

    ``kind`` selects the constant-error bound ("fixed", checked for
    k >= 2) or the 1/l^2 bound ("decreasing", checked for k >= 4, with
    Delta_l = level / l^2). Each cell reports the admissible k with the
    smallest margin bound - A_k. Constant-error cells with A0 below the
    error floor u are checked against the floor-completed bound and
    flagged, since the displayed formula is not valid there.
    """
    if kind not in ("fixed", "decreasing"):
        raise ValueError("kind must be 'fixed' or 'decreasing'")
    k_min = 2 if kind == "fixed" else 4
    cells = []
    for gamma in gammas:
        for level in levels:
            for A0 in A0s:
                if kind == "fixed":
                    deltas = np.full(horizon, level)
                else:
                    deltas = level / np.arange(1.0, horizon + 1.0) ** 2
                A = simulate_worst_case(gamma, deltas, A0, horizon)
                ks = np.arange(k_min, horizon + 1)
                floored = False
                if kind == "fixed":
                    u = error_floor(gamma, level)
                    floored = A0 < u
                    bounds = lemma_bound_fixed(gamma, level, A0, ks,
                                               floor_completed=floored)
                else:
                    bounds = lemma_bound_decreasing(gamma, level, A0, ks)
                margins = bounds - A[k_min:]
                worst = int(np.argmin(margins))
                counts = classify_recurrence_steps(A, deltas, gamma)
                cells.append(GridCell(
                    kind=kind, gamma=gamma, level=level, A0=A0,
                    k=int(ks[worst]), A_k=float(A[k_min + worst]),
                    bound=float(bounds[worst]), margin=float(margins[worst]),
                    counts=counts, floored=floored))
    return cells


def write_grid_csv(cells, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_COLUMNS)
        for cell in cells:
            writer.writerow(cell.row())
