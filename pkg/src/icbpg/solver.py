"""Cyclic block proximal descent with inexact block updates.

The driver sweeps the blocks in order. Under the Gram metric each block
update approximately solves the block's l1 least-squares subproblem,
accepting any point whose duality gap is at most the cycle's tolerance;
under the identity metric the update is the closed-form soft-threshold
step. Warm-starting every subproblem at the current block value makes the
full objective non-increasing regardless of the tolerance.

Per-cycle diagnostics record the sufficient decrease slacks (block and
full) and, when a reference optimum and a radius surrogate are supplied,
the slack of the squared-gap recurrence inequality that drives the rate
analysis.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import theory
from .prox import exact_prox_l1
from .subsolver import MAX_INNER_DEFAULT, LassoSubproblem, box_gp_solve

#: Header of the per-cycle trace CSV.
TRACE_COLUMNS = ("cycle", "delta_k", "F_value", "gap_to_ref", "cpu_cycle_s",
                 "cpu_total_s", "inner_iters_total", "mondec_violations")


class ToleranceSchedule:
    """Non-increasing error tolerances, indexed from cycle 1."""

    def __init__(self, kind, value=0.0, values=None):
        if kind not in ("fixed", "inverse_square", "custom"):
            raise ValueError("unknown schedule kind %r" % (kind,))
        self.kind = kind
        self.value = float(value)
        self.values = None
        if kind == "custom":
            if not values:
                raise ValueError("custom schedule needs at least one value")
            vals = [float(v) for v in values]
            if any(v < 0.0 for v in vals):
                raise ValueError("tolerances must be nonnegative")
            if any(b > a for a, b in zip(vals, vals[1:])):
                raise ValueError("tolerances must be non-increasing")
            self.values = vals
        elif self.value < 0.0:
            raise ValueError("tolerances must be nonnegative")

    @classmethod
    def fixed(cls, delta):
        return cls("fixed", delta)

    @classmethod
    def inverse_square(cls, d_tilde):
        """delta_k = d_tilde / k**2."""
        return cls("inverse_square", d_tilde)

    @classmethod
    def custom(cls, values):
        return cls("custom", values=values)

    def delta_at(self, k):
        if k < 1:
            raise ValueError("tolerance index starts at 1, got %r" % (k,))
        if self.kind == "fixed":
            return self.value
        if self.kind == "inverse_square":
            return self.value / float(k) ** 2
        # Custom lists extend by their final value, staying non-increasing.
        return self.values[min(k, len(self.values)) - 1]

    @property
    def label(self):
        if self.kind == "fixed":
            return "fixed:%g" % self.value
        if self.kind == "inverse_square":
            return "inv2:%g" % self.value
        return "custom"

    def __repr__(self):
        return "ToleranceSchedule(%s)" % self.label


@dataclass
class SolverConfig:
    schedule: ToleranceSchedule
    max_cycles: int = 1000
    target_gap: float = None
    reference_value: float = None
    rel_change_tol: float = None
    r_surrogate: float = None
    diagnostics: bool = True
    record_block_steps: bool = False
    max_inner: int = MAX_INNER_DEFAULT
    stop_on_stall: bool = True
    refresh_every: int = 50
    deterministic: bool = True

    def __post_init__(self):
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")
        if self.target_gap is not None and self.reference_value is None:
            raise ValueError("target_gap stopping needs a reference value")


@dataclass
class BlockStepRecord:
    cycle: int
    block: int
    F_before: float
    F_after: float
    step_norm: float
    delta: float
    inner_iterations: int
    duality_gap: float
    slack: float
    mondec_violation: bool


@dataclass
class CycleRecord:
    k: int
    delta: float
    F_value: float
    gap_to_ref: float
    cpu_cycle_s: float
    cpu_total_s: float
    inner_iters_total: int
    mondec_violations: int
    step_norm_B: float
    slack_full: float
    recurrence_slack: float


@dataclass
class RunRecord:
    config: SolverConfig
    schedule_label: str
    F0: float
    cycles: list = field(default_factory=list)
    block_steps: list = field(default_factory=list)
    x_final: np.ndarray = None
    termination_reason: str = ""

    @property
    def F_final(self):
        return self.cycles[-1].F_value if self.cycles else self.F0

    @property
    def total_cpu_s(self):
        return self.cycles[-1].cpu_total_s if self.cycles else 0.0

    def objective_values(self):
        """F(x^k) for k = 0..K as an array (index 0 is the start point)."""
        return np.array([self.F0] + [c.F_value for c in self.cycles])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for c in self.cycles:
                gap = "" if c.gap_to_ref is None else repr(c.gap_to_ref)
                writer.writerow([c.k, repr(c.delta), repr(c.F_value), gap,
                                 repr(c.cpu_cycle_s), repr(c.cpu_total_s),
                                 c.inner_iters_total, c.mondec_violations])


def check_sufficient_decrease_block(F_before, F_after, step_norm, L_i, delta):
    """Slack of the per-block decrease inequality; nonnegative in theory."""
    return 3.0 * L_i * delta + F_before - F_after - 0.25 * L_i * step_norm ** 2


def check_sufficient_decrease_full(F_k, F_next, step_norm_B, L_min, p, delta):
    """Slack of the full-cycle decrease inequality; nonnegative in theory."""
    return (3.0 * L_min * p * delta + F_k - F_next
            - 0.25 * L_min * step_norm_B ** 2)


def check_recurrence(F_k, F_next, F_star, r_surrogate, L_min, L_max, L_f, p,
                     delta1, delta):
    """Slack of the squared-gap recurrence inequality at one cycle.

    Returns F(x^k) - F(x^{k+1}) + C * delta - (F(x^{k+1}) - F*)^2 / gamma,
    which the analysis guarantees to be nonnegative when ``r_surrogate``
    is a true bound on the iterates' metric distance to the optimal set.
    """
    if r_surrogate == 0.0:
        raise ValueError("radius surrogate must be positive")
    gamma = theory.gamma_constant(p, L_f, L_max, L_min, r_surrogate)
    coeff = theory.recurrence_delta_coefficient(p, L_f, L_max, L_min,
                                                r_surrogate, delta1)
    return F_k - F_next + coeff * delta - (F_next - F_star) ** 2 / gamma


def run(problem, x0, config):
    """Execute the cyclic method from x0 under the given configuration.

    Cycle k (0-indexed) consumes the schedule value for index k + 1 and
    produces the iterate x^{k+1}; its record stores the objective after the
    cycle. Stops on reaching the target gap, on a relative objective change
    below threshold, on a stall (no block moved and the tolerance is not
    decreasing, so subsequent cycles would repeat exactly), or at the cycle
    cap.
    """
    x = np.array(x0, dtype=float).ravel().copy()
    if x.shape != (problem.n,):
        raise ValueError("x0 has shape %r, expected (%d,)"
                         % (np.shape(x0), problem.n))
    res = problem.residual(x)
    pen_total = problem.penalty_value(x)
    smooth = 0.5 * float(res @ res)
    F = smooth + pen_total
    record = RunRecord(config=config, schedule_label=config.schedule.label,
                       F0=F)

    use_recurrence = (config.diagnostics
                      and config.reference_value is not None
                      and config.r_surrogate is not None)
    delta1 = config.schedule.delta_at(1)
    cpu_total = 0.0
    reason = "max_cycles"

    for k in range(config.max_cycles):
        delta = config.schedule.delta_at(k + 1)
        t0 = time.process_time()
        F_start = F
        moved_sq = 0.0
        inner_total = 0
        violations = 0

        for i in range(problem.p):
            blk = problem.blocks[i]
            sl = problem.partition.slice_of(i)
            xi = x[sl]
            F_before = F
            smooth_before = smooth
            if blk.metric.kind == "identity":
                g = blk.A_block.T @ res
                y = exact_prox_l1(xi, g, blk.lam_i, blk.L_i)
                inner = 0
                gap = 0.0
                guard_ok = True
            else:
                b_tilde = blk.A_block @ xi - res
                sub = LassoSubproblem(blk.A_block, b_tilde, blk.lam_i,
                                      L_sub=blk.L_sub)
                tol = 1e-12 * (1.0 + abs(smooth_before))

                def guard(yv, sm, _limit=smooth_before + tol):
                    return sm <= _limit

                out = box_gp_solve(sub, xi, delta, f_guard=guard,
                                   max_inner=config.max_inner)
                y = out.y
                inner = out.inner_iterations
                gap = out.duality_gap
                guard_ok = out.f_decrease_satisfied

            dy = y - xi
            if np.any(dy != 0.0):
                old_l1 = float(np.sum(np.abs(xi)))
                rdelta = blk.A_block @ dy
                res += rdelta
                x[sl] = y
                pen_total += blk.lam_i * (float(np.sum(np.abs(y))) - old_l1)
                smooth = 0.5 * float(res @ res)
                F = smooth + pen_total
                if blk.metric.kind == "identity":
                    step_norm = float(np.linalg.norm(dy))
                    guard_ok = smooth <= smooth_before + 1e-12 * (
                        1.0 + abs(smooth_before))
                else:
                    step_norm = float(np.linalg.norm(rdelta))
            else:
                step_norm = 0.0
            if not guard_ok:
                violations += 1
            moved_sq += step_norm ** 2
            inner_total += inner
            if config.record_block_steps:
                slack = check_sufficient_decrease_block(
                    F_before, F, step_norm, blk.L_i, delta)
                record.block_steps.append(BlockStepRecord(
                    cycle=k, block=i, F_before=F_before, F_after=F,
                    step_norm=step_norm, delta=delta,
                    inner_iterations=inner, duality_gap=gap, slack=slack,
                    mondec_violation=not guard_ok))

        if config.refresh_every and (k + 1) % config.refresh_every == 0:
            res = problem.residual(x)
            pen_total = problem.penalty_value(x)
            smooth = 0.5 * float(res @ res)
            F = smooth + pen_total

        cpu = time.process_time() - t0
        cpu_total += cpu
        gap_ref = None
        if config.reference_value is not None:
            gap_ref = F - config.reference_value
        slack_full = None
        rec_slack = None
        if config.diagnostics:
            slack_full = check_sufficient_decrease_full(
                F_start, F, np.sqrt(moved_sq), problem.L_min, problem.p,
                delta)
            if use_recurrence:
                rec_slack = check_recurrence(
                    F_start, F, config.reference_value, config.r_surrogate,
                    problem.L_min, problem.L_max, problem.L_f, problem.p,
                    delta1, delta)
        record.cycles.append(CycleRecord(
            k=k, delta=delta, F_value=F, gap_to_ref=gap_ref,
            cpu_cycle_s=cpu, cpu_total_s=cpu_total,
            inner_iters_total=inner_total, mondec_violations=violations,
            step_norm_B=float(np.sqrt(moved_sq)), slack_full=slack_full,
            recurrence_slack=rec_slack))

        if (config.target_gap is not None and gap_ref is not None
                and gap_ref <= config.target_gap):
            reason = "target"
            break
        if (config.rel_change_tol is not None
                and abs(F_start - F) <= config.rel_change_tol * (1.0 + abs(F))):
            reason = "rel_change"
            break
        if (config.stop_on_stall and moved_sq == 0.0
                and config.schedule.delta_at(k + 2) >= delta):
            reason = "stalled"
            break

    record.x_final = x
    record.termination_reason = reason
    return record
