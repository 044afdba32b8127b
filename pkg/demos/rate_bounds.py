# The convergence guarantees, checked against their own worst case. An
# adversarial gap sequence meets the one-cycle recurrence with equality
# at every step; the closed-form bounds must dominate it everywhere. A
# constant inner tolerance leaves an error floor u = sqrt(Delta * gamma);
# a tolerance decreasing like 1/k^2 removes the floor entirely.
import numpy as np

from icbpg.theory import (
    RateConstants,
    corollary_decreasing_K,
    corollary_fixed_K,
    error_floor,
    gamma_constant,
    lemma_bound_decreasing,
    lemma_bound_fixed,
    simulate_worst_case,
    worst_case_grid,
)

gamma = 25.0
A0 = 1.0

# Constant tolerance: the adversary sinks to the floor and stays there.
Delta = 0.01
u = error_floor(gamma, Delta)
K = 4000
A = simulate_worst_case(gamma, np.full(K, Delta), A0, K)
ks = np.array([2, 10, 100, 1000, 4000])
bounds = lemma_bound_fixed(gamma, Delta, A0, ks)
print("gamma = %g, constant Delta = %g, floor u = %g" % (gamma, Delta, u))
print("    k      worst case        bound")
for k, bd in zip(ks, bounds):
    print("%5d   %.6e   %.6e" % (k, A[k], bd))
print("floor reached: A_4000 / u = %.4f" % (A[-1] / u))

# Decreasing tolerance 1/l^2: same gamma, no floor.
D = 0.01
deltas = D / np.arange(1.0, K + 1.0) ** 2
A_dec = simulate_worst_case(gamma, deltas, A0, K)
ks_dec = np.array([4, 10, 100, 1000, 4000])
bounds_dec = lemma_bound_decreasing(gamma, D, A0, ks_dec)
print("\ndecreasing Delta_l = %g / l^2" % D)
print("    k      worst case        bound")
for k, bd in zip(ks_dec, bounds_dec):
    print("%5d   %.6e   %.6e" % (k, A_dec[k], bd))

# Below the floor the displayed constant-tolerance formula stops being
# a bound (its main branch collapses); the floor-completed variant
# patches it with max(bound, min(A0, u)).
g2, D2, A02 = 100.0, 1.0, 0.1
u2 = error_floor(g2, D2)
A2 = simulate_worst_case(g2, np.full(4, D2), A02, 4)
print("\nstart below the floor: gamma=%g Delta=%g A0=%g (u=%g)"
      % (g2, D2, A02, u2))
print("  true worst case A_2        %.6f" % A2[2])
print("  verbatim bound at k=2      %.6f   (invalid: below A_2)"
      % lemma_bound_fixed(g2, D2, A02, 2))
print("  floor-completed bound      %.6f"
      % lemma_bound_fixed(g2, D2, A02, 2, floor_completed=True))

# Cycle counts that guarantee a target accuracy, from problem-level
# constants (p blocks, global/blockwise smoothness, radius R).
p, L_f, L_max, L_min, R = 4, 4.0, 1.0, 1.0, 1.0
delta_fix = 1e-8
consts = RateConstants.from_problem(p, L_f, L_max, L_min, R, A0=A0,
                                    delta=delta_fix, D_tilde=1.0)
print("\nproblem constants: gamma = %.1f, fixed-tolerance floor u = %.4g"
      % (consts.gamma, consts.u))
eps = 0.05
K_fix = corollary_fixed_K(p, L_f, L_max, L_min, R, delta_fix, A0, eps)
K_dec = corollary_decreasing_K(p, L_f, L_max, L_min, R, 1.0, 1.0, A0, eps)
print("cycles guaranteeing gap <= %g:  fixed delta=%g: %d   1/k^2: %d"
      % (eps, delta_fix, K_fix, K_dec))
gam = gamma_constant(p, L_f, L_max, L_min, R)
A_chk = simulate_worst_case(gam, np.full(K_fix + 1, delta_fix), A0, K_fix + 1)
print("worst case at the guaranteed K: %.4e <= %g (holds: %s)"
      % (A_chk[K_fix], eps, A_chk[K_fix] <= eps))

# Sweep a (gamma, level, A0) grid; the smallest margin over a 10000-step
# horizon stays nonnegative in every cell.
for kind in ("fixed", "decreasing"):
    cells = worst_case_grid(kind, horizon=2000)
    worst = min(cells, key=lambda c: c.margin)
    floored = sum(c.floored for c in cells)
    print("\n%s grid: %d cells, worst margin %.3e "
          "(gamma=%g level=%g A0=%g at k=%d), %d floor-completed"
          % (kind, len(cells), worst.margin, worst.gamma, worst.level,
             worst.A0, worst.k, floored))
