# One block update of the cyclic method, dissected: freeze all other
# blocks, build the block's lasso subproblem, and solve it by projected
# gradient on the nonnegative split until the duality gap certifies the
# requested accuracy. The gap is a computable overestimate of the true
# suboptimality, so stopping on it is safe at any tolerance.
import numpy as np
import scipy.sparse

from icbpg.blocks import BlockPartition
from icbpg.problem import CompositeProblem
from icbpg.subsolver import box_gp_solve, build_subproblem, duality_gap

rng = np.random.Generator(np.random.PCG64(3))
m, n, p = 60, 24, 4
A = scipy.sparse.csc_matrix(rng.standard_normal((m, n)) / np.sqrt(m))
b = rng.standard_normal(m)
b /= np.linalg.norm(b)
prob = CompositeProblem(A, b, BlockPartition.near_equal(n, p), 0.1,
                        metric_kind="gram")

# Current outer iterate: a few cheap cycles away from zero would do;
# here just a random sparse point.
x = np.where(rng.random(n) < 0.4, rng.standard_normal(n), 0.0)
residual = prob.residual(x)
i = 2
sub = build_subproblem(prob, x, residual, i)
y0 = x[prob.blocks[i].cols]
print("block %d, %d columns, curvature bound L = %.4f"
      % (i, len(y0), sub.L_sub))
print("objective at warm start   %.10f" % sub.value(y0))
print("duality gap at warm start %.3e" % duality_gap(sub, y0))

# Tighten the tolerance: inner work grows, the certified gap shrinks.
print("\n  delta     inner  certified gap   subproblem value")
for delta in (1e-2, 1e-4, 1e-8, 0.0):
    res = box_gp_solve(sub, y0, delta, record_trace=True)
    print("%8.0e   %5d     %.3e    %.12f"
          % (delta, res.inner_iterations, res.duality_gap, sub.value(res.y)))

# The traced objective is monotone: each inner iterate is at least as
# good as the one before, so interrupting early never loses ground.
res = box_gp_solve(sub, y0, 1e-8, record_trace=True)
drops = np.diff(res.objective_trace)
print("\ninner objective monotone:  %s (worst step %+0.1e)"
      % (bool(np.all(drops <= 1e-12)), drops.max()))

# Warm starting at the previous answer certifies immediately.
res2 = box_gp_solve(sub, res.y, 1e-8)
print("restart from the answer:   %d inner iterations, gap %.1e"
      % (res2.inner_iterations, res2.duality_gap))

# The subproblem is the block's proximal query in disguise: the two
# objectives differ by a constant only.
from icbpg.problem import L1Regularizer
from icbpg.prox import ProxQuery
from icbpg.subsolver import prox_equivalence_constant

blk = prob.blocks[i]
query = ProxQuery(x=y0, g=prob.block_gradient(residual, i), delta=1e-8,
                  metric=blk.metric, psi=L1Regularizer(blk.lam_i))
c = prox_equivalence_constant(sub, query)
y_test = res.y
print("\nprox view minus subproblem view: %.3e (constant %.6f)"
      % (abs(query.value(y_test) - sub.value(y_test) - c), c))
