# Deciding membership in an inexact proximal set two independent ways:
# by primal value gap against a high-accuracy reference, and by a dual
# subgradient witness. The refined witness is exact for the l1 case, so
# both routes agree; the cheap clamp witness is sufficient but can miss.
import numpy as np

from icbpg.problem import L1Regularizer, SpdMetric
from icbpg.prox import (
    ProxQuery,
    certify_second_prox,
    certify_second_prox_refined,
    check_certificate,
    exact_prox_l1,
    gradient_error_embedding,
    prox_reference_min,
    prox_value,
    rockafellar_membership,
    rockafellar_residual_norm,
)

rng = np.random.Generator(np.random.PCG64(7))
n = 8

# A well-conditioned SPD metric and a random query center.
G = rng.standard_normal((n, n))
B = G.T @ G + 0.6 * np.eye(n)
query = ProxQuery(
    x=rng.standard_normal(n),
    g=rng.standard_normal(n),
    delta=0.05,
    metric=SpdMetric.from_dense(B),
    psi=L1Regularizer(0.7),
)

y_star, p_star = prox_reference_min(query)
print("reference minimum  p* = %.12f" % p_star)
print("minimizer support      %s" % np.flatnonzero(np.abs(y_star) > 1e-12))

# Walk a segment from the exact minimizer outward. Each point's primal
# value gap is the ground truth; the refined certificate must reproduce
# the same accept/reject decision at delta = 0.05.
direction = rng.standard_normal(n)
direction /= np.linalg.norm(direction)
print("\n  t      value gap    refined     clamp   in set?")
for t in (0.0, 0.02, 0.05, 0.1, 0.2, 0.4):
    u = y_star + t * direction
    gap = prox_value(query, u) - p_star
    refined = certify_second_prox_refined(query, u)
    clamp = certify_second_prox(query, u)
    print("%5.2f   %10.3e   %7s   %7s   %s"
          % (t, gap, refined.feasible, clamp.feasible, gap <= query.delta))

# The clamp witness fixes its slack budget to zero, so near the
# boundary it can fail to prove membership the refined witness settles.
misses = 0
for trial in range(400):
    u = y_star + rng.normal(scale=0.12, size=n)
    gap = prox_value(query, u) - p_star
    if gap <= query.delta and not certify_second_prox(query, u).feasible:
        misses += 1
        if misses == 1:
            print("\nmember the clamp cannot certify: gap %.3e <= delta,"
                  " refined says %s" % (gap, certify_second_prox_refined(query, u).feasible))
print("clamp missed %d of 400 random members near the boundary" % misses)

# Certificates carry a witness vector; check_certificate replays the
# defining inequalities on random probe points.
u = y_star + 0.05 * direction
cert = certify_second_prox_refined(query, u)
print("\nwitness dual norm      %.6f  (budget sqrt(2 delta) = %.6f)"
      % (cert.dual_norm_v, np.sqrt(2 * query.delta)))
print("witness replay passes  %s" % check_certificate(query, cert))

# Scaled-identity queries have a closed-form answer: soft thresholding.
c = 2.5
q_id = ProxQuery(x=query.x, g=query.g, delta=0.0,
                 metric=SpdMetric.scaled_identity(n, c),
                 psi=L1Regularizer(0.7))
y_exact = exact_prox_l1(query.x, query.g, 0.7, c)
_, p_id = prox_reference_min(q_id)
print("\nclosed form vs solver  %.3e" % abs(q_id.value(y_exact) - p_id))

# Near-solutions of the l1 subdifferential inclusion: the residual norm
# says how far the inclusion is violated, and any point within delta of
# optimal satisfies the relaxed inclusion at delta' = residual-based rate.
lam = 0.8
x_pt = np.array([2.0, -0.3, 0.05])
u_exact = np.sign(x_pt) * np.maximum(np.abs(x_pt) - lam, 0.0)
u_off = u_exact + np.array([0.1, 0.0, 0.0])
print("\nresidual at exact point   %.3e" % rockafellar_residual_norm(x_pt, u_exact, lam))
res = rockafellar_residual_norm(x_pt, u_off, lam)
print("residual at shifted point %.3e" % res)
print("membership at delta = res^2/2:      %s"
      % rockafellar_membership(x_pt, res ** 2 / 2 + 1e-12, u_off, lam))
print("membership at a quarter of that:    %s"
      % rockafellar_membership(x_pt, res ** 2 / 8, u_off, lam))

# An inexact prox step behaves like an exact step with a perturbed
# gradient; the embedding bounds the perturbation size.
print("\ngradient error bound (delta=0.05, ||e||=0.3): %.4f"
      % gradient_error_embedding(0.05, 0.3))
