"""Block-separable composite problem model.

The objective is F(x) = f(x) + sum_i psi_i(x_i) with a quadratic smooth
term f(x) = 0.5 ||A x - b||^2, a contiguous block partition of the
coordinates, and per-block l1 regularizers psi_i = lam_i ||.||_1.

Each block i carries a positive definite metric B_i inducing the block
norm ||t||_(i) = sqrt(t' B_i t) and its dual ||v||_(i)* = sqrt(v' B_i^-1 v).
Two metric families are supported:

* ``gram``: B_i = A_i' A_i with block smoothness constant L_i = 1, the
  natural choice for the quadratic f (block curvature is matched exactly);
* ``diag``: B_i = I with L_i an upper bound on ||A_i||_2^2, which makes
  every block proximal step available in closed form.
"""

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .blocks import BlockPartition

# Blocks up to this size use a dense Cholesky factor of the Gram matrix;
# larger blocks fall back to conjugate-gradient solves.
DENSE_METRIC_THRESHOLD = 2000

_POWER_ITERATIONS = 30
_POWER_MARGIN = 1.05


def power_iteration(apply_fn, n, iters=_POWER_ITERATIONS, seed=0):
    """Rayleigh-quotient estimate of the top eigenvalue of an SPD operator."""
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(n)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    v /= nv
    lam = 0.0
    for _ in range(int(iters)):
        w = apply_fn(v)
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return lam


class SpdMetric:
    """Positive definite metric B with apply/solve and induced norms."""

    def __init__(self, n, kind, apply_fn, solve_fn, norm_fn=None):
        self.n = int(n)
        self.kind = kind
        self._apply = apply_fn
        self._solve = solve_fn
        self._norm = norm_fn

    @classmethod
    def from_dense(cls, B):
        """Metric from an explicit dense SPD matrix (Cholesky-backed)."""
        B = np.asarray(B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValueError("metric matrix must be square")
        if not np.allclose(B, B.T, rtol=1e-10, atol=1e-12):
            raise ValueError("metric matrix must be symmetric")
        try:
            factor = scipy.linalg.cho_factor(B, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise ValueError("metric matrix is not positive definite: %s" % exc)
        B = B.copy()

        def apply_fn(v):
            return B @ v

        def solve_fn(v):
            return scipy.linalg.cho_solve(factor, v, check_finite=False)

        m = cls(B.shape[0], "dense", apply_fn, solve_fn)
        m._dense = B
        return m

    @classmethod
    def from_gram(cls, A_block, dense_threshold=DENSE_METRIC_THRESHOLD):
        """Gram metric B = A' A of a (sparse or dense) block matrix A.

        Blocks with at most ``dense_threshold`` columns get a dense
        Cholesky factor of the Gram matrix; larger blocks use CG solves.
        A rank-deficient block raises: the metric would be singular.
        """
        n = A_block.shape[1]
        sparse = scipy.sparse.issparse(A_block)

        def norm_fn(v):
            return float(np.linalg.norm(A_block @ v))

        if n <= dense_threshold:
            G = A_block.T @ A_block
            G = G.toarray() if scipy.sparse.issparse(G) else np.asarray(G)
            G = np.asarray(G, dtype=float)
            try:
                factor = scipy.linalg.cho_factor(G, lower=True, check_finite=False)
            except scipy.linalg.LinAlgError as exc:
                raise ValueError(
                    "block Gram matrix is singular (block not full column rank): %s" % exc
                )

            def apply_fn(v):
                return G @ v

            def solve_fn(v):
                return scipy.linalg.cho_solve(factor, v, check_finite=False)

            m = cls(n, "gram", apply_fn, solve_fn, norm_fn)
            m._dense = G
            return m

        # CG path for large blocks; A must have full column rank.
        def apply_fn(v):
            return A_block.T @ (A_block @ v)

        op = scipy.sparse.linalg.LinearOperator((n, n), matvec=apply_fn)

        def solve_fn(v):
            out, info = scipy.sparse.linalg.cg(op, v, rtol=1e-12, atol=0.0, maxiter=20 * n)
            if info != 0:
                raise RuntimeError("CG solve with the block Gram matrix failed (info=%d)" % info)
            return out

        return cls(n, "gram", apply_fn, solve_fn, norm_fn)

    @classmethod
    def scaled_identity(cls, n, c=1.0):
        c = float(c)
        if c <= 0.0:
            raise ValueError("identity scaling must be positive")

        def apply_fn(v):
            return c * v

        def solve_fn(v):
            return v / c

        def norm_fn(v):
            return float(np.sqrt(c) * np.linalg.norm(v))

        m = cls(n, "identity", apply_fn, solve_fn, norm_fn)
        m._scale = c
        return m

    def apply(self, v):
        return self._apply(np.asarray(v, dtype=float))

    def solve(self, v):
        return self._solve(np.asarray(v, dtype=float))

    def norm(self, v):
        """||v||_B = sqrt(v' B v)."""
        v = np.asarray(v, dtype=float)
        if self._norm is not None:
            return self._norm(v)
        return float(np.sqrt(max(v @ self.apply(v), 0.0)))

    def dual_norm(self, v):
        """||v||_B* = sqrt(v' B^-1 v)."""
        v = np.asarray(v, dtype=float)
        return float(np.sqrt(max(v @ self.solve(v), 0.0)))

    def dense(self):
        """Materialize B as a dense array (for small verification problems)."""
        if hasattr(self, "_dense"):
            return self._dense.copy()
        return np.column_stack([self.apply(e) for e in np.eye(self.n)])


class L1Regularizer:
    """Weighted l1 penalty psi(y) = lam * ||y||_1 with subgradient helpers."""

    def __init__(self, lam):
        lam = float(lam)
        if lam < 0.0:
            raise ValueError("l1 weight must be nonnegative")
        self.lam = lam

    def value(self, y):
        return self.lam * float(np.sum(np.abs(y)))

    def prox(self, v, t=1.0):
        return soft_threshold(v, self.lam * t)

    def project_subdifferential(self, w, u):
        """Componentwise projection of w onto the subdifferential at u.

        On coordinates where u is zero the subdifferential is the interval
        [-lam, lam]; elsewhere it is the single point lam * sign(u).
        """
        w = np.asarray(w, dtype=float)
        u = np.asarray(u, dtype=float)
        out = np.clip(w, -self.lam, self.lam)
        out = np.where(u > 0.0, self.lam, out)
        out = np.where(u < 0.0, -self.lam, out)
        return out

    def subgradient_epsilon(self, s, u):
        """Smallest eps such that s is an eps-subgradient of psi at u.

        Finite exactly when ||s||_inf <= lam, in which case it equals
        sum_j (lam |u_j| - s_j u_j) >= 0 by Fenchel-Young.
        """
        s = np.asarray(s, dtype=float)
        u = np.asarray(u, dtype=float)
        if np.max(np.abs(s), initial=0.0) > self.lam * (1.0 + 1e-12) + 1e-300:
            return np.inf
        return max(float(self.lam * np.sum(np.abs(u)) - s @ u), 0.0)


def soft_threshold(v, t):
    """Shrink v towards zero by t >= 0, componentwise."""
    if t < 0.0:
        raise ValueError("threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


class BlockData:
    """Per-block precomputed quantities used by the solver."""

    def __init__(self, index, cols, A_block, metric, L_i, lam_i, L_sub):
        self.index = index
        self.cols = cols
        self.A_block = A_block
        self.metric = metric
        self.L_i = L_i
        self.lam_i = lam_i
        self.L_sub = L_sub
        self.psi = L1Regularizer(lam_i)


class CompositeProblem:
    """F(x) = 0.5 ||A x - b||^2 + sum_i lam_i ||x_i||_1 over a block partition."""

    def __init__(self, A, b, partition, lam, metric_kind="gram",
                 dense_threshold=DENSE_METRIC_THRESHOLD, seed=0):
        if not scipy.sparse.issparse(A):
            A = scipy.sparse.csc_matrix(np.asarray(A, dtype=float))
        A = A.tocsc().astype(float)
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise ValueError("A has %d rows but b has length %d" % (A.shape[0], b.shape[0]))
        if partition.n != A.shape[1]:
            raise ValueError("partition covers %d coordinates, A has %d columns"
                             % (partition.n, A.shape[1]))
        if metric_kind not in ("gram", "diag"):
            raise ValueError("metric_kind must be 'gram' or 'diag'")

        lam_arr = np.asarray(lam, dtype=float).ravel()
        if lam_arr.size == 1:
            lam_arr = np.full(partition.p, float(lam_arr[0]))
        if lam_arr.size != partition.p:
            raise ValueError("need one l1 weight per block")
        if np.any(lam_arr < 0.0):
            raise ValueError("l1 weights must be nonnegative")

        self.A = A
        self.b = b
        self.m, self.n = A.shape
        self.partition = partition
        self.p = partition.p
        self.lam = lam_arr
        self.metric_kind = metric_kind

        self.blocks = []
        for i in range(partition.p):
            sl = partition.slice_of(i)
            A_i = A[:, sl].tocsc()
            gram_apply = _gram_apply(A_i)
            lam_top = power_iteration(gram_apply, A_i.shape[1],
                                      iters=_POWER_ITERATIONS, seed=seed + 7 * i + 1)
            if metric_kind == "gram":
                metric = SpdMetric.from_gram(A_i, dense_threshold=dense_threshold)
                L_i = 1.0
            else:
                metric = SpdMetric.scaled_identity(A_i.shape[1], 1.0)
                L_i = lam_top * _POWER_MARGIN
                if L_i <= 0.0:
                    raise ValueError("block %d has a zero matrix; smoothness constant degenerate" % i)
            # Top eigenvalue of the lifted (y+, y-) quadratic is exactly twice
            # that of the Gram matrix; a 5% margin keeps the fixed step safe.
            L_sub = 2.0 * lam_top * _POWER_MARGIN
            self.blocks.append(BlockData(i, sl, A_i, metric, L_i, float(lam_arr[i]), L_sub))

        self.L = np.array([blk.L_i for blk in self.blocks])
        self.L_min = float(np.min(self.L))
        self.L_max = float(np.max(self.L))
        # ||A t||^2 <= p sum_i ||A_i t_i||^2 <= p L_max ||t||_B^2; the
        # first step is Cauchy-Schwarz across blocks, the second is the
        # per-block smoothness bound. Equals p for the Gram family.
        self.L_f = float(self.p) * self.L_max

    # ----- objective and gradients -------------------------------------

    def residual(self, x):
        return self.A @ np.asarray(x, dtype=float) - self.b

    def smooth_value(self, x):
        r = self.residual(x)
        return 0.5 * float(r @ r)

    def penalty_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(sum(blk.lam_i * np.sum(np.abs(x[blk.cols])) for blk in self.blocks))

    def objective(self, x):
        return self.smooth_value(x) + self.penalty_value(x)

    def gradient(self, x):
        return self.A.T @ self.residual(x)

    def block_gradient(self, residual, i):
        """Gradient of f restricted to block i, given the full residual A x - b."""
        return self.blocks[i].A_block.T @ residual

    # ----- norms --------------------------------------------------------

    def block_norm(self, i, t):
        return self.blocks[i].metric.norm(t)

    def block_dual_norm(self, i, v):
        return self.blocks[i].metric.dual_norm(v)

    def global_B_norm(self, x):
        """sqrt(sum_i ||x_i||_(i)^2), the block-metric norm on R^n."""
        x = np.asarray(x, dtype=float)
        total = 0.0
        for blk in self.blocks:
            total += self.block_norm(blk.index, x[blk.cols]) ** 2
        return float(np.sqrt(total))

    def global_B_dual_norm(self, v):
        v = np.asarray(v, dtype=float)
        total = 0.0
        for blk in self.blocks:
            total += self.block_dual_norm(blk.index, v[blk.cols]) ** 2
        return float(np.sqrt(total))

    # ----- smoothness ----------------------------------------------------

    def estimate_global_smoothness(self, refine=False, iters=200, seed=0):
        """Constant L_f with ||A t||^2 <= L_f ||t||_B^2 for all t.

        The default p * L_max is always valid (Cauchy-Schwarz across
        blocks plus the per-block smoothness bound) and reduces to p for
        the Gram metric family. With ``refine`` a Rayleigh-quotient power
        iteration on the metric-preconditioned normal operator estimates
        the tight constant; the smaller of the two is returned, with a 2%
        safety margin on the estimate.
        """
        if not refine:
            return self.L_f
        rng = np.random.Generator(np.random.PCG64(seed + 12345))
        v = rng.standard_normal(self.n)
        lam = self.L_f
        for _ in range(int(iters)):
            Av = self.A @ v
            w = self.A.T @ Av
            # precondition by the block-diagonal metric
            u = np.empty_like(v)
            for blk in self.blocks:
                u[blk.cols] = blk.metric.solve(w[blk.cols])
            nb = self.global_B_norm(u)
            if nb == 0.0:
                break
            v = u / nb
            lam = float(np.linalg.norm(self.A @ v) ** 2)
        return float(min(self.L_f, lam * 1.02))

    def verify_block_smoothness(self, x, t, i, L=None):
        """Residual of the block descent inequality at (x, t); <= 0 when it holds.

        Returns f(x + U_i t) - f(x) - <grad_i f(x), t> - (L_i / 2) ||t||_(i)^2.
        """
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        blk = self.blocks[i]
        if L is None:
            L = blk.L_i
        r = self.residual(x)
        f_x = 0.5 * float(r @ r)
        r_new = r + blk.A_block @ t
        f_new = 0.5 * float(r_new @ r_new)
        g_i = blk.A_block.T @ r
        return f_new - f_x - float(g_i @ t) - 0.5 * L * self.block_norm(i, t) ** 2

    def verify_global_smoothness(self, x, t, L_f=None):
        """Residual of the full descent inequality in the block-metric norm."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if L_f is None:
            L_f = self.L_f
        r = self.residual(x)
        f_x = 0.5 * float(r @ r)
        r_new = r + self.A @ t
        f_new = 0.5 * float(r_new @ r_new)
        g = self.A.T @ r
        return f_new - f_x - float(g @ t) - 0.5 * L_f * self.global_B_norm(t) ** 2


def _gram_apply(A_block):
    def apply_fn(v):
        return A_block.T @ (A_block @ v)
    return apply_fn
