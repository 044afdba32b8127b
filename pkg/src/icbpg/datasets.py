"""Synthetic sparse least-squares dataset generation and I/O.

A dataset directory holds the design matrix (Matrix Market coordinate
format), the right-hand side as newline-delimited decimal text, and a
key=value manifest recording shapes, the l1 weight, the seed, and any
calibration results. Generation is fully deterministic: a counter-based
64-bit generator (Philox) is seeded from the manifest seed, so the same
spec reproduces bit-identical files.

Shape conventions for size parameter N: "tall" is N x N/2 with l1 weight
0.1, "wide" is N x 2N with weight 0.01. Each column receives about 20
uniform [0,1) entries at distinct random rows, and every block gets an
identity placed in its top rows so blocks have full column rank. The
right-hand side is standard Gaussian normalized to the unit sphere.
"""

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse

from .blocks import BlockPartition
from .problem import CompositeProblem

MATRIX_FILE = "A.mtx"
RHS_FILE = "b.txt"
MANIFEST_FILE = "manifest.txt"
XHAT_FILE = "x_hat.txt"

DEFAULT_LAMBDA = {"tall": 0.1, "wide": 0.01}


@dataclass
class DatasetSpec:
    """Recipe for one synthetic instance.

    lam defaults by shape: 0.1 for tall, 0.01 for wide.
    """

    shape: str
    N: int
    p: int = 10
    nnz_per_col: int = 20
    lam: float = None
    seed: int = 0

    def __post_init__(self):
        if self.shape not in ("tall", "wide"):
            raise ValueError("shape must be 'tall' or 'wide'")
        if self.N < 2 or self.p < 1 or self.nnz_per_col < 1:
            raise ValueError("degenerate dataset spec")
        if self.lam is None:
            self.lam = DEFAULT_LAMBDA[self.shape]
        if self.lam < 0.0:
            raise ValueError("l1 weight must be nonnegative")

    @property
    def m(self):
        return self.N

    @property
    def n(self):
        return self.N // 2 if self.shape == "tall" else 2 * self.N


def generate_dataset(spec, out_dir):
    """Write A.mtx, b.txt, and manifest.txt for a spec; returns the manifest.

    Per column: nnz_per_col distinct rows drawn uniformly, values uniform
    on [0,1). Per block: an identity added in the block's top rows (row r
    for local column r), guaranteeing full column rank. Entries landing on
    an identity position add to it. b is Gaussian, normalized to norm 1.
    """
    m, n = spec.m, spec.n
    partition = BlockPartition.near_equal(n, spec.p)
    if max(partition.sizes) > m:
        raise ValueError("block size %d exceeds row count %d"
                         % (max(partition.sizes), m))
    if spec.nnz_per_col > m:
        raise ValueError("cannot place %d distinct rows in %d"
                         % (spec.nnz_per_col, m))
    rng = np.random.Generator(np.random.Philox(spec.seed))

    rows = []
    cols = []
    vals = []
    for i in range(partition.p):
        start, stop = partition.range_of(i)
        for c in range(start, stop):
            rr = rng.choice(m, size=spec.nnz_per_col, replace=False)
            vv = rng.uniform(0.0, 1.0, size=spec.nnz_per_col)
            rows.append(rr)
            cols.append(np.full(spec.nnz_per_col, c, dtype=np.int64))
            vals.append(vv)
            # identity row: local column index within the block
            rows.append(np.array([c - start], dtype=np.int64))
            cols.append(np.array([c], dtype=np.int64))
            vals.append(np.array([1.0]))
    A = scipy.sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, n)).tocsc()
    A.sort_indices()

    b = rng.standard_normal(m)
    b /= np.linalg.norm(b)

    os.makedirs(out_dir, exist_ok=True)
    scipy.io.mmwrite(os.path.join(out_dir, MATRIX_FILE), A, precision=17)
    write_vector(os.path.join(out_dir, RHS_FILE), b)
    manifest = {
        "shape": spec.shape,
        "N": spec.N,
        "m": m,
        "n": n,
        "p": spec.p,
        "block_sizes": ",".join(str(s) for s in partition.sizes),
        "nnz_per_col": spec.nnz_per_col,
        "lambda": spec.lam,
        "seed": spec.seed,
        "rng": "philox64",
    }
    write_manifest(os.path.join(out_dir, MANIFEST_FILE), manifest)
    return manifest


def write_vector(path, v):
    v = np.asarray(v, dtype=float).ravel()
    with open(path, "w") as fh:
        for x in v:
            fh.write("%.17g\n" % x)


def read_vector(path):
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()])


def _format_value(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_manifest(path, manifest):
    with open(path, "w") as fh:
        for key, value in manifest.items():
            fh.write("%s=%s\n" % (key, _format_value(value)))


def read_manifest(path):
    """Parse key=value lines, converting values to int/float when they are."""
    manifest = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            value = raw
            try:
                value = int(raw)
            except ValueError:
                try:
                    value = float(raw)
                except ValueError:
                    pass
            manifest[key.strip()] = value
    return manifest


def update_manifest(data_dir, updates):
    """Rewrite the manifest with updated/appended keys, preserving order."""
    path = os.path.join(data_dir, MANIFEST_FILE)
    manifest = read_manifest(path)
    manifest.update(updates)
    write_manifest(path, manifest)
    return manifest


@dataclass
class Dataset:
    """A loaded instance: matrix, right-hand side, and manifest."""

    A: object
    b: np.ndarray
    manifest: dict
    data_dir: str = None
    partition: BlockPartition = field(default=None)

    def __post_init__(self):
        if self.partition is None:
            sizes = [int(s) for s in
                     str(self.manifest["block_sizes"]).split(",")]
            self.partition = BlockPartition(self.A.shape[1], sizes)


def load_dataset(data_dir):
    manifest = read_manifest(os.path.join(data_dir, MANIFEST_FILE))
    A = scipy.io.mmread(os.path.join(data_dir, MATRIX_FILE)).tocsc()
    b = read_vector(os.path.join(data_dir, RHS_FILE))
    if A.shape[0] != int(manifest["m"]) or A.shape[1] != int(manifest["n"]):
        raise ValueError("matrix shape %r disagrees with manifest" %
                         (A.shape,))
    return Dataset(A=A, b=b, manifest=manifest, data_dir=data_dir)


def build_problem(dataset, metric_kind="gram"):
    return CompositeProblem(dataset.A, dataset.b, dataset.partition,
                            float(dataset.manifest["lambda"]),
                            metric_kind=metric_kind)


def load_reference(dataset):
    """Calibration results (F_star, x_hat, R_surrogate) if present."""
    man = dataset.manifest
    if "F_star" not in man:
        return None
    x_hat = None
    if dataset.data_dir is not None:
        path = os.path.join(dataset.data_dir, man.get("x_hat_file",
                                                      XHAT_FILE))
        if os.path.exists(path):
            x_hat = read_vector(path)
    return {"F_star": float(man["F_star"]),
            "R_surrogate": float(man["R_surrogate"]),
            "x_hat": x_hat}
