"""Kernels, gram matrices, and PSD matrix roots.

Four kernel families cover the library's needs: RBF (exponential of a
negative scaled distance, squared or not), plain dot products, lookups
into a precomputed gram, and a distributional-semantic kernel over
embedding-weighted term bags.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist


@dataclass
class RbfKernel:
    """k(a, b) = exp(-bandwidth * ||a - b||) (or squared distance).

    The unsquared form is the default; set ``squared=True`` for the
    classic squared-exponential.  A bandwidth of None means "resolve
    via the median heuristic from training data" (see
    :func:`median_bandwidth`); evaluation requires a concrete value.
    """

    bandwidth: float = None
    squared: bool = False

    def evaluate(self, a, b):
        if self.bandwidth is None:
            raise ValueError("RBF bandwidth is unresolved; fit it from data first")
        d = float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))
        if self.squared:
            d = d * d
        return float(np.exp(-self.bandwidth * d))

    def gram_matrix(self, items):
        if self.bandwidth is None:
            raise ValueError("RBF bandwidth is unresolved; fit it from data first")
        items = np.atleast_2d(np.asarray(items, float))
        D = cdist(items, items)
        if self.squared:
            D = D * D
        return np.exp(-self.bandwidth * D)

    def cross(self, items_a, items_b):
        if self.bandwidth is None:
            raise ValueError("RBF bandwidth is unresolved; fit it from data first")
        A = np.atleast_2d(np.asarray(items_a, float))
        B = np.atleast_2d(np.asarray(items_b, float))
        D = cdist(A, B)
        if self.squared:
            D = D * D
        return np.exp(-self.bandwidth * D)


@dataclass
class LinearKernel:
    """k(a, b) = a . b"""

    def evaluate(self, a, b):
        return float(np.dot(np.asarray(a, float), np.asarray(b, float)))

    def gram_matrix(self, items):
        items = np.atleast_2d(np.asarray(items, float))
        return items @ items.T

    def cross(self, items_a, items_b):
        A = np.atleast_2d(np.asarray(items_a, float))
        B = np.atleast_2d(np.asarray(items_b, float))
        return A @ B.T


@dataclass
class PrecomputedKernel:
    """Items are integer indices into a fixed symmetric matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("precomputed kernel matrix must be square")
        if np.max(np.abs(self.matrix - self.matrix.T)) > 1e-8 * (1 + np.max(np.abs(self.matrix))):
            raise ValueError("precomputed kernel matrix must be symmetric")

    def evaluate(self, a, b):
        return float(self.matrix[int(a), int(b)])

    def gram_matrix(self, items):
        idx = np.asarray(items, dtype=int)
        return self.matrix[np.ix_(idx, idx)]

    def cross(self, items_a, items_b):
        ia = np.asarray(items_a, dtype=int)
        ib = np.asarray(items_b, dtype=int)
        return self.matrix[np.ix_(ia, ib)]


@dataclass
class TermBag:
    """A document as embedding-backed term triplets (word, freq, vector).

    freqs has one relative frequency per kept term; vectors stacks the
    matching unit-norm embedding rows.
    """

    words: list
    freqs: np.ndarray
    vectors: np.ndarray

    @property
    def pooled(self):
        """Frequency-weighted sum of term embeddings, F'P."""
        return self.freqs @ self.vectors


def ds_kernel(bag_a, bag_b):
    """Distributional-semantic kernel between two term bags.

    g(D_i, D_j) = F_i' P_i P_j' F_j: the dot product of the two
    frequency-pooled embedding vectors.  With orthonormal one-hot
    embeddings this reduces to the plain term-frequency dot product.
    """
    return float(bag_a.pooled @ bag_b.pooled)


@dataclass
class DistributionalSemanticKernel:
    """Kernel over :class:`TermBag` items."""

    def evaluate(self, a, b):
        return ds_kernel(a, b)

    def gram_matrix(self, items):
        pooled = np.stack([bag.pooled for bag in items])
        return pooled @ pooled.T

    def cross(self, items_a, items_b):
        A = np.stack([bag.pooled for bag in items_a])
        B = np.stack([bag.pooled for bag in items_b])
        return A @ B.T


@dataclass
class KernelMatrix:
    """A gram matrix plus the ids of the anchor items indexing it."""

    values: np.ndarray
    anchor_ids: list = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("gram matrix must be square")
        if self.anchor_ids is None:
            self.anchor_ids = list(range(self.values.shape[0]))

    @property
    def n(self):
        return self.values.shape[0]

    def check_psd(self, tol=1e-8):
        """True when the smallest eigenvalue is above -tol * scale."""
        w = np.linalg.eigvalsh(0.5 * (self.values + self.values.T))
        return bool(w.min() >= -tol * max(1.0, abs(w.max())))


def eval_kernel(kernel, a, b):
    """Evaluate any kernel object on a pair of items."""
    return kernel.evaluate(a, b)


def gram(kernel, items, anchor_ids=None):
    """Symmetric gram matrix of a kernel over a list of items."""
    values = kernel.gram_matrix(items)
    values = 0.5 * (values + values.T)
    return KernelMatrix(values=values, anchor_ids=anchor_ids)


def median_bandwidth(points, squared=False):
    """Median-heuristic bandwidth: 1 / median pairwise distance.

    For the squared-distance form the median distance enters squared,
    so either variant gives k = exp(-1) at the median separation.
    """
    points = np.atleast_2d(np.asarray(points, float))
    if len(points) < 2:
        raise ValueError("median heuristic needs at least two points")
    D = cdist(points, points)
    med = float(np.median(D[np.triu_indices_from(D, k=1)]))
    if med <= 0.0:
        raise ValueError("median pairwise distance is zero; points coincide")
    return 1.0 / (med * med) if squared else 1.0 / med


def resolve_rbf(kernel, points):
    """Fill in an unresolved RBF bandwidth from training points."""
    if isinstance(kernel, RbfKernel) and kernel.bandwidth is None:
        return RbfKernel(bandwidth=median_bandwidth(points, squared=kernel.squared),
                         squared=kernel.squared)
    return kernel


def _symmetric_eigh(matrix):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(matrix - matrix.T)) > 1e-8 * (1.0 + np.max(np.abs(matrix))):
        raise ValueError("matrix must be symmetric")
    return np.linalg.eigh(0.5 * (matrix + matrix.T))


def psd_sqrt(matrix):
    """Symmetric PSD square root; tiny negative eigenvalues are clipped."""
    w, V = _symmetric_eigh(matrix)
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def inverse_sqrt(matrix, floor=None):
    """Symmetric inverse square root with an eigenvalue floor.

    Eigenvalues below ``floor`` (default 1e-8 times the largest
    eigenvalue) are raised to it, which keeps near-singular grams
    usable at the cost of flattening their smallest directions.
    """
    w, V = _symmetric_eigh(matrix)
    wmax = float(w.max())
    if wmax <= 0.0:
        raise ValueError("matrix has no positive eigenvalues")
    if floor is None:
        floor = 1e-8 * wmax
    w = np.maximum(w, floor)
    return (V / np.sqrt(w)) @ V.T


def kernel_from_config(spec):
    """Build a kernel from a config mapping like {"name": "rbf", ...}."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    if name == "rbf":
        return RbfKernel(bandwidth=spec.get("bandwidth"),
                         squared=bool(spec.get("squared", False)))
    if name == "linear":
        return LinearKernel()
    if name == "precomputed":
        if "matrix" not in spec:
            raise ValueError("precomputed kernel config needs a 'matrix'")
        return PrecomputedKernel(matrix=spec["matrix"])
    if name == "ds":
        return DistributionalSemanticKernel()
    raise ValueError(f"unknown kernel name {name!r}")
