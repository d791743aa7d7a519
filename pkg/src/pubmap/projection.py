"""From-scratch 2D neighbor embedding for plotting.

Pipeline: exact brute-force kNN -> per-point fuzzy neighborhood weights
(smooth-kNN calibration by bisection, probabilistic t-conorm
symmetrization) -> stochastic gradient layout of the weighted graph in the
plane with negative sampling. Clustering always happens in the full
embedding width before this step; the 2D coordinates exist only for
graphing.

Determinism is a hard contract here: the SGD walks edges in a fixed order
with its own tiny integer RNG, so identical inputs and seed give
bit-identical coordinates regardless of platform thread count.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import curve_fit
from scipy.spatial.distance import cdist

from .embedding import EmbeddingMatrix
from .errors import LayoutError

DEFAULT_N_NEIGHBORS = 15
DEFAULT_MIN_DIST = 0.1
DEFAULT_EPOCHS = 200
DEFAULT_SPREAD = 1.0
NEGATIVE_SAMPLE_RATE = 5
GRAD_CLIP = 4.0

_SIGMA_LO = 1e-6
_SIGMA_HI = 1e3
_SIGMA_ITERS = 32

_LCG_MULT = 25214903917
_LCG_INC = 11
_LCG_MASK = (1 << 48) - 1


def _ids_and_x(matrix) -> tuple[tuple[str, ...], np.ndarray]:
    if isinstance(matrix, EmbeddingMatrix):
        return matrix.paper_ids, np.asarray(matrix.vectors, dtype=np.float64)
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("matrix must be 2-d")
    return tuple(str(i) for i in range(X.shape[0])), X


@dataclass(frozen=True)
class NeighborGraph:
    """Exact kNN lists: row i holds the indices/distances of its neighbors,
    nearest first; self excluded; distance ties break toward the lower row
    index."""

    indices: np.ndarray
    dists: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        d = np.asarray(self.dists, dtype=np.float64)
        idx.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "dists", d)
        if idx.shape != d.shape:
            raise ValueError("indices and dists must have equal shape")

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def n_neighbors(self) -> int:
        return self.indices.shape[1]


def knn_graph(matrix, n_neighbors: int) -> NeighborGraph:
    """Brute-force exact k nearest neighbors under Euclidean distance."""
    _, X = _ids_and_x(matrix)
    n = X.shape[0]
    if not (1 <= n_neighbors < n):
        raise ValueError(f"need 1 <= n_neighbors < n, got {n_neighbors} with n={n}")
    D = cdist(X, X)
    np.fill_diagonal(D, np.inf)
    cols = np.broadcast_to(np.arange(n), (n, n))
    order = np.lexsort((cols, D), axis=1)[:, :n_neighbors]
    dists = np.take_along_axis(D, order, axis=1)
    return NeighborGraph(indices=order, dists=dists)


def smooth_knn_calibration(dists: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (rho, sigma) for the exponential neighborhood weights.

    rho is the nearest-neighbor distance. sigma solves
    sum_j exp(-max(0, d_ij - rho_i) / sigma_i) = log2(k) by bisection,
    32 iterations over [1e-6, 1e3]; all-equal distance rows degenerate
    gracefully through the max(0, .) clamp.
    """
    d = np.asarray(dists, dtype=np.float64)
    n, k = d.shape
    rho = d[:, 0].copy()
    gap = np.maximum(0.0, d - rho[:, None])
    target = np.log2(k)

    lo = np.full(n, _SIGMA_LO)
    hi = np.full(n, _SIGMA_HI)
    for _ in range(_SIGMA_ITERS):
        mid = 0.5 * (lo + hi)
        val = np.exp(-gap / mid[:, None]).sum(axis=1)
        too_big = val > target
        hi[too_big] = mid[too_big]
        lo[~too_big] = mid[~too_big]
    return rho, 0.5 * (lo + hi)


def fuzzy_weights(knn: NeighborGraph) -> sp.csr_matrix:
    """Symmetric sparse edge weights in (0, 1].

    Directed weights exp(-max(0, d - rho)/sigma) from the calibration are
    combined by the probabilistic t-conorm W = A + A^T - A o A^T, which
    keeps values in (0, 1] and makes W exactly symmetric. The diagonal is
    structurally zero (self never appears in the kNN lists).
    """
    d = knn.dists
    k = knn.n_neighbors
    rho, sigma = smooth_knn_calibration(d)
    gap = np.maximum(0.0, d - rho[:, None])
    weights = np.exp(-gap / sigma[:, None])
    rows = np.repeat(np.arange(knn.n), k)
    A = sp.csr_matrix(
        (weights.ravel(), (rows, knn.indices.ravel())), shape=(knn.n, knn.n)
    )
    W = A + A.T - A.multiply(A.T)
    W = sp.csr_matrix(W)
    W.setdiag(0.0)
    W.eliminate_zeros()
    return W


@lru_cache(maxsize=32)
def fit_curve_params(min_dist: float, spread: float = DEFAULT_SPREAD) -> tuple[float, float]:
    """Least-squares (a, b) so that 1/(1+a d^{2b}) tracks the target curve
    that is flat at 1 below min_dist and decays exponentially past it."""

    def phi(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    (a, b), _ = curve_fit(phi, xv, yv)
    return float(a), float(b)


def attraction_loss(yi, yj, w: float, a: float, b: float) -> float:
    """Per-edge attractive objective: w * log(1 + a d^{2b})."""
    d2 = float(np.sum((np.asarray(yi, float) - np.asarray(yj, float)) ** 2))
    return float(w * np.log1p(a * d2 ** b))


def attraction_gradient(yi, yj, w: float, a: float, b: float) -> np.ndarray:
    """Analytic gradient of attraction_loss with respect to yi."""
    yi = np.asarray(yi, dtype=np.float64)
    yj = np.asarray(yj, dtype=np.float64)
    diff = yi - yj
    d2 = float(np.sum(diff ** 2))
    if d2 == 0.0:
        return np.zeros_like(diff)
    coeff = w * 2.0 * a * b * d2 ** (b - 1.0) / (1.0 + a * d2 ** b)
    return coeff * diff


@numba.njit(cache=True)
def _optimize_layout(coords, heads, tails, weights, a, b, epochs,
                     neg_rate, lr0, rng_state):  # pragma: no cover
    n = coords.shape[0]
    n_edges = heads.shape[0]
    for epoch in range(epochs):
        alpha = lr0 * (1.0 - epoch / epochs)
        for e in range(n_edges):
            i = heads[e]
            j = tails[e]
            w = weights[e]
            dx = coords[i, 0] - coords[j, 0]
            dy = coords[i, 1] - coords[j, 1]
            d2 = dx * dx + dy * dy
            if d2 > 0.0:
                gc = -2.0 * a * b * d2 ** (b - 1.0) / (1.0 + a * d2 ** b) * w
                gx = min(max(gc * dx, -GRAD_CLIP), GRAD_CLIP)
                gy = min(max(gc * dy, -GRAD_CLIP), GRAD_CLIP)
                coords[i, 0] += alpha * gx
                coords[i, 1] += alpha * gy
                coords[j, 0] -= alpha * gx
                coords[j, 1] -= alpha * gy
            for end in range(2):
                p = i if end == 0 else j
                mate = j if end == 0 else i
                for _ in range(neg_rate):
                    rng_state = (rng_state * _LCG_MULT + _LCG_INC) & _LCG_MASK
                    t = (rng_state >> 17) % n
                    if t == p or t == mate:
                        continue
                    dx = coords[p, 0] - coords[t, 0]
                    dy = coords[p, 1] - coords[t, 1]
                    d2 = dx * dx + dy * dy
                    if d2 > 0.0:
                        gc = 2.0 * b / ((0.001 + d2) * (1.0 + a * d2 ** b))
                        gx = min(max(gc * dx, -GRAD_CLIP), GRAD_CLIP)
                        gy = min(max(gc * dy, -GRAD_CLIP), GRAD_CLIP)
                    else:
                        # Coincident with the sampled point: push hard so
                        # degenerate all-identical inputs still spread out.
                        gx = GRAD_CLIP
                        gy = GRAD_CLIP
                    coords[p, 0] += alpha * gx
                    coords[p, 1] += alpha * gy
    return rng_state


@dataclass(frozen=True)
class Projection2D:
    paper_ids: tuple[str, ...]
    coords: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("coords must be n x 2")
        if c.shape[0] != len(self.paper_ids):
            raise ValueError("one coordinate row per paper required")
        if c.size and not np.all(np.isfinite(c)):
            raise ValueError("coords contain non-finite values")


def seeded_init(n: int, seed: int) -> np.ndarray:
    """The layout's starting coordinates: uniform noise in [-10, 10]^2."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-10.0, 10.0, size=(n, 2))


def _edge_arrays(W: sp.spmatrix):
    upper = sp.triu(W, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    return (
        upper.row[order].astype(np.int64),
        upper.col[order].astype(np.int64),
        upper.data[order].astype(np.float64),
    )


def layout_2d(weights: sp.spmatrix, *, n: int | None = None,
              min_dist: float = DEFAULT_MIN_DIST, epochs: int = DEFAULT_EPOCHS,
              seed: int = 0, spread: float = DEFAULT_SPREAD,
              learning_rate: float = 1.0,
              negative_sample_rate: int = NEGATIVE_SAMPLE_RATE) -> np.ndarray:
    """Optimize 2D coordinates for a symmetric weight graph.

    epochs=0 returns the seeded initialization untouched. The learning rate
    decays linearly from learning_rate to 0; per-component gradient steps
    are clipped to +/-4.
    """
    n = weights.shape[0] if n is None else n
    if weights.shape != (n, n):
        raise ValueError("weights must be square over the point set")
    coords = seeded_init(n, seed)
    if epochs == 0:
        return coords
    if epochs < 0:
        raise ValueError("epochs must be >= 0")
    a, b = fit_curve_params(min_dist, spread)
    heads, tails, data = _edge_arrays(weights)
    if not np.all(np.isfinite(data)):
        raise LayoutError("non-finite edge weights")
    state = ((seed * 6364136223846793005 + 1442695040888963407) & _LCG_MASK) | 1
    _optimize_layout(coords, heads, tails, data, a, b, int(epochs),
                     int(negative_sample_rate), float(learning_rate), state)
    if not np.all(np.isfinite(coords)):
        bad = int(np.sum(~np.isfinite(coords)))
        raise LayoutError(
            f"{bad} non-finite coordinate components after {epochs} epochs "
            f"(a={a:.4f}, b={b:.4f}, edges={heads.size})"
        )
    return coords


def project(matrix, n_neighbors: int = DEFAULT_N_NEIGHBORS,
            min_dist: float = DEFAULT_MIN_DIST, epochs: int = DEFAULT_EPOCHS,
            seed: int = 0, spread: float = DEFAULT_SPREAD) -> Projection2D:
    """Full reduction: kNN graph, fuzzy weights, 2D layout."""
    paper_ids, X = _ids_and_x(matrix)
    knn = knn_graph(X, n_neighbors)
    W = fuzzy_weights(knn)
    coords = layout_2d(W, min_dist=min_dist, epochs=epochs, seed=seed, spread=spread)
    return Projection2D(
        paper_ids=paper_ids,
        coords=coords,
        params={
            "n_neighbors": n_neighbors,
            "min_dist": min_dist,
            "epochs": epochs,
            "seed": seed,
            "spread": spread,
            "negative_sample_rate": NEGATIVE_SAMPLE_RATE,
            "learning_rate": 1.0,
        },
    )


def write_projection_csv(projection: Projection2D, path,
                         assignment: dict[str, int] | None = None,
                         excluded: dict[str, int] | None = None,
                         meta_line: str | None = None) -> None:
    """Emit `paper_id,x,y,label`; excluded papers get label -1.

    Coordinates are written with repr-round-trip precision so reruns with
    identical inputs produce byte-identical files.
    """
    assignment = assignment or {}
    excluded = excluded or {}
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        if meta_line is not None:
            fh.write(f"# {meta_line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["paper_id", "x", "y", "label"])
        for pid, (x, y) in zip(projection.paper_ids, projection.coords):
            if pid in assignment:
                label = assignment[pid]
            elif pid in excluded:
                label = -1
            else:
                label = ""
            writer.writerow([pid, repr(float(x)), repr(float(y)), label])
    os.replace(tmp, path)
