"""Distance functions and candidate-restricted nearest-neighbor search.

Every metric kind answers one-to-many distance queries through the same
vectorized formulas, so scalar lookups, linear scans and the KD-tree fast
path all agree bitwise. Ties are broken by the smallest node id; the tree
path therefore shortlists every candidate whose tree distance falls within a
relative band of the best hit and re-ranks the shortlist with the canonical
formula before applying the id rule. The result is required to be identical
to a plain linear scan in all cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, EmptyCandidates, LengthMismatch, NonFiniteValue

# candidate sets at least this large get a spatial index (euclidean, d <= 16)
NN_INDEX_THRESHOLD = 256

# relative slack when matching tree distances against canonical ones; tree
# and formula arithmetic may disagree in the last few ulps
_TIE_BAND = 1e-9


@dataclass
class Dataset:
    """n rows of d finite features, with optional ids and ground-truth labels.

    Labels exist for the oracle and for evaluation only; nothing in the
    clustering path reads them.
    """

    points: np.ndarray
    ids: Optional[list[str]] = None
    labels: Optional[np.ndarray] = None
    feature_names: Optional[list[str]] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"points must be a nonempty 2-D array, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise NonFiniteValue("dataset contains NaN or infinite features")
        self.points = pts
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (pts.shape[0],):
                raise LengthMismatch(
                    f"labels cover {labels.shape[0]} rows, dataset has {pts.shape[0]}"
                )
            self.labels = labels
        if self.ids is not None and len(self.ids) != pts.shape[0]:
            raise LengthMismatch("ids do not cover all rows")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class Metric:
    """Distance kind: euclidean, cosine, random(seed) or precomputed(matrix)."""

    kind: str
    seed: int = 0
    matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("euclidean", "cosine", "random", "precomputed"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "precomputed":
            if self.matrix is None:
                raise DimensionMismatch("precomputed metric needs a square matrix")
            m = np.asarray(self.matrix, dtype=np.float64)
            object.__setattr__(self, "matrix", m)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionMismatch("precomputed metric needs a square matrix")
            if not np.isfinite(m).all() or (m < 0).any():
                raise ValueError("distance matrix must be finite and nonnegative")
            if not np.array_equal(m, m.T):
                raise ValueError("distance matrix must be symmetric")
            if (np.diag(m) != 0).any():
                raise ValueError("distance matrix diagonal must be zero")

    @staticmethod
    def euclidean() -> "Metric":
        return Metric("euclidean")

    @staticmethod
    def cosine() -> "Metric":
        return Metric("cosine")

    @staticmethod
    def random(seed: int) -> "Metric":
        return Metric("random", seed=seed)

    @staticmethod
    def precomputed(matrix: np.ndarray) -> "Metric":
        return Metric("precomputed", matrix=np.asarray(matrix, dtype=np.float64))


def load_distance_matrix(path) -> np.ndarray:
    """Read a header-free, row-major CSV of n x n distances."""
    m = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    return m


def _splitmix64(x: np.ndarray) -> np.ndarray:
    # standard splitmix64 finalizer over uint64 arrays
    with np.errstate(over="ignore"):
        z = x + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def pair_distances(m: Metric, ds: Dataset, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise distances between row pairs (a[t], b[t]).

    This is the single canonical distance kernel: the scalar and one-to-many
    entry points delegate here, so every code path produces bit-identical
    values for the same pair regardless of batching or argument order.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if m.kind == "euclidean":
        diff = ds.points[a] - ds.points[b]
        return np.sqrt((diff * diff).sum(axis=1))
    if m.kind == "cosine":
        xa = ds.points[a]
        xb = ds.points[b]
        dots = (xa * xb).sum(axis=1)
        na = np.sqrt((xa * xa).sum(axis=1))
        nb = np.sqrt((xb * xb).sum(axis=1))
        some_zero = (na == 0.0) | (nb == 0.0)
        denom = np.where(some_zero, 1.0, na * nb)
        out = 1.0 - dots / denom
        # zero-norm conventions: distance 1 against anything nonzero,
        # 0 against another zero vector
        out[some_zero] = 1.0
        out[(na == 0.0) & (nb == 0.0)] = 0.0
        out[a == b] = 0.0
        return out
    if m.kind == "random":
        au = a.astype(np.uint64)
        bu = b.astype(np.uint64)
        lo = np.minimum(au, bu)
        hi = np.maximum(au, bu)
        key = (lo << np.uint64(32)) | hi
        seed_mix = _splitmix64(np.array([np.uint64(m.seed & 0xFFFFFFFFFFFFFFFF)]))[0]
        h = _splitmix64(key ^ seed_mix)
        # 53 high bits, offset to the open interval (0, 1)
        vals = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0**-53)
        vals[a == b] = 0.0
        return vals
    # precomputed
    if m.matrix.shape[0] != ds.n:
        raise DimensionMismatch(
            f"matrix is {m.matrix.shape[0]}x{m.matrix.shape[1]}, dataset has {ds.n} rows"
        )
    return m.matrix[a, b].astype(np.float64)


def distances_from(m: Metric, ds: Dataset, i: int, others: np.ndarray) -> np.ndarray:
    """Vectorized distances from row i to each row in ``others``."""
    others = np.asarray(others, dtype=np.int64)
    return pair_distances(m, ds, np.full(others.shape, i, dtype=np.int64), others)


def distance(m: Metric, ds: Dataset, i: int, j: int) -> float:
    """Distance between rows i and j."""
    return float(
        pair_distances(
            m, ds, np.array([i], dtype=np.int64), np.array([j], dtype=np.int64)
        )[0]
    )


def _tree_eligible(m: Metric, ds: Dataset, count: int, threshold: int) -> bool:
    return m.kind == "euclidean" and ds.d <= 16 and count >= threshold


def _pick_min(cand: np.ndarray, dists: np.ndarray) -> int:
    best = dists.min()
    return int(cand[dists == best].min())


def nearest_neighbor(
    m: Metric,
    ds: Dataset,
    i: int,
    candidates: Iterable[int],
    index_threshold: int = NN_INDEX_THRESHOLD,
) -> int:
    """Closest candidate to row i, excluding i itself; id breaks ties."""
    cand = np.fromiter((int(c) for c in candidates), dtype=np.int64)
    cand = cand[cand != i]
    if cand.size == 0:
        raise EmptyCandidates(f"no candidates besides node {i}")
    if not _tree_eligible(m, ds, cand.size, index_threshold):
        return _pick_min(cand, distances_from(m, ds, i, cand))
    cand = np.sort(cand)
    tree = cKDTree(ds.points[cand])
    x = ds.points[i]
    k = min(4, cand.size)
    td, ti = tree.query(x, k=k)
    td = np.atleast_1d(td)
    ti = np.atleast_1d(ti)
    band = td[0] * (1.0 + _TIE_BAND)
    if k < cand.size and td[-1] <= band:
        # the band may extend past the k results we asked for
        shortlist = np.array(tree.query_ball_point(x, band, p=2.0), dtype=np.int64)
    else:
        shortlist = ti[td <= band]
    picks = cand[shortlist]
    return _pick_min(picks, distances_from(m, ds, i, picks))


def batch_nearest_neighbors(
    m: Metric,
    ds: Dataset,
    members: np.ndarray,
    index_threshold: int = NN_INDEX_THRESHOLD,
) -> np.ndarray:
    """For each member, its nearest other member. Same contract as calling
    nearest_neighbor per member, computed with one shared index."""
    members = np.asarray(members, dtype=np.int64)
    if members.size < 2:
        raise EmptyCandidates("need at least two members")
    if not _tree_eligible(m, ds, members.size, index_threshold):
        out = np.empty(members.size, dtype=np.int64)
        for pos, node in enumerate(members):
            others = np.delete(members, pos)
            out[pos] = _pick_min(others, distances_from(m, ds, int(node), others))
        return out

    pts = ds.points[members]
    tree = cKDTree(pts)
    k = min(4, members.size)
    td, ti = tree.query(pts, k=k)
    out = np.empty(members.size, dtype=np.int64)
    rows = np.arange(members.size)

    # mask out each row's own entry, then take the best remaining hit
    self_mask = ti == rows[:, None]
    masked = np.where(self_mask, np.inf, td)
    best_pos = np.argmin(masked, axis=1)
    best_d = masked[rows, best_pos]
    band = best_d * (1.0 + _TIE_BAND)

    # rows are ambiguous when more than one non-self hit sits inside the
    # band, or when the band might extend past the k hits we retrieved
    in_band = (masked <= band[:, None]).sum(axis=1)
    covered = (td[:, -1] > band) | (k == members.size)
    easy = (in_band == 1) & covered
    out[easy] = members[ti[rows[easy], best_pos[easy]]]

    for pos in np.flatnonzero(~easy):
        node = int(members[pos])
        hits = np.array(tree.query_ball_point(pts[pos], band[pos], p=2.0), dtype=np.int64)
        hits = hits[hits != pos]
        picks = members[hits]
        out[pos] = _pick_min(picks, distances_from(m, ds, node, picks))
    return out
