"""Evaluation harness over precomputed distance matrices.

Includes spectral clustering (normalized affinity, top eigenvectors, k-means),
accuracy scoring via optimal cluster-to-class assignment, average-linkage
hierarchical clustering, leave-one-out nearest-neighbor classification, and
ranked retrieval with precision/recall.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from .errors import DegenerateInputError, DimensionError, ParameterError


@dataclass(frozen=True)
class DatasetManifest:
    """A labeled image list: unique ids (the relative paths), resolved file
    paths, and one class label per image."""

    root: Path
    ids: tuple[str, ...]
    paths: tuple[Path, ...]
    labels: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ids)


def parse_manifest(path) -> DatasetManifest:
    """Read a manifest file: one 'relative/path<TAB>label' line per image.

    Paths are resolved relative to the manifest's directory. Blank lines and
    lines starting with '#' are skipped. All referenced files must exist;
    missing ones are reported together.
    """
    path = Path(path)
    root = path.resolve().parent
    ids: list[str] = []
    labels: list[str] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ParameterError(
                f"{path}:{lineno}: expected 'relative/path<TAB>label', got {raw!r}"
            )
        ids.append(parts[0])
        labels.append(parts[1])
    if not ids:
        raise ParameterError(f"{path}: manifest lists no images")
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ParameterError(f"{path}: duplicate image ids: {', '.join(dupes)}")
    paths = [root / i for i in ids]
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise ParameterError("missing image files: " + ", ".join(missing))
    return DatasetManifest(
        root=root, ids=tuple(ids), paths=tuple(paths), labels=tuple(labels)
    )


def _check_square(dist: np.ndarray) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise DimensionError("distance matrix must be square")
    if not np.all(np.isfinite(dist)):
        raise DimensionError("distance matrix contains non-finite entries")
    if np.any(dist < 0):
        raise DimensionError("distances must be non-negative")
    if not np.allclose(dist, dist.T, atol=1e-8, rtol=0.0):
        raise DimensionError("distance matrix must be symmetric")
    return dist


def affinity_from_distance(dist: np.ndarray, sigma: float | None = None) -> np.ndarray:
    """Gaussian affinity exp(-d^2 / 2 sigma^2) with zero diagonal.

    With sigma=None the bandwidth is the median off-diagonal distance; a zero
    median (all points coincide) is degenerate.
    """
    dist = _check_square(dist)
    n = dist.shape[0]
    if n < 2:
        raise DimensionError("need at least two points")
    if sigma is None:
        off = dist[np.triu_indices(n, k=1)]
        sigma = float(np.median(off))
        if sigma == 0.0:
            raise DegenerateInputError(
                "median pairwise distance is zero; supply sigma explicitly"
            )
    elif sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    A = np.exp(-(dist**2) / (2.0 * sigma * sigma))
    np.fill_diagonal(A, 0.0)
    return A


@dataclass
class ClusteringResult:
    """Flat cluster assignment: one integer label in [0, n_clusters) per item."""

    labels: np.ndarray
    n_clusters: int


def spectral_cluster(
    dist: np.ndarray,
    n_clusters: int,
    seed: int = 0,
    runs: int = 10,
    sigma: float | None = None,
) -> ClusteringResult:
    """Normalized spectral clustering on a distance matrix.

    Forms the Gaussian affinity, symmetrically normalizes it by degree (rows
    with zero degree stay zero), embeds each point into the top n_clusters
    eigenvectors with row renormalization, and k-means the embedding with
    `runs` restarts.
    """
    dist = _check_square(dist)
    n = dist.shape[0]
    if not 2 <= n_clusters <= n:
        raise ParameterError(f"n_clusters must be in [2, {n}], got {n_clusters}")
    if runs < 1:
        raise ParameterError("runs must be >= 1")
    A = affinity_from_distance(dist, sigma)
    deg = A.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    L = inv_sqrt[:, None] * A * inv_sqrt[None, :]
    L = (L + L.T) / 2.0
    _, vecs = np.linalg.eigh(L)
    U = vecs[:, -n_clusters:]
    norms = np.linalg.norm(U, axis=1)
    norms[norms == 0.0] = 1.0
    Y = U / norms[:, None]
    km = KMeans(n_clusters=n_clusters, n_init=runs, random_state=seed)
    labels = km.fit_predict(Y)
    return ClusteringResult(labels=labels.astype(np.int64), n_clusters=n_clusters)


def hungarian_accuracy(pred, truth) -> float:
    """Clustering accuracy in [0, 1] under the best one-to-one matching of
    predicted clusters to true classes."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise DimensionError("pred and truth must be 1-D and the same length")
    if pred.size == 0:
        raise DimensionError("empty label arrays")
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    a = int(pi.max()) + 1
    b = int(ti.max()) + 1
    side = max(a, b)
    confusion = np.zeros((side, side), dtype=np.int64)
    np.add.at(confusion, (pi, ti), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return float(confusion[rows, cols].sum()) / pred.size


@dataclass
class Dendrogram:
    """Agglomerative merge history.

    Leaves are nodes 0..n_leaves-1; the i-th merge creates node n_leaves+i.
    Each merge records (node_a, node_b, height, size) with node_a < node_b.
    """

    n_leaves: int
    merges: list[tuple[int, int, float, int]] = field(default_factory=list)

    def cut(self, n_clusters: int) -> np.ndarray:
        """Flat labels from the first (n_leaves - n_clusters) merges; clusters
        are numbered by first leaf appearance."""
        n = self.n_leaves
        if not 1 <= n_clusters <= n:
            raise ParameterError(f"n_clusters must be in [1, {n}]")
        members: dict[int, list[int]] = {i: [i] for i in range(n)}
        for step, (a, b, _, _) in enumerate(self.merges[: n - n_clusters]):
            members[n + step] = members.pop(a) + members.pop(b)
        labels = np.empty(n, dtype=np.int64)
        order = sorted(members.values(), key=min)
        for cluster, leaves in enumerate(order):
            labels[leaves] = cluster
        return labels

    def cophenetic(self) -> np.ndarray:
        """Pairwise matrix of merge heights at which leaves first join."""
        n = self.n_leaves
        out = np.zeros((n, n), dtype=np.float64)
        members: dict[int, list[int]] = {i: [i] for i in range(n)}
        for step, (a, b, height, _) in enumerate(self.merges):
            left = members.pop(a)
            right = members.pop(b)
            for u in left:
                out[u, right] = height
                out[right, u] = height
            members[n + step] = left + right
        return out


def average_linkage(dist: np.ndarray) -> Dendrogram:
    """Agglomerative clustering with size-weighted average linkage (UPGMA).

    Repeatedly merges the closest pair of clusters, breaking exact ties toward
    the lexicographically smallest (id_a, id_b). Merge heights never decrease.
    """
    dist = _check_square(dist)
    n = dist.shape[0]
    if n < 2:
        raise DimensionError("need at least two points")
    inter: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            inter[(i, j)] = float(dist[i, j])
    size = {i: 1 for i in range(n)}
    active = list(range(n))
    merges: list[tuple[int, int, float, int]] = []
    next_id = n
    while len(active) > 1:
        best = None
        best_d = np.inf
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                pair = (active[ai], active[bi])
                d = inter[pair]
                if d < best_d:
                    best_d = d
                    best = pair
        a, b = best
        merged_size = size[a] + size[b]
        for t in active:
            if t == a or t == b:
                continue
            da = inter.pop((min(a, t), max(a, t)))
            db = inter.pop((min(b, t), max(b, t)))
            inter[(t, next_id)] = (size[a] * da + size[b] * db) / merged_size
        inter.pop((a, b))
        merges.append((a, b, best_d, merged_size))
        active = [t for t in active if t != a and t != b] + [next_id]
        size[next_id] = merged_size
        next_id += 1
    return Dendrogram(n_leaves=n, merges=merges)


def knn_loo_classify(dist: np.ndarray, labels) -> tuple[list, float]:
    """Leave-one-out 1-nearest-neighbor classification.

    Each item is assigned the label of its closest other item (ties to the
    lowest index). Returns (predictions, accuracy in [0, 1]).
    """
    dist = _check_square(dist)
    labels = list(labels)
    n = dist.shape[0]
    if len(labels) != n:
        raise DimensionError("label count does not match matrix size")
    if n < 2:
        raise DimensionError("need at least two points")
    preds = []
    for i in range(n):
        row = dist[i].copy()
        row[i] = np.inf
        preds.append(labels[int(np.argmin(row))])
    hits = sum(p == t for p, t in zip(preds, labels))
    return preds, hits / n


def retrieve(dist: np.ndarray, query: int, topk: int) -> list[int]:
    """Indices of the topk nearest items to `query`, excluding the query
    itself; ordered by (distance, index)."""
    dist = _check_square(dist)
    n = dist.shape[0]
    if not 0 <= query < n:
        raise ParameterError(f"query index {query} out of range [0, {n})")
    if not 1 <= topk <= n - 1:
        raise ParameterError(f"topk must be in [1, {n - 1}], got {topk}")
    order = np.argsort(dist[query], kind="stable")
    return [int(j) for j in order if j != query][:topk]


def precision_recall(dist: np.ndarray, labels, query: int, topk: int) -> tuple[float, float]:
    """Retrieval precision and recall, both in percent.

    Relevant items share the query's label (query excluded); recall divides by
    that relevant count, so a query whose class has no other member is an error.
    """
    labels = list(labels)
    got = retrieve(dist, query, topk)
    if len(labels) != dist.shape[0]:
        raise DimensionError("label count does not match matrix size")
    relevant_total = sum(1 for i, lab in enumerate(labels) if lab == labels[query]) - 1
    if relevant_total == 0:
        raise ParameterError(f"query {query} is the only member of its class")
    hits = sum(1 for j in got if labels[j] == labels[query])
    return 100.0 * hits / topk, 100.0 * hits / relevant_total
