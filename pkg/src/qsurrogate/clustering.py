"""k-means with k-means++ restarts, cluster-quality indices, and the k sweep."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .seeding import stream


@dataclass
class ClusterResult:
    centroids: np.ndarray  # (k, m)
    assignments: np.ndarray  # (n,)
    wcss: float
    iterations: int
    history: list[float] = field(default_factory=list)  # WCSS after each assignment step

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return np.sum((X[:, None, :] - C[None, :, :]) ** 2, axis=-1)


def kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total == 0 else rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def lloyd(X: np.ndarray, init: np.ndarray, max_iter: int = 300, tol: float = 1e-8) -> ClusterResult:
    """Lloyd iterations from given centroids; stops when the largest centroid shift is below ``tol``."""
    C = np.array(init, dtype=float)
    k = C.shape[0]
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, C)
        labels = np.argmin(d, axis=1)
        cost = d[np.arange(len(X)), labels]
        history.append(float(cost.sum()))
        for j in np.setdiff1d(np.arange(k), labels):
            # Reseed an empty cluster at the point farthest from its own centroid.
            far = int(np.argmax(cost))
            labels[far] = j
            cost[far] = 0.0
        new = np.array([X[labels == j].mean(axis=0) for j in range(k)])
        shift = float(np.max(np.sqrt(np.sum((new - C) ** 2, axis=1))))
        C = new
        if shift < tol:
            break
    d = _sq_dists(X, C)
    labels = np.argmin(d, axis=1)
    wcss = float(d[np.arange(len(X)), labels].sum())
    return ClusterResult(C, labels, wcss, it, history)


def kmeans(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-8,
    n_init: int = 10,
) -> ClusterResult:
    """Best-of-``n_init`` k-means++ / Lloyd runs (lowest WCSS)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("kmeans needs a non-empty (n, m) array")
    if not np.all(np.isfinite(X)):
        raise ValueError("kmeans input contains non-finite values")
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must lie in [1, {X.shape[0]}], got {k}")
    rng = stream(seed, "clustering")
    best = None
    for _ in range(n_init):
        res = lloyd(X, kmeans_pp_init(X, k, rng), max_iter, tol)
        if best is None or res.wcss < best.wcss:
            best = res
    return best


def _check_labels(X: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if labels.shape != (X.shape[0],):
        raise ValueError("one label per sample required")
    ids = np.unique(labels)
    if ids.size < 2:
        raise ValueError("need at least two non-empty clusters")
    return X, np.searchsorted(ids, labels)


def silhouette(X: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette; samples alone in their cluster score 0."""
    X, lab = _check_labels(X, labels)
    D = np.sqrt(_sq_dists(X, X))
    k = lab.max() + 1
    onehot = np.eye(k)[lab]
    counts = onehot.sum(axis=0)
    sums = D @ onehot  # (n, k): summed distance to each cluster
    own = counts[lab]
    a = sums[np.arange(len(X)), lab] / np.maximum(own - 1, 1)
    other = sums / counts
    other[np.arange(len(X)), lab] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def davies_bouldin(X: np.ndarray, labels: np.ndarray) -> float:
    X, lab = _check_labels(X, labels)
    k = lab.max() + 1
    C = np.array([X[lab == j].mean(axis=0) for j in range(k)])
    s = np.array([np.mean(np.sqrt(np.sum((X[lab == j] - C[j]) ** 2, axis=1))) for j in range(k)])
    sep = np.sqrt(_sq_dists(C, C))
    off = ~np.eye(k, dtype=bool)
    if np.any(sep[off] == 0):
        raise ValueError("coincident centroids; Davies-Bouldin index undefined")
    ratio = np.where(off, (s[:, None] + s[None, :]) / np.where(off, sep, 1.0), -np.inf)
    return float(ratio.max(axis=1).mean())


REPORT_COLUMNS = ("k", "wcss", "silhouette", "davies_bouldin", "nrmse", "r2")


@dataclass
class KSelectionReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def ks(self) -> list[int]:
        return [r["k"] for r in self.rows]

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def best(self) -> dict[str, int]:
        """Arg-optimal k per index (silhouette max, Davies-Bouldin min)."""
        sil, db = self.column("silhouette"), self.column("davies_bouldin")
        return {"silhouette": self.ks[int(np.nanargmax(sil))], "davies_bouldin": self.ks[int(np.nanargmin(db))]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r["k"]] + [repr(float(r[c])) for c in REPORT_COLUMNS[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "KSelectionReport":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ValueError(f"expected columns {REPORT_COLUMNS}")
        return cls([{"k": int(r["k"]), **{c: float(r[c]) for c in REPORT_COLUMNS[1:]}} for r in reader])

    def table(self) -> str:
        lines = [f"{'k':>3} {'wcss':>12} {'silhouette':>11} {'davies_bouldin':>15} {'nrmse':>11} {'r2':>9}"]
        for r in self.rows:
            lines.append(
                f"{r['k']:>3} {r['wcss']:>12.5g} {r['silhouette']:>11.4f} {r['davies_bouldin']:>15.4f} "
                f"{r['nrmse']:>11.4g} {r['r2']:>9.4f}"
            )
        return "\n".join(lines)


def cluster_metrics(X: np.ndarray, k: int, seed: int = 0) -> dict:
    res = kmeans(X, k, seed)
    return {
        "k": k,
        "wcss": res.wcss,
        "silhouette": silhouette(X, res.assignments),
        "davies_bouldin": davies_bouldin(X, res.assignments),
    }


def k_sweep(X: np.ndarray, Y: np.ndarray | None, k_range, train_config=None, seed: int = 0, log=None) -> KSelectionReport:
    """Cluster metrics on standardized sensors plus a ClusteredMLP fit per k.

    Downstream nrmse (range-normalized) and r2 are measured on a seeded 20%
    hold-out that the network never trains on. ``Y=None`` skips the
    downstream fits (nrmse / r2 reported as NaN). A training failure at one
    k is recorded as NaN and the sweep continues.
    """
    from .embedding import Standardizer
    from .nn import TrainConfig, build_variant, evaluate, split_indices, train

    ks = list(k_range)
    if not ks or min(ks) < 2 or max(ks) > 12 or ks != list(range(ks[0], ks[-1] + 1)):
        raise ValueError("k range must be contiguous within [2, 12]")
    Xs = Standardizer.fit(X).transform(X)
    cfg = train_config or TrainConfig(max_epochs=50, seed=seed)
    report = KSelectionReport()
    if Y is not None:
        fit_idx, test_idx = split_indices(X.shape[0], 0.2, seed)
    for k in ks:
        row = cluster_metrics(Xs, k, seed)
        row["nrmse"] = row["r2"] = math.nan
        if Y is not None:
            try:
                arch = build_variant("ClusteredMLP", X.shape[1], Y.shape[1], cluster_k=k)
                model, _ = train(arch, X[fit_idx], Y[fit_idx], cfg)
                m = evaluate(model, X[test_idx], Y[test_idx])
                row["nrmse"], row["r2"] = m.nrmse_range, m.r2
            except (ArithmeticError, ValueError) as exc:
                if log is not None:
                    log(f"k={k}: training failed ({exc})")
        report.rows.append(row)
    return report


def plot_report(report: KSelectionReport, path: str | Path) -> None:
    """Four-panel figure (elbow, silhouette, Davies-Bouldin, downstream error). Needs matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 4, figsize=(16, 3.5))
    for ax, col in zip(axes, ("wcss", "silhouette", "davies_bouldin", "nrmse")):
        ax.plot(report.ks, report.column(col), marker="o")
        ax.set_xlabel("k")
        ax.set_title(col)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
