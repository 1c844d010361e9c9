"""K-means, agglomerative clustering, Gaussian mixtures, X-means and cluster-count selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
import numpy as np

from ..errors import TooFewPoints


class CountMethod(str, Enum):
    KMEANS_ELBOW = "kmeans_elbow"
    KMEANS_SILHOUETTE = "kmeans_silhouette"
    HIERARCHICAL_SILHOUETTE = "hierarchical_silhouette"
    GMM_BIC = "gmm_bic"
    GMM_AIC = "gmm_aic"
    XMEANS = "xmeans"


def _rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _sqdist(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float


def _kmeans_once(X, k, rng, max_iter):
    n = len(X)
    centers = [X[rng.integers(n)]]
    for _ in range(1, k):
        d = _sqdist(X, np.array(centers)).min(1)
        total = d.sum()
        i = rng.integers(n) if total <= 0 else rng.choice(n, p=d / total)
        centers.append(X[i])
    C = np.array(centers, dtype=float)
    labels = np.full(n, -1)
    for _ in range(max_iter):
        new = np.argmin(_sqdist(X, C), axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = X[labels == j]
            if len(members):
                C[j] = members.mean(0)
    inertia = float(_sqdist(X, C)[np.arange(n), labels].sum())
    return KMeansResult(labels, C, inertia)


def kmeans(X, k: int, rng=None, n_init: int = 5, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm from k-means++ seeds; best of ``n_init`` runs by inertia."""
    X = np.asarray(X, dtype=float)
    rng = _rng(rng)
    best = None
    for _ in range(n_init):
        res = _kmeans_once(X, k, rng, max_iter)
        if best is None or res.inertia < best.inertia - 1e-12:
            best = res
    return best


def silhouette(X, labels) -> float:
    """Mean silhouette coefficient; singleton clusters score 0, a single cluster gives 0."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    ks = np.unique(labels)
    if len(ks) < 2:
        return 0.0
    D = np.sqrt(_sqdist(X, X))
    s = np.zeros(len(X))
    for i in range(len(X)):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = D[i, own].sum() / (own.sum() - 1)
        b = min(D[i, labels == c].mean() for c in ks if c != labels[i])
        s[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(s.mean())


def agglomerative(X, k_values, linkage: str = "average") -> dict[int, np.ndarray]:
    """Bottom-up merging (average or single linkage); returns labels for every k requested."""
    X = np.asarray(X, dtype=float)
    n = len(X)
    D = np.sqrt(_sqdist(X, X))
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    active = np.ones(n, bool)
    member = np.arange(n)
    wanted = set(int(k) for k in k_values)
    out: dict[int, np.ndarray] = {}
    clusters = n
    if clusters in wanted:
        out[clusters] = np.unique(member, return_inverse=True)[1]
    while clusters > 1 and len(out) < len(wanted):
        i, j = np.unravel_index(np.argmin(D), D.shape)
        i, j = min(i, j), max(i, j)
        if linkage == "average":
            row = (D[i] * size[i] + D[j] * size[j]) / (size[i] + size[j])
        else:
            row = np.minimum(D[i], D[j])
        D[i, :] = row
        D[:, i] = row
        D[i, i] = np.inf
        D[j, :] = np.inf
        D[:, j] = np.inf
        size[i] += size[j]
        active[j] = False
        member[member == j] = i
        clusters -= 1
        if clusters in wanted:
            out[clusters] = np.unique(member, return_inverse=True)[1]
    return out


@dataclass
class GaussianMixture:
    """Full-covariance mixture fitted by EM; the per-iteration log-likelihood is kept in ``history``."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    log_likelihood: float
    history: list = field(default_factory=list)
    covariance_type: str = "full"

    @property
    def k(self) -> int:
        return len(self.weights)

    def n_parameters(self) -> int:
        k, d = self.means.shape
        per = {"full": d * (d + 1) // 2, "diag": d, "spherical": 1}[self.covariance_type]
        return k * d + k * per + k - 1

    def bic(self, n: int) -> float:
        return -2.0 * self.log_likelihood + self.n_parameters() * math.log(n)

    def aic(self, n: int | None = None) -> float:
        """Akaike criterion; given ``n`` it carries the small-sample correction (AICc)."""
        p = self.n_parameters()
        aic = -2.0 * self.log_likelihood + 2.0 * p
        if n is not None:
            aic += 2.0 * p * (p + 1) / max(n - p - 1, 1)
        return aic


def _log_gauss(X, mean, cov):
    d = X.shape[1]
    L = np.linalg.cholesky(cov)
    z = np.linalg.solve(L, (X - mean).T)
    return -0.5 * (d * math.log(2 * math.pi) + (z * z).sum(0)) - np.log(np.diag(L)).sum()


def _e_step(X, w, means, covs):
    logp = np.stack([np.log(w[j]) + _log_gauss(X, means[j], covs[j]) for j in range(len(w))], axis=1)
    mx = logp.max(1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(logp - mx).sum(1))
    return float(lse.sum()), np.exp(logp - lse[:, None])


def _m_step(X, resp, floor, covariance_type="full"):
    nk = resp.sum(0) + 1e-300
    w = nk / nk.sum()
    means = (resp.T @ X) / nk[:, None]
    covs = []
    for j in range(len(nk)):
        diff = X - means[j]
        c = (resp[:, j, None] * diff).T @ diff / nk[j]
        if covariance_type == "diag":
            c = np.diag(np.diag(c))
        elif covariance_type == "spherical":
            c = np.eye(X.shape[1]) * np.trace(c) / X.shape[1]
        # eigenvalue clipping is the exact maximiser over covariances with spectrum >= floor,
        # so every iteration is still a (generalised) EM step and the likelihood cannot drop
        lam, V = np.linalg.eigh(c)
        if lam[0] < floor:
            c = (V * np.maximum(lam, floor)) @ V.T
        covs.append(c)
    return w, means, np.array(covs)


def fit_gmm(X, k: int, rng=None, max_iter: int = 200, tol: float = 1e-8, floor: float = 3e-2,
            n_init: int = 2, covariance_type: str = "full") -> GaussianMixture:
    X = np.asarray(X, dtype=float)
    rng = _rng(rng)
    best = None
    scale = float(np.var(X)) if np.var(X) > 0 else 1.0
    for _ in range(n_init):
        km = kmeans(X, k, rng, n_init=1)
        resp = np.eye(k)[km.labels]
        w, means, covs = _m_step(X, resp, floor * scale, covariance_type)
        history = []
        ll = -np.inf
        for _ in range(max_iter):
            ll_new, resp = _e_step(X, w, means, covs)
            history.append(ll_new)
            if ll_new - ll < tol * max(1.0, abs(ll_new)):
                ll = ll_new
                break
            ll = ll_new
            w, means, covs = _m_step(X, resp, floor * scale, covariance_type)
        gm = GaussianMixture(w, means, covs, ll, history, covariance_type)
        if best is None or gm.log_likelihood > best.log_likelihood:
            best = gm
    return best


def _spherical_bic(X, labels, centers) -> float:
    # Pelleg and Moore's BIC of a hard-assigned spherical Gaussian model
    n, d = X.shape
    k = len(centers)
    if n <= k:
        return -np.inf
    sse = float(sum(((X[labels == j] - centers[j]) ** 2).sum() for j in range(k)))
    var = max(sse / (d * (n - k)), 1e-12)
    ll = 0.0
    for j in range(k):
        nj = int((labels == j).sum())
        if nj == 0:
            continue
        ll += nj * math.log(nj / n) - nj * d / 2 * math.log(2 * math.pi * var) - (nj - 1) * d / 2
    p = (k - 1) + k * d + 1
    return ll - p / 2 * math.log(n)


def xmeans(X, k_min: int = 2, k_max: int = 9, rng=None, min_child: int | None = None) -> int:
    """Start from ``k_min`` centres and split a cluster in two while the local BIC improves."""
    X = np.asarray(X, dtype=float)
    rng = _rng(rng)
    if min_child is None:
        min_child = max(X.shape[1] + 1, 3)
    centers = kmeans(X, k_min, rng).centers
    while len(centers) < k_max:
        labels = np.argmin(_sqdist(X, centers), 1)
        new = []
        split_any = False
        for j in range(len(centers)):
            pts = X[labels == j]
            if len(pts) < 4 or len(new) + (len(centers) - j) >= k_max:
                new.append(centers[j])
                continue
            child = kmeans(pts, 2, rng, n_init=2)
            parent_bic = _spherical_bic(pts, np.zeros(len(pts), int), centers[j][None])
            # a child holding a couple of stray points is an outlier, not a cluster
            tiny = np.bincount(child.labels, minlength=2).min() < min_child
            if not tiny and _spherical_bic(pts, child.labels, child.centers) > parent_bic:
                new.extend(child.centers)
                split_any = True
            else:
                new.append(centers[j])
        if not split_any:
            break
        centers = np.array(new)
        # refine all centres jointly
        for _ in range(50):
            labels = np.argmin(_sqdist(X, centers), 1)
            upd = np.array([X[labels == j].mean(0) if np.any(labels == j) else centers[j]
                            for j in range(len(centers))])
            if np.allclose(upd, centers):
                break
            centers = upd
    return int(np.clip(len(centers), k_min, k_max))


def elbow(ks, inertias) -> int:
    """Knee of a decreasing curve: the point farthest from the chord joining its ends."""
    ks = np.asarray(ks, dtype=float)
    y = np.asarray(inertias, dtype=float)
    if len(ks) < 3 or y[0] == y[-1]:
        return int(ks[0])
    x = (ks - ks[0]) / (ks[-1] - ks[0])
    yn = (y - y[-1]) / (y[0] - y[-1])
    # chord from (0, 1) to (1, 0): distance proportional to |x + yn - 1|
    dist = np.abs(x + yn - 1.0)
    return int(ks[int(np.argmax(dist))])


@dataclass(frozen=True)
class ClusterEstimate:
    k: int
    scores: dict
    low_confidence: bool


def cluster_count_estimate(points, method, k_range=(2, 9), rng=None,
                           weak_structure: float = 0.5) -> ClusterEstimate:
    """Estimate the number of clusters with one of six selection methods.

    When the chosen partition has a silhouette below ``weak_structure`` the
    data show no substantial grouping; the estimate then falls back to the
    smallest count in range and is flagged as low confidence.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    k_min, k_max = int(k_range[0]), int(k_range[1])
    if len(X) < k_max + 1:
        raise TooFewPoints(f"need at least {k_max + 1} points, got {len(X)}")
    method = CountMethod(method)
    rng = _rng(rng)
    ks = list(range(k_min, k_max + 1))
    scores: dict = {}
    partitions: dict = {}
    if method in (CountMethod.KMEANS_ELBOW, CountMethod.KMEANS_SILHOUETTE):
        for k in ks:
            res = kmeans(X, k, rng)
            partitions[k] = res.labels
            scores[k] = res.inertia if method is CountMethod.KMEANS_ELBOW else silhouette(X, res.labels)
        k_best = elbow(ks, [scores[k] for k in ks]) if method is CountMethod.KMEANS_ELBOW \
            else max(ks, key=lambda k: (scores[k], -k))
    elif method is CountMethod.HIERARCHICAL_SILHOUETTE:
        partitions = agglomerative(X, ks)
        scores = {k: silhouette(X, partitions[k]) for k in ks}
        k_best = max(ks, key=lambda k: (scores[k], -k))
    elif method in (CountMethod.GMM_BIC, CountMethod.GMM_AIC):
        for k in ks:
            gm = fit_gmm(X, k, rng)
            scores[k] = gm.bic(len(X)) if method is CountMethod.GMM_BIC else gm.aic(len(X))
            partitions[k] = None
        k_best = min(ks, key=lambda k: (scores[k], k))
    else:
        k_best = xmeans(X, k_min, k_max, rng)
    labels = partitions.get(k_best)
    if labels is None:
        labels = kmeans(X, k_best, rng).labels
    weak = silhouette(X, labels) < weak_structure
    return ClusterEstimate(k_min if weak else k_best, scores, weak)
