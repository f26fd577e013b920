"""Non-overlapping patch grouping learned on the HR-MSI and reused on coefficients.

Patches tile the image on a regular ``sqrt_q x sqrt_q`` grid and are numbered
row-major over the ``(W / sqrt_q) x (H / sqrt_q)`` patch grid.  Inside a patch
the pixel index ``v = u + sqrt_q * w`` runs over the first spatial axis
fastest; a feature vector stacks bands after pixels (``v + q * band``).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError


def _check_tiling(shape, sqrt_q):
    w, h = shape[:2]
    if sqrt_q < 1 or w % sqrt_q or h % sqrt_q:
        raise DimensionError(f"patch size {sqrt_q} does not divide spatial dims {w}x{h}")
    return w // sqrt_q, h // sqrt_q


def to_patches(t, sqrt_q):
    """Rearrange ``W x H x B`` into ``(n_patches, B, q)``."""
    pw, ph = _check_tiling(t.shape, sqrt_q)
    b = t.shape[2]
    r = sqrt_q
    p = t.reshape(pw, r, ph, r, b).transpose(0, 2, 4, 3, 1)
    return p.reshape(pw * ph, b, r * r)


def from_patches(p, shape, sqrt_q):
    """Inverse of :func:`to_patches`."""
    pw, ph = _check_tiling(shape, sqrt_q)
    w, h, b = shape
    r = sqrt_q
    if p.shape != (pw * ph, b, r * r):
        raise DimensionError(f"patch array {p.shape} inconsistent with image {shape} and patch size {r}")
    return p.reshape(pw, ph, b, r, r).transpose(0, 4, 1, 3, 2).reshape(w, h, b)


def extract_patch_features(y, sqrt_q):
    """One row per patch: the vectorised ``sqrt_q x sqrt_q x s`` block."""
    p = to_patches(y, sqrt_q)
    return p.reshape(p.shape[0], -1)


@dataclass
class ClusterPartition:
    """Assignment of the patch grid to ``n_groups`` nonempty groups."""

    shape: tuple
    sqrt_q: int
    labels: np.ndarray
    groups: list = field(init=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.intp)
        pw, ph = _check_tiling(self.shape, self.sqrt_q)
        if self.labels.shape != (pw * ph,):
            raise DimensionError(f"{self.labels.size} labels for a {pw}x{ph} patch grid")
        n = int(self.labels.max()) + 1 if self.labels.size else 0
        self.groups = [np.flatnonzero(self.labels == g) for g in range(n)]
        if any(len(g) == 0 for g in self.groups):
            raise ParameterError("every group must contain at least one patch")

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def n_patches(self):
        return self.labels.size

    def group_sizes(self):
        return np.array([len(g) for g in self.groups])


def _sq_dists(x, x_sq, centers):
    d = x_sq[:, None] - 2.0 * (x @ centers.T) + np.sum(centers**2, axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeanspp_init(x, k, rng):
    n = x.shape[0]
    x_sq = np.sum(x**2, axis=1)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(x, x_sq, x[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a centre
            free = np.setdiff1d(np.arange(n), chosen)
            nxt = int(free[rng.integers(free.size)])
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(x, x_sq, x[[nxt]])[:, 0])
    return x[chosen].copy()


def kmeans(x, k, seed=0, max_iter=100):
    """Lloyd's k-means with k-means++ seeding; returns ``(labels, centers)``.

    Ties go to the lowest centre index.  A centre left without points is
    moved onto the point farthest from its own centre.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"number of clusters must be in [1, {n}], got {k}")
    if k == n:
        return np.arange(n), x.copy()
    rng = np.random.default_rng(seed)
    x_sq = np.sum(x**2, axis=1)
    centers = kmeanspp_init(x, k, rng)
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(x, x_sq, centers)
        new = np.argmin(d, axis=1)
        dist = d[np.arange(n), new]
        counts = np.bincount(new, minlength=k)
        used = set()
        for j in np.flatnonzero(counts == 0):
            order = np.argsort(-dist, kind="stable")
            i = next(int(i) for i in order if i not in used and counts[new[i]] > 1)
            used.add(i)
            counts[new[i]] -= 1
            new[i] = j
            counts[j] = 1
            dist[i] = 0.0
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            centers[j] = x[labels == j].mean(axis=0)
    return labels, centers


def kmeanspp_cluster(features, n_groups, seed, shape, sqrt_q, max_iter=100):
    """Cluster patch features and wrap the result as a :class:`ClusterPartition`."""
    labels, _ = kmeans(features, n_groups, seed=seed, max_iter=max_iter)
    return ClusterPartition(tuple(shape), sqrt_q, labels)


def learn_partition(y, n_groups, sqrt_q, seed=0):
    """Group the patches of the HR-MSI ``y``; ``n_groups`` is clamped to the patch count."""
    feats = extract_patch_features(y, sqrt_q)
    n_groups = min(int(n_groups), feats.shape[0])
    return kmeanspp_cluster(feats, n_groups, seed, y.shape, sqrt_q)


def gather_groups(c, part):
    """Group tensors ``K_n x L x q`` of the coefficient tensor ``c``."""
    if tuple(c.shape[:2]) != tuple(part.shape[:2]):
        raise DimensionError(f"tensor {c.shape} does not match partition built for {part.shape}")
    p = to_patches(c, part.sqrt_q)
    return [p[g] for g in part.groups]


def scatter_groups(groups, part, n_bands=None):
    """Inverse of :func:`gather_groups`."""
    if len(groups) != part.n_groups:
        raise DimensionError(f"{len(groups)} group tensors for {part.n_groups} groups")
    if n_bands is None:
        n_bands = groups[0].shape[1]
    q = part.sqrt_q**2
    p = np.empty((part.n_patches, n_bands, q))
    for g, idx in zip(groups, part.groups):
        if g.shape != (idx.size, n_bands, q):
            raise DimensionError(f"group tensor {g.shape}, expected {(idx.size, n_bands, q)}")
        p[idx] = g
    w, h = part.shape[:2]
    return from_patches(p, (w, h, n_bands), part.sqrt_q)


def write_group_sizes(path, part):
    with open(path, "w", newline="") as fh:
        fh.write("group_id,K_n\n")
        for g, size in enumerate(part.group_sizes()):
            fh.write(f"{g},{size}\n")
