"""SLIC superpixels on view 1 and the label-map container used for grouping."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from skimage.color import rgb2lab
from skimage.measure import label as connected_components

from .errors import InvalidArgument, OutOfBounds

N_ITER = 10
DEFAULT_COMPACTNESS = 10.0


def grid_interval(n_pixels: int, n_superpixels: int) -> float:
    """Expected superpixel side length sqrt(N / M)."""
    if n_pixels <= 0 or n_superpixels <= 0:
        raise InvalidArgument("pixel and superpixel counts must be positive")
    return math.sqrt(n_pixels / n_superpixels)


@dataclass(frozen=True, eq=False)
class SuperpixelMap:
    """Per-pixel labels of view 1 plus derived geometry.

    Attributes
    ----------
    labels : (height, width) int32 array with values 0..M'-1
    m_requested : int
        Superpixel count asked for (M).
    S : float
        Grid interval sqrt(N / M).
    centers : (M', 2) array of (x, y) centroids
    bboxes : (M', 4) int array of inclusive (x0, y0, x1, y1)
    adjacency : tuple of frozensets, 4-connected label neighbours
    """

    labels: np.ndarray
    m_requested: int
    S: float
    centers: np.ndarray
    bboxes: np.ndarray
    adjacency: tuple

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def n_labels(self) -> int:
        return len(self.centers)

    @classmethod
    def from_labels(cls, labels, m_requested: int | None = None) -> "SuperpixelMap":
        """Build a map from an arbitrary integer label image.

        Label ids are compacted to 0..M'-1 preserving their sort order.
        """
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.size == 0:
            raise InvalidArgument("label map must be a non-empty 2D array")
        _, inverse = np.unique(labels, return_inverse=True)
        lab = inverse.reshape(labels.shape).astype(np.int32)
        k = int(lab.max()) + 1
        m = k if m_requested is None else int(m_requested)
        S = grid_interval(lab.size, m)
        return cls(lab, m, S, _centers(lab, k), _bboxes(lab, k), _adjacency(lab, k))


def _centers(lab: np.ndarray, k: int) -> np.ndarray:
    h, w = lab.shape
    ys, xs = np.indices((h, w))
    flat = lab.ravel()
    cnt = np.bincount(flat, minlength=k).astype(np.float64)
    cx = np.bincount(flat, xs.ravel(), minlength=k) / cnt
    cy = np.bincount(flat, ys.ravel(), minlength=k) / cnt
    return np.column_stack([cx, cy])


def _bboxes(lab: np.ndarray, k: int) -> np.ndarray:
    h, w = lab.shape
    ys, xs = np.indices((h, w))
    flat = lab.ravel()
    out = np.empty((k, 4), dtype=np.int64)
    out[:, 0] = w
    out[:, 1] = h
    out[:, 2] = -1
    out[:, 3] = -1
    np.minimum.at(out[:, 0], flat, xs.ravel())
    np.minimum.at(out[:, 1], flat, ys.ravel())
    np.maximum.at(out[:, 2], flat, xs.ravel())
    np.maximum.at(out[:, 3], flat, ys.ravel())
    return out


def _adjacent_pairs(lab: np.ndarray) -> np.ndarray:
    """Unique (a, b) label pairs with a < b sharing a 4-connected edge."""
    lab = lab.astype(np.int64)
    a = np.concatenate([lab[:, :-1].ravel(), lab[:-1, :].ravel()])
    b = np.concatenate([lab[:, 1:].ravel(), lab[1:, :].ravel()])
    diff = a != b
    lo = np.minimum(a[diff], b[diff])
    hi = np.maximum(a[diff], b[diff])
    k = int(lab.max()) + 1 if lab.size else 1
    keys = np.unique(lo * k + hi)
    return np.column_stack([keys // k, keys % k])


def _adjacency(lab: np.ndarray, k: int) -> tuple:
    nbrs = [set() for _ in range(k)]
    for a, b in _adjacent_pairs(lab):
        nbrs[a].add(int(b))
        nbrs[b].add(int(a))
    return tuple(frozenset(s) for s in nbrs)


def locate(smap: SuperpixelMap, p) -> int:
    """Label of the pixel nearest to point ``p = (x, y)``."""
    x, y = float(p[0]), float(p[1])
    # Round half away from zero, not to even.
    c = int(math.floor(x + 0.5))
    r = int(math.floor(y + 0.5))
    if not (0 <= r < smap.height and 0 <= c < smap.width):
        raise OutOfBounds(f"point ({x}, {y}) lies outside the {smap.width}x{smap.height} image")
    return int(smap.labels[r, c])


def locate_many(smap: SuperpixelMap, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    c = np.floor(pts[:, 0] + 0.5).astype(np.int64)
    r = np.floor(pts[:, 1] + 0.5).astype(np.int64)
    bad = (c < 0) | (c >= smap.width) | (r < 0) | (r >= smap.height)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise OutOfBounds(f"point {j} ({pts[j, 0]}, {pts[j, 1]}) lies outside the image")
    return smap.labels[r, c].astype(np.int64)


def _gradient(lab: np.ndarray) -> np.ndarray:
    # |I(x+1) - I(x-1)|^2 + |I(y+1) - I(y-1)|^2 in Lab, edge-replicated.
    p = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    dx = p[1:-1, 2:] - p[1:-1, :-2]
    dy = p[2:, 1:-1] - p[:-2, 1:-1]
    return (dx**2).sum(axis=2) + (dy**2).sum(axis=2)


def _seed_centers(lab: np.ndarray, M: int, S: float) -> np.ndarray:
    h, w = lab.shape[:2]
    nx = max(1, int(round(w / S)))
    ny = max(1, int(round(h / S)))
    while nx * ny > M and (nx > 1 or ny > 1):
        if nx >= ny and nx > 1:
            nx -= 1
        else:
            ny -= 1
    xs = np.floor((np.arange(nx) + 0.5) * w / nx).astype(np.int64)
    ys = np.floor((np.arange(ny) + 0.5) * h / ny).astype(np.int64)
    grad = _gradient(lab)
    seeds = []
    for y in ys:
        for x in xs:
            best = (grad[y, x], y, x)
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and grad[yy, xx] < best[0]:
                        best = (grad[yy, xx], yy, xx)
            _, by, bx = best
            seeds.append([bx, by, *lab[by, bx]])
    return np.array(seeds, dtype=np.float64)


def _assign_band(lab, centers, S, compactness, r0, r1):
    h, w = lab.shape[:2]
    labels = np.full((r1 - r0, w), -1, dtype=np.int32)
    dist = np.full((r1 - r0, w), np.inf)
    ratio = (compactness / S) ** 2
    for k, (cx, cy, L, A, B) in enumerate(centers):
        y0 = max(int(math.floor(cy - S)), r0)
        y1 = min(int(math.ceil(cy + S)) + 1, r1)
        x0 = max(int(math.floor(cx - S)), 0)
        x1 = min(int(math.ceil(cx + S)) + 1, w)
        if y0 >= y1 or x0 >= x1:
            continue
        win = lab[y0:y1, x0:x1]
        dc = (win[..., 0] - L) ** 2 + (win[..., 1] - A) ** 2 + (win[..., 2] - B) ** 2
        yy = np.arange(y0, y1)[:, None] - cy
        xx = np.arange(x0, x1)[None, :] - cx
        D = dc + (yy**2 + xx**2) * ratio
        sub = dist[y0 - r0:y1 - r0, x0:x1]
        better = D < sub
        sub[better] = D[better]
        labels[y0 - r0:y1 - r0, x0:x1][better] = k
    return labels


def _assign(lab, centers, S, compactness, threads):
    h = lab.shape[0]
    nb = max(1, min(threads, h))
    edges = np.linspace(0, h, nb + 1).astype(int)
    bands = [(edges[i], edges[i + 1]) for i in range(nb)]
    if nb == 1:
        parts = [_assign_band(lab, centers, S, compactness, 0, h)]
    else:
        with ThreadPoolExecutor(nb) as ex:
            parts = list(ex.map(lambda b: _assign_band(lab, centers, S, compactness, *b), bands))
    labels = np.concatenate(parts, axis=0)
    missing = labels < 0
    if missing.any():
        # Pixels outside every search window go to the spatially nearest centre.
        ys, xs = np.nonzero(missing)
        d = (xs[:, None] - centers[None, :, 0]) ** 2 + (ys[:, None] - centers[None, :, 1]) ** 2
        labels[ys, xs] = np.argmin(d, axis=1)
    return labels


def _update(lab, labels, centers):
    h, w = labels.shape
    k = len(centers)
    flat = labels.ravel()
    cnt = np.bincount(flat, minlength=k).astype(np.float64)
    ys, xs = np.indices((h, w))
    sums = [np.bincount(flat, xs.ravel(), minlength=k), np.bincount(flat, ys.ravel(), minlength=k)]
    for c in range(3):
        sums.append(np.bincount(flat, lab[..., c].ravel(), minlength=k))
    new = np.column_stack(sums)
    nonempty = cnt > 0
    out = centers.copy()
    out[nonempty] = new[nonempty] / cnt[nonempty, None]
    return out


def _enforce_connectivity(labels: np.ndarray, min_size: float) -> np.ndarray:
    """Make every label 4-connected.

    The largest component of each label keeps it (ties to the earlier
    component in raster order) and so does any component of at least
    ``min_size`` pixels. Remaining orphans are merged in rounds: each orphan
    touching an anchored segment joins the largest such segment, ties to the
    lower id, until no orphan is left.
    """
    comp = connected_components(labels, background=-1, connectivity=1) - 1
    nc = int(comp.max()) + 1
    flat = comp.ravel()
    size = np.bincount(flat, minlength=nc)
    first = np.full(nc, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size))
    comp_label = labels.ravel()[first]

    order = np.lexsort((first, -size, comp_label))
    is_first = np.ones(nc, dtype=bool)
    is_first[1:] = comp_label[order[1:]] != comp_label[order[:-1]]
    resolved = size >= min_size
    resolved[order[is_first]] = True

    pairs = _adjacent_pairs(comp)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    root = np.arange(nc)
    while not resolved.all():
        seg_size = np.bincount(root[resolved], size[resolved], minlength=nc)
        edge = ~resolved[src] & resolved[dst]
        if not edge.any():
            break
        u = src[edge]
        r = root[dst[edge]]
        pick = np.lexsort((r, -seg_size[r], u))
        u, r = u[pick], r[pick]
        head = np.ones(len(u), dtype=bool)
        head[1:] = u[1:] != u[:-1]
        root[u[head]] = r[head]
        resolved[u[head]] = True

    out = root[flat]
    # relabel 0..K-1 in raster order of first appearance
    _, idx, inv = np.unique(out, return_index=True, return_inverse=True)
    rank = np.empty(len(idx), dtype=np.int64)
    rank[np.argsort(idx, kind="stable")] = np.arange(len(idx))
    return rank[inv].reshape(labels.shape).astype(np.int32)


def slic_segment(image, M: int, compactness: float = DEFAULT_COMPACTNESS,
                 threads: int = 1, n_iter: int = N_ITER) -> SuperpixelMap:
    """Segment an RGB image into roughly M SLIC superpixels.

    Parameters
    ----------
    image : (H, W, 3) uint8 array
    M : int
        Requested number of superpixels.
    compactness : float
        Weight of the spatial term relative to CIELAB colour distance.
    threads : int
        Row bands assigned concurrently; the result does not depend on it.
    """
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise InvalidArgument("expected a non-empty (H, W, 3) RGB image")
    h, w = img.shape[:2]
    N = h * w
    if M < 1 or M > N:
        raise InvalidArgument(f"superpixel count must be in [1, {N}], got {M}")
    S = grid_interval(N, M)
    lab = rgb2lab(img.astype(np.uint8)).astype(np.float64)
    centers = _seed_centers(lab, M, S)
    threads = max(1, int(threads))
    for _ in range(n_iter):
        labels = _assign(lab, centers, S, compactness, threads)
        centers = _update(lab, labels, centers)
    labels = _enforce_connectivity(labels, S * S / 4.0)
    return SuperpixelMap.from_labels(labels, m_requested=M)
