"""Labeling, mislabeling error, a seeded RANSAC baseline and synthetic scenes."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, InsufficientData, InvalidSpec, LengthMismatch
from .geometry import (CorrespondenceSet, Hypothesis, ModelKind, fit_model,
                       homography_from_points, residuals, _canonical)
from .selection import DEFAULT_INLIER_T


def assign_labels(models: list[Hypothesis], data: CorrespondenceSet,
                  T: float = DEFAULT_INLIER_T) -> np.ndarray:
    """Label each point with its closest model (1-based) or 0 if too far.

    A point is kept only if its residual to the closest model is within
    ``T`` times that model's scale. Ties go to the lower model index.
    """
    n = len(data)
    if not models:
        return np.zeros(n, dtype=np.int64)
    R = np.vstack([residuals(h, data) for h in models])
    thr = np.array([T * h.scale for h in models])
    best = np.argmin(R, axis=0)
    ok = R[best, np.arange(n)] <= thr[best]
    return np.where(ok, best + 1, 0).astype(np.int64)


def fitting_error(pred, gt) -> float:
    """Percentage of mislabeled points under the best label matching.

    Predicted model labels are matched one-to-one to ground-truth structure
    labels by exhaustive search; the outlier label 0 always maps to 0.
    """
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    gt = np.asarray(gt, dtype=np.int64).reshape(-1)
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predicted labels vs {len(gt)} ground-truth labels")
    n = len(gt)
    if n == 0:
        return 0.0
    lp = int(pred.max(initial=0))
    lg = int(gt.max(initial=0))
    conf = np.zeros((lp + 1, lg + 1), dtype=np.int64)
    np.add.at(conf, (pred, gt), 1)
    # unmatched predicted labels map to nothing and count as errors
    targets = list(range(1, lg + 1)) + [None] * lp
    best = 0
    for perm in itertools.permutations(targets, lp):
        hit = conf[0, 0] + sum(conf[i + 1, t] for i, t in enumerate(perm) if t is not None)
        best = max(best, hit)
    return 100.0 * (n - best) / n


def ransac_baseline(data: CorrespondenceSet, kind: ModelKind, l: int, iterations: int,
                    threshold: float, seed: int) -> list[Hypothesis]:
    """Sequential RANSAC: fit, remove the inliers, repeat ``l`` times.

    Returned hypotheses have ``scale = threshold / DEFAULT_INLIER_T`` so they
    can be labeled with :func:`assign_labels` at the same pixel threshold.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    p = kind.min_size
    remaining = np.arange(len(data))
    models = []
    for _ in range(l):
        if len(remaining) < p:
            raise InsufficientData(f"{len(remaining)} points left, {p} needed")
        best, best_count, best_inl = None, -1, None
        for _ in range(iterations):
            idx = remaining[rng.choice(len(remaining), size=p, replace=False)]
            try:
                h = fit_model(kind, data, np.sort(idx))
            except DegenerateInput:
                continue
            r = residuals(h, data.subset(remaining))
            inl = remaining[r <= threshold]
            if len(inl) > best_count:
                best, best_count, best_inl = h, len(inl), inl
        if best is None:
            break
        best.meta["inliers"] = len(best_inl)
        models.append(best.with_score(float(best_count), threshold / DEFAULT_INLIER_T))
        remaining = np.setdiff1d(remaining, best_inl)
    return models


@dataclass(eq=False)
class SyntheticScene:
    """Correspondences with ground truth plus a view-1 image for SLIC."""

    data: CorrespondenceSet
    models: list
    image: np.ndarray
    kind: ModelKind
    seed: int
    regions: list = field(default_factory=list)


def _regions(l: int, width: int, height: int, frac: float) -> list[tuple]:
    cols = math.ceil(math.sqrt(l))
    rows = math.ceil(l / cols)
    cw, ch = width / cols, height / rows
    out = []
    for k in range(l):
        r, c = divmod(k, cols)
        w, h = cw * frac, ch * frac
        x0 = c * cw + (cw - w) / 2
        y0 = r * ch + (ch - h) / 2
        out.append((x0, y0, x0 + w, y0 + h))
    return out


def _random_homography(rng, region) -> np.ndarray:
    x0, y0, x1, y1 = region
    src = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    span = max(x1 - x0, y1 - y0)
    shift = rng.uniform(-0.3, 0.3, size=2) * span
    dst = src + shift + rng.uniform(-0.12, 0.12, size=(4, 2)) * span
    return homography_from_points(src, dst)


def _rotation(angles) -> np.ndarray:
    a, b, c = angles
    rx = np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])
    ry = np.array([[math.cos(b), 0, math.sin(b)], [0, 1, 0], [-math.sin(b), 0, math.cos(b)]])
    rz = np.array([[math.cos(c), -math.sin(c), 0], [math.sin(c), math.cos(c), 0], [0, 0, 1]])
    return rz @ ry @ rx


def _skew(t) -> np.ndarray:
    return np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])


def camera_matrix(width: int, height: int) -> np.ndarray:
    f = float(max(width, height))
    return np.array([[f, 0, width / 2], [0, f, height / 2], [0, 0, 1.0]])


def _texture(rng, width, height, regions) -> np.ndarray:
    img = np.empty((height, width, 3), dtype=np.float64)
    yy, xx = np.mgrid[0:height, 0:width]
    img[..., 0] = 90 + 40 * xx / max(width - 1, 1)
    img[..., 1] = 100 + 30 * yy / max(height - 1, 1)
    img[..., 2] = 110
    for k, (x0, y0, x1, y1) in enumerate(regions):
        hue = (k * 0.38 + 0.05) % 1.0
        colour = 127 + 110 * np.cos(2 * np.pi * (hue + np.array([0.0, 1 / 3, 2 / 3])))
        inside = (xx >= x0) & (xx < x1) & (yy >= y0) & (yy < y1)
        img[inside] = colour
    img += rng.normal(0.0, 3.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def generate_scene(structures: int, kind: ModelKind, inliers: int, outlier_frac: float,
                   sigma: float, width: int = 640, height: int = 480, seed: int = 0,
                   region_frac: float = 0.4) -> SyntheticScene:
    """Draw a labeled two-view scene with ``structures`` model instances.

    Each structure's view-1 points lie in its own coloured rectangle of the
    synthetic image; view-2 points follow the structure's model with
    Gaussian noise ``sigma`` added in view 2. Outliers are uniform in both
    views. ``outlier_frac`` is the fraction of outliers in the whole set.
    """
    if structures < 1 or inliers < 1:
        raise InvalidSpec("need at least one structure with at least one inlier")
    if not 0.0 <= outlier_frac < 1.0:
        raise InvalidSpec("outlier fraction must lie in [0, 1)")
    if sigma < 0 or width < 2 or height < 2 or not 0 < region_frac <= 1:
        raise InvalidSpec("invalid noise level, image size or region fraction")
    rng = np.random.default_rng(seed)
    n_in = structures * inliers
    n_out = int(round(n_in * outlier_frac / (1.0 - outlier_frac)))
    regions = _regions(structures, width, height, region_frac)
    K = camera_matrix(width, height)
    Kinv = np.linalg.inv(K)

    x1s, x2s, labels, models = [], [], [], []
    for k, reg in enumerate(regions):
        x0, y0, x1, y1 = reg
        p1 = np.column_stack([rng.uniform(x0, x1 - 1, inliers), rng.uniform(y0, y1 - 1, inliers)])
        if kind is ModelKind.HOMOGRAPHY:
            H = _random_homography(rng, reg)
            q = np.column_stack([p1, np.ones(inliers)]) @ H.T
            p2 = q[:, :2] / q[:, 2:3]
            models.append(H)
        else:
            R = _rotation(rng.uniform(-0.08, 0.08, size=3))
            direction = rng.normal(size=3)
            direction[2] *= 0.3
            t = direction / np.linalg.norm(direction)
            depth = rng.uniform(4.0, 10.0, inliers)
            X = (np.column_stack([p1, np.ones(inliers)]) @ Kinv.T) * depth[:, None]
            Xc = X @ R.T + t
            q = Xc @ K.T
            p2 = q[:, :2] / q[:, 2:3]
            models.append(_canonical(Kinv.T @ _skew(t) @ R @ Kinv))
        p2 = p2 + rng.normal(0.0, sigma, size=p2.shape)
        x1s.append(p1)
        x2s.append(p2)
        labels.append(np.full(inliers, k + 1))
    x1s.append(np.column_stack([rng.uniform(0, width - 1, n_out), rng.uniform(0, height - 1, n_out)]))
    x2s.append(np.column_stack([rng.uniform(0, width - 1, n_out), rng.uniform(0, height - 1, n_out)]))
    labels.append(np.zeros(n_out, dtype=np.int64))

    gt = np.concatenate(labels).astype(np.int64)
    scores = np.where(gt > 0, rng.uniform(0.6, 1.0, len(gt)), rng.uniform(0.0, 0.7, len(gt)))
    perm = rng.permutation(len(gt))
    data = CorrespondenceSet(np.vstack(x1s)[perm], np.vstack(x2s)[perm], scores[perm], gt[perm])
    image = _texture(rng, width, height, regions)
    return SyntheticScene(data, models, image, kind, seed, regions)
