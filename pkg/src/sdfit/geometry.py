"""Two-view models: homography and fundamental matrix.

Points are handled as ``(n, 2)`` float64 arrays. Solvers work on Hartley
normalized coordinates and return unit-Frobenius matrices with a fixed
sign, so identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DegenerateInput, InvalidArgument, SingularModel

# Nullspace of a design matrix must be one-dimensional: second smallest
# singular value relative to the largest.
NULLSPACE_RTOL = 1e-8
# Residual cap for points mapped to infinity.
RESIDUAL_CAP = 1e15
# Residuals below this are round-off and are reported as exactly zero, so
# exact fits rank by index instead of by floating-point noise.
RESIDUAL_FLOOR = 1e-9


class ModelKind(enum.Enum):
    HOMOGRAPHY = "homography"
    FUNDAMENTAL = "fundamental"

    @property
    def min_size(self) -> int:
        """Minimal subset size p."""
        return 4 if self is ModelKind.HOMOGRAPHY else 8

    @property
    def sample_size(self) -> int:
        """Subset size used for hypothesis generation (p + 2)."""
        return self.min_size + 2

    @classmethod
    def parse(cls, name: str) -> "ModelKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise InvalidArgument(f"unknown model kind {name!r}") from None


@dataclass(frozen=True)
class Correspondence:
    """A single two-view keypoint match."""

    x1: float
    y1: float
    x2: float
    y2: float
    score: float = 1.0
    gt_label: Optional[int] = None


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Column-oriented storage for n correspondences.

    Attributes
    ----------
    x1, x2 : (n, 2) arrays
        View-1 and view-2 pixel coordinates.
    scores : (n,) array
        Non-negative matching scores.
    gt : (n,) int array or None
        Ground-truth labels, 0 for outliers.
    """

    x1: np.ndarray
    x2: np.ndarray
    scores: np.ndarray
    gt: Optional[np.ndarray] = None

    def __post_init__(self):
        x1 = np.ascontiguousarray(self.x1, dtype=np.float64).reshape(-1, 2)
        x2 = np.ascontiguousarray(self.x2, dtype=np.float64).reshape(-1, 2)
        scores = np.ascontiguousarray(self.scores, dtype=np.float64).reshape(-1)
        if not (len(x1) == len(x2) == len(scores)):
            raise InvalidArgument("x1, x2 and scores must have equal length")
        if not (np.isfinite(x1).all() and np.isfinite(x2).all()):
            raise InvalidArgument("point coordinates must be finite")
        if (scores < 0).any() or not np.isfinite(scores).all():
            raise InvalidArgument("matching scores must be finite and >= 0")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "scores", scores)
        if self.gt is not None:
            gt = np.ascontiguousarray(self.gt, dtype=np.int64).reshape(-1)
            if len(gt) != len(x1):
                raise InvalidArgument("gt labels must match correspondence count")
            if (gt < 0).any():
                raise InvalidArgument("gt labels must be >= 0")
            object.__setattr__(self, "gt", gt)

    def __len__(self) -> int:
        return len(self.x1)

    def __getitem__(self, j: int) -> Correspondence:
        gt = None if self.gt is None else int(self.gt[j])
        return Correspondence(*self.x1[j], *self.x2[j], float(self.scores[j]), gt)

    @classmethod
    def from_list(cls, corrs: Sequence[Correspondence]) -> "CorrespondenceSet":
        n = len(corrs)
        x1 = np.array([(c.x1, c.y1) for c in corrs], dtype=np.float64).reshape(n, 2)
        x2 = np.array([(c.x2, c.y2) for c in corrs], dtype=np.float64).reshape(n, 2)
        scores = np.array([c.score for c in corrs], dtype=np.float64)
        labels = [c.gt_label for c in corrs]
        gt = None
        if n and all(g is not None for g in labels):
            gt = np.array(labels, dtype=np.int64)
        return cls(x1, x2, scores, gt)

    def subset(self, idx: Iterable[int]) -> "CorrespondenceSet":
        idx = np.asarray(list(idx), dtype=np.intp)
        gt = None if self.gt is None else self.gt[idx]
        return CorrespondenceSet(self.x1[idx], self.x2[idx], self.scores[idx], gt)


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """A model hypothesis together with the subset it was sampled from.

    ``sample`` holds indices into the correspondence array; ``weight``
    and ``scale`` are filled in once the hypothesis has been scored.
    """

    kind: ModelKind
    params: np.ndarray
    sample: tuple = ()
    weight: Optional[float] = None
    scale: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def with_score(self, weight: float, scale: float) -> "Hypothesis":
        return Hypothesis(self.kind, self.params, self.sample, weight, scale, dict(self.meta))


def _canonical(m: np.ndarray) -> np.ndarray:
    """Unit Frobenius norm, first clearly nonzero entry positive."""
    m = np.asarray(m, dtype=np.float64)
    norm = np.linalg.norm(m)
    if not np.isfinite(norm) or norm == 0.0:
        raise DegenerateInput("zero or non-finite model matrix")
    m = m / norm
    flat = m.reshape(-1)
    nz = np.flatnonzero(np.abs(flat) > 1e-12)
    if len(nz) and flat[nz[0]] < 0:
        m = -m
    return m + 0.0  # normalize -0.0


def hartley_normalize(points) -> tuple[np.ndarray, np.ndarray]:
    """Similarity-normalize 2D points.

    Returns the 3x3 transform T and the normalized points, which have zero
    centroid and mean distance sqrt(2) from the origin.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise DegenerateInput("need at least two points to normalize")
    centroid = pts.mean(axis=0)
    centred = pts - centroid
    mean_dist = np.sqrt((centred**2).sum(axis=1)).mean()
    if mean_dist <= 1e-12 * max(1.0, np.abs(centroid).max()):
        raise DegenerateInput("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    T = np.array([[s, 0.0, -s * centroid[0]],
                  [0.0, s, -s * centroid[1]],
                  [0.0, 0.0, 1.0]])
    return T, centred * s


def _nullvector(A: np.ndarray) -> np.ndarray:
    # Least-squares solution of A h = 0 with |h| = 1.
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    ncol = A.shape[1]
    sv = np.zeros(ncol)
    sv[: len(s)] = s
    if sv[0] == 0.0 or sv[-2] / sv[0] <= NULLSPACE_RTOL:
        raise DegenerateInput("design matrix has a multi-dimensional nullspace")
    return vt[-1]


def _as_points(subset) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(subset, CorrespondenceSet):
        return subset.x1, subset.x2
    cs = CorrespondenceSet.from_list(list(subset))
    return cs.x1, cs.x2


def homography_from_points(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Normalized DLT. Least squares when more than 4 points are given."""
    p1 = np.asarray(p1, dtype=np.float64).reshape(-1, 2)
    p2 = np.asarray(p2, dtype=np.float64).reshape(-1, 2)
    if len(p1) < 4:
        raise InvalidArgument("homography needs at least 4 correspondences")
    T1, q1 = hartley_normalize(p1)
    T2, q2 = hartley_normalize(p2)
    n = len(q1)
    x, y = q1[:, 0], q1[:, 1]
    u, v = q2[:, 0], q2[:, 1]
    zeros, ones = np.zeros(n), np.ones(n)
    A = np.empty((2 * n, 9))
    A[0::2] = np.column_stack([-x, -y, -ones, zeros, zeros, zeros, u * x, u * y, u])
    A[1::2] = np.column_stack([zeros, zeros, zeros, -x, -y, -ones, v * x, v * y, v])
    Hn = _nullvector(A).reshape(3, 3)
    # judged in normalized coordinates; pixel scaling alone spreads the spectrum
    sv = np.linalg.svd(Hn, compute_uv=False)
    if sv[-1] <= NULLSPACE_RTOL * sv[0]:
        raise DegenerateInput("homography is rank deficient")
    return _canonical(np.linalg.solve(T2, Hn @ T1))


def fundamental_from_points(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Normalized 8-point algorithm with rank-2 projection."""
    p1 = np.asarray(p1, dtype=np.float64).reshape(-1, 2)
    p2 = np.asarray(p2, dtype=np.float64).reshape(-1, 2)
    if len(p1) < 8:
        raise InvalidArgument("fundamental matrix needs at least 8 correspondences")
    T1, q1 = hartley_normalize(p1)
    T2, q2 = hartley_normalize(p2)
    x, y = q1[:, 0], q1[:, 1]
    u, v = q2[:, 0], q2[:, 1]
    A = np.column_stack([u * x, u * y, u, v * x, v * y, v, x, y, np.ones(len(x))])
    Fn = _rank2(_nullvector(A).reshape(3, 3))
    F = T2.T @ Fn @ T1
    # Denormalization keeps rank 2 only up to rounding; project again.
    return _rank2(_canonical(F))


def _rank2(F: np.ndarray) -> np.ndarray:
    U, s, Vt = np.linalg.svd(F)
    s[2] = 0.0
    return _canonical((U * s) @ Vt)


def fit_homography(subset) -> Hypothesis:
    p1, p2 = _as_points(subset)
    return Hypothesis(ModelKind.HOMOGRAPHY, homography_from_points(p1, p2))


def fit_fundamental(subset) -> Hypothesis:
    p1, p2 = _as_points(subset)
    return Hypothesis(ModelKind.FUNDAMENTAL, fundamental_from_points(p1, p2))


def fit_model(kind: ModelKind, data: CorrespondenceSet, idx: Sequence[int]) -> Hypothesis:
    """Fit ``kind`` to ``data[idx]`` and record ``idx`` as the sample."""
    idx = tuple(int(i) for i in idx)
    sel = np.asarray(idx, dtype=np.intp)
    if kind is ModelKind.HOMOGRAPHY:
        params = homography_from_points(data.x1[sel], data.x2[sel])
    else:
        params = fundamental_from_points(data.x1[sel], data.x2[sel])
    return Hypothesis(kind, params, idx)


def _homog(p: np.ndarray) -> np.ndarray:
    return np.column_stack([p, np.ones(len(p))])


def _transfer(H: np.ndarray, p: np.ndarray) -> np.ndarray:
    q = _homog(p) @ H.T
    w = q[:, 2:3]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = q[:, :2] / w
    out[~np.isfinite(out)] = RESIDUAL_CAP
    return out


def symmetric_transfer(H: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """sqrt((|H p1 - p2|^2 + |H^-1 p2 - p1|^2) / 2) for each match."""
    H = np.asarray(H, dtype=np.float64)
    sv = np.linalg.svd(H, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SingularModel("homography is not invertible")
    Hinv = np.linalg.inv(H)
    fwd = ((_transfer(H, p1) - p2) ** 2).sum(axis=1)
    bwd = ((_transfer(Hinv, p2) - p1) ** 2).sum(axis=1)
    return np.minimum(np.sqrt((fwd + bwd) / 2.0), RESIDUAL_CAP)


def sampson(F: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """First-order geometric error of the epipolar constraint, in pixels."""
    F = np.asarray(F, dtype=np.float64)
    h1, h2 = _homog(p1), _homog(p2)
    Fx1 = h1 @ F.T
    Ftx2 = h2 @ F
    e = (h2 * Fx1).sum(axis=1)
    den = Fx1[:, 0] ** 2 + Fx1[:, 1] ** 2 + Ftx2[:, 0] ** 2 + Ftx2[:, 1] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.abs(e) / np.sqrt(den)
    d[~np.isfinite(d)] = RESIDUAL_CAP
    return np.minimum(d, RESIDUAL_CAP)


RESIDUALS = {
    ModelKind.HOMOGRAPHY: symmetric_transfer,
    ModelKind.FUNDAMENTAL: sampson,
}


def residuals(h: Hypothesis, data: CorrespondenceSet) -> np.ndarray:
    """Residual of every correspondence under ``h`` (pixels)."""
    r = RESIDUALS[h.kind](h.params, data.x1, data.x2)
    r[r < RESIDUAL_FLOOR] = 0.0
    return r


def residual(h: Hypothesis, c: Correspondence) -> float:
    p1 = np.array([[c.x1, c.y1]])
    p2 = np.array([[c.x2, c.y2]])
    r = float(RESIDUALS[h.kind](h.params, p1, p2)[0])
    return 0.0 if r < RESIDUAL_FLOOR else r
