"""Kernel weighting of hypotheses and iterative hypothesis updating."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.stats import norm

from .errors import DegenerateInput, InvalidArgument
from .geometry import CorrespondenceSet, Hypothesis, fit_model, residuals

SCALE_FLOOR = 1e-9


def epanechnikov(lam):
    """0.75 (1 - lam^2) inside [-1, 1], zero outside. Works elementwise."""
    lam = np.asarray(lam, dtype=np.float64)
    out = np.where(np.abs(lam) <= 1.0, 0.75 * (1.0 - lam * lam), 0.0)
    return float(out) if out.ndim == 0 else out


def _kernel_integrals() -> tuple[float, float]:
    i1, _ = integrate.quad(lambda t: epanechnikov(t) ** 2, -1.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    i2, _ = integrate.quad(lambda t: t * t * epanechnikov(t), -1.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    return i1, i2


KERNEL_SQ_INTEGRAL, KERNEL_SECOND_MOMENT = _kernel_integrals()
BANDWIDTH_FACTOR = (243.0 * KERNEL_SQ_INTEGRAL / (35.0 * KERNEL_SECOND_MOMENT)) ** 0.2


@dataclass(frozen=True, eq=False)
class RankedResiduals:
    residuals: np.ndarray
    rank: np.ndarray

    @classmethod
    def of(cls, r) -> "RankedResiduals":
        r = np.asarray(r, dtype=np.float64)
        return cls(r, np.argsort(r, kind="stable"))

    def __len__(self) -> int:
        return len(self.residuals)


def estimate_scale(rr: RankedResiduals, kappa: int) -> float:
    """Inlier scale from the kappa-th smallest residual.

    The order statistic is divided by the standard normal quantile at
    (1 + kappa/n)/2 and floored at ``SCALE_FLOOR``.
    """
    n = len(rr)
    if not 1 <= kappa <= n:
        raise InvalidArgument(f"kappa must be in [1, {n}], got {kappa}")
    r_k = rr.residuals[rr.rank[kappa - 1]]
    q = norm.ppf((1.0 + kappa / n) / 2.0)
    if not np.isfinite(q):
        # kappa == n puts the quantile at infinity; fall back to the raw residual
        q = 1.0
    return max(float(r_k / q), SCALE_FLOOR)


def bandwidth(scale: float, n: int) -> float:
    if scale <= 0 or not math.isfinite(scale):
        raise InvalidArgument("scale must be positive and finite")
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    return BANDWIDTH_FACTOR * n ** -0.2 * scale


def kernel_weight(r: np.ndarray, scale: float) -> float:
    """Mean of EK(r/b) / (scale * b) over all residuals."""
    r = np.asarray(r, dtype=np.float64)
    n = len(r)
    b = bandwidth(scale, n)
    return float(epanechnikov(r / b).sum() / (n * scale * b))


def weigh(h: Hypothesis, data: CorrespondenceSet, kappa: int,
          rr: Optional[RankedResiduals] = None) -> Hypothesis:
    """Return ``h`` with its scale and kernel weight filled in."""
    if rr is None:
        rr = RankedResiduals.of(residuals(h, data))
    s = estimate_scale(rr, kappa)
    return h.with_score(kernel_weight(rr.residuals, s), s)


def stop_criterion(rank_t, rank_t1, rank_t2, support: int, epsilon: float) -> bool:
    """True when the top-``support`` sets of the last three rankings overlap by more than epsilon."""
    top = set(int(i) for i in rank_t[:support])
    o1 = len(top.intersection(int(i) for i in rank_t1[:support])) / support
    o2 = len(top.intersection(int(i) for i in rank_t2[:support])) / support
    return o1 > epsilon and o2 > epsilon


@dataclass(frozen=True)
class MhuConfig:
    support_size: int
    epsilon: float = 0.8
    t_max: int = 50
    scale_quantile: Optional[int] = None

    def __post_init__(self):
        if self.support_size < 1:
            raise InvalidArgument("support size must be positive")
        if not 0.0 < self.epsilon <= 1.0:
            raise InvalidArgument("epsilon must lie in (0, 1]")
        if self.t_max < 1:
            raise InvalidArgument("t_max must be positive")

    @property
    def kappa(self) -> int:
        return self.scale_quantile or self.support_size

    @classmethod
    def for_data(cls, n: int, kind, fraction: float = 0.10, **kw) -> "MhuConfig":
        """Support size ceil(fraction * n), raised to p + 2 when smaller."""
        support = max(math.ceil(fraction * n - 1e-9), kind.sample_size)
        if support > n:
            raise InvalidArgument(f"{n} correspondences cannot support a {kind.value} fit")
        return cls(support_size=support, **kw)


def mhu_trace(h: Hypothesis, data: CorrespondenceSet, cfg: MhuConfig) -> list[Hypothesis]:
    """Weighted iterates of the updating loop, first one being ``h`` itself."""
    n = len(data)
    p = h.kind.min_size
    nhat = cfg.support_size
    if not p + 2 <= nhat <= n:
        raise InvalidArgument(f"support size {nhat} must lie in [{p + 2}, {n}]")
    window = slice(nhat - p - 2, nhat)
    iterates = []
    ranks = []
    cur = h
    for t in range(1, cfg.t_max + 1):
        rr = RankedResiduals.of(residuals(cur, data))
        cur = weigh(cur, data, cfg.kappa, rr)
        iterates.append(cur)
        ranks.append(rr.rank)
        if t >= 3 and stop_criterion(ranks[-1], ranks[-2], ranks[-3], nhat, cfg.epsilon):
            break
        if t == cfg.t_max:
            break
        try:
            cur = fit_model(h.kind, data, rr.rank[window])
        except DegenerateInput:
            break
    return iterates


def mhu_update(h: Hypothesis, data: CorrespondenceSet, cfg: MhuConfig) -> Hypothesis:
    """Refine ``h`` and return its best-weighted iterate.

    The returned hypothesis carries the parameters, weight and scale of the
    winning iterate but keeps the sample of the original ``h``.
    """
    iterates = mhu_trace(h, data, cfg)
    best = 0
    for i, it in enumerate(iterates):
        if it.weight > iterates[best].weight:
            best = i
    win = iterates[best]
    meta = dict(h.meta, iterations=len(iterates), best_iterate=best)
    return Hypothesis(h.kind, win.params, h.sample, win.weight, win.scale, meta)


def mhu_update_all(hyps: list[Hypothesis], data: CorrespondenceSet, cfg: MhuConfig,
                   threads: int = 1) -> list[Hypothesis]:
    """Update every hypothesis; output order matches input order."""
    if threads <= 1 or len(hyps) < 2:
        return [mhu_update(h, data, cfg) for h in hyps]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(lambda h: mhu_update(h, data, cfg), hyps))
