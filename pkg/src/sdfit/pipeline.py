"""End-to-end fitting: segment, sample, update, select, label."""

from __future__ import annotations

import contextlib
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import io
from .errors import FitError, InvalidArgument, ModelDeficit
from .evaluation import assign_labels, fitting_error
from .geometry import CorrespondenceSet, ModelKind
from .grouping import generate_initial_hypotheses
from .quality import MhuConfig, mhu_update_all
from .selection import DEFAULT_INLIER_T, select_models
from .superpixel import DEFAULT_COMPACTNESS, SuperpixelMap, slic_segment

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    kind: ModelKind = ModelKind.HOMOGRAPHY
    structures: int = 1
    superpixels: int = 150
    compactness: float = DEFAULT_COMPACTNESS
    support_frac: float = 0.10
    epsilon: float = 0.8
    t_max: int = 50
    inlier_t: float = DEFAULT_INLIER_T
    threads: int = 1
    correspondences: Optional[str] = None
    image: Optional[str] = None
    labels: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            self.kind = ModelKind.parse(self.kind)
        if self.structures < 1:
            raise InvalidArgument("structure count must be >= 1")
        if self.superpixels < 1:
            raise InvalidArgument("superpixel count must be >= 1")
        if not 0.0 < self.support_frac <= 1.0:
            raise InvalidArgument("support fraction must lie in (0, 1]")
        if self.inlier_t <= 0:
            raise InvalidArgument("inlier threshold multiplier must be positive")

    def echo(self) -> dict:
        """Algorithm parameters only; paths and thread count do not affect results."""
        d = asdict(self)
        d["kind"] = self.kind.value
        for key in ("correspondences", "image", "labels", "output", "threads"):
            d.pop(key)
        return d


@dataclass
class FitResult:
    models: list
    labels: np.ndarray
    config: dict
    n_hypotheses: int
    deficit: bool = False
    error: Optional[float] = None
    timings: dict = field(default_factory=dict)

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "config": self.config,
            "deficit": self.deficit,
            "error": self.error,
            "labels": [int(v) for v in self.labels],
            "models": self.models,
            "n_hypotheses": self.n_hypotheses,
        }
        if timings:
            d["timings"] = self.timings
        return d

    def to_json(self, timings: bool = True) -> str:
        return io.dumps_stable(self.to_dict(timings))


@contextlib.contextmanager
def _stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except FitError as exc:
        exc.stage = name
        raise
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - t0


def fit(data: CorrespondenceSet, cfg: PipelineConfig, image: Optional[np.ndarray] = None,
        label_map: Optional[np.ndarray] = None, timings: Optional[dict] = None) -> FitResult:
    """Run the full method on in-memory inputs.

    Exactly one of ``image`` (RGB, segmented with SLIC) or ``label_map``
    (precomputed superpixels) must be given.
    """
    if (image is None) == (label_map is None):
        raise InvalidArgument("pass exactly one of image or label_map")
    timings = {} if timings is None else timings
    kind = cfg.kind
    with _stage("segment", timings):
        if label_map is not None:
            smap = SuperpixelMap.from_labels(label_map, m_requested=cfg.superpixels)
        else:
            smap = slic_segment(image, cfg.superpixels, cfg.compactness, threads=cfg.threads)
    with _stage("sample", timings):
        hyps = generate_initial_hypotheses(data, smap, kind)
    with _stage("update", timings):
        mhu = MhuConfig.for_data(len(data), kind, cfg.support_frac,
                                 epsilon=cfg.epsilon, t_max=cfg.t_max)
        hyps = mhu_update_all(hyps, data, mhu, threads=cfg.threads)
    with _stage("select", timings):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ModelDeficit)
            state = select_models(hyps, data, cfg.structures, cfg.inlier_t)
        if state.deficit:
            log.warning("only %d of %d models could be selected",
                        len(state.selected), cfg.structures)
    with _stage("label", timings):
        labels = assign_labels(state.selected, data, cfg.inlier_t)
        error = None if data.gt is None else fitting_error(labels, data.gt)
    models = [
        {
            "kind": h.kind.value,
            "params": [float(v) for v in h.params.reshape(-1)],
            "weight": float(h.weight),
            "scale": float(h.scale),
            "inliers": [int(i) for i in ins],
            "sample": [int(i) for i in h.sample],
        }
        for h, ins in zip(state.selected, state.inlier_sets)
    ]
    return FitResult(models, labels, cfg.echo(), len(hyps), state.deficit, error, timings)


def run_pipeline(cfg: PipelineConfig) -> FitResult:
    """Load inputs named in ``cfg``, fit, and write the result if requested."""
    if cfg.correspondences is None:
        raise InvalidArgument("no correspondence file given")
    t0 = time.perf_counter()
    timings: dict = {}
    with _stage("load", timings):
        data = io.read_correspondences(cfg.correspondences)
        image = label_map = None
        if cfg.labels is not None:
            label_map = io.read_label_map(cfg.labels)
        elif cfg.image is not None:
            image = io.read_image(cfg.image)
        else:
            raise InvalidArgument("need --image or --labels")
    result = fit(data, cfg, image=image, label_map=label_map, timings=timings)
    timings["total"] = time.perf_counter() - t0
    if cfg.output is not None:
        with open(cfg.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(result.to_json())
    return result
