"""Acceptance criteria. Each test prints one ``criterion N: PASS/FAIL`` line."""

import statistics
import time
import warnings

import numpy as np
import pytest
from scipy import ndimage

from _oracles import brute_combine, brute_fitting_error, brute_select, random_label_map
from sdfit.errors import ModelDeficit
from sdfit.evaluation import (assign_labels, fitting_error, generate_scene, ransac_baseline)
from sdfit.geometry import CorrespondenceSet, ModelKind, fit_model, residuals
from sdfit.grouping import assign_groups, combine_groups, fits_region, generate_initial_hypotheses
from sdfit.pipeline import PipelineConfig, fit
from sdfit.quality import (BANDWIDTH_FACTOR, KERNEL_SECOND_MOMENT, KERNEL_SQ_INTEGRAL,
                           MhuConfig, mhu_update, mhu_update_all)
from sdfit.selection import select_models
from sdfit.superpixel import SuperpixelMap, locate_many, slic_segment

pytestmark = pytest.mark.acceptance

NON_SLIC = ("sample", "update", "select", "label")


def timed_fit(scene, **kw):
    t0 = time.perf_counter()
    res = fit(scene.data, PipelineConfig(**kw), image=scene.image)
    return res, time.perf_counter() - t0


def test_c1_determinism(report):
    scenes = [(generate_scene(2, ModelKind.HOMOGRAPHY, 60, 0.5, 1.0, seed=3), "homography", 2),
              (generate_scene(1, ModelKind.FUNDAMENTAL, 100, 0.5, 1.0, seed=5), "fundamental", 1)]
    same, worst = True, 0.0
    for sc, kind, l in scenes:
        outs = []
        for threads in (1, 1, 2, 8):
            res, dt = timed_fit(sc, kind=kind, structures=l, threads=threads)
            outs.append(res.to_json(timings=False))
            worst = max(worst, dt)
        same &= all(o == outs[0] for o in outs)
    ok = same and worst < 5.0
    report(1, ok, f"byte-identical={same} (runs x2, threads 1/2/8), slowest fit {worst:.2f}s < 5s")
    assert ok


def gauss_legendre(f, deg=8):
    x, w = np.polynomial.legendre.leggauss(deg)
    return float((w * f(x)).sum())


def test_c2_kernel_constants(report):
    i1 = gauss_legendre(lambda t: (0.75 * (1 - t * t)) ** 2)
    i2 = gauss_legendre(lambda t: t * t * 0.75 * (1 - t * t))
    factor = (243 * i1 / (35 * i2)) ** 0.2
    ok = (abs(i1 - 0.6) <= 1e-9 and abs(i2 - 0.2) <= 1e-9
          and abs(KERNEL_SQ_INTEGRAL - 0.6) <= 1e-9 and abs(KERNEL_SECOND_MOMENT - 0.2) <= 1e-9
          and abs(factor - 1.8355) <= 1e-4 and abs(BANDWIDTH_FACTOR - factor) <= 1e-9)
    report(2, ok, f"int K^2={KERNEL_SQ_INTEGRAL:.12f} int t^2K={KERNEL_SECOND_MOMENT:.12f} "
                  f"factor={BANDWIDTH_FACTOR:.6f}")
    assert ok


def test_c3_two_homographies(report):
    rows = []
    for seed in (3, 10, 17):
        sc = generate_scene(2, ModelKind.HOMOGRAPHY, 60, 0.5, 1.0, seed=seed)
        res, dt = timed_fit(sc, kind="homography", structures=2, superpixels=150)
        rows.append((seed, res.error, dt))
    ok = all(e <= 5.0 and dt <= 5.0 for _, e, dt in rows)
    detail = ", ".join(f"seed {s}: {e:.2f}% in {dt:.2f}s" for s, e, dt in rows)
    report(3, ok, f"error <= 5% and <= 5s: {detail}")
    assert ok


def test_c4_fundamental_robustness(report, one_rigid_scene):
    sc = one_rigid_scene
    assert np.isclose((sc.data.gt == 0).mean(), 0.7, atol=0.01)
    sdf = [timed_fit(sc, kind="fundamental", structures=1)[0].error for _ in range(3)]
    rs = []
    for seed in range(50):
        models = ransac_baseline(sc.data, ModelKind.FUNDAMENTAL, 1, 500, 3.0, seed)
        rs.append(fitting_error(assign_labels(models, sc.data), sc.data.gt))
    sdf_std, ransac_std = statistics.pstdev(sdf), statistics.pstdev(rs)
    ok = sdf[0] <= 10.0 and sdf_std == 0.0 and ransac_std > 0.0
    report(4, ok, f"SDF error {sdf[0]:.2f}% std {sdf_std}; RANSAC(50 seeds x 500) "
                  f"mean {np.mean(rs):.2f}% std {ransac_std:.3f}")
    assert ok


def test_c5_mhu_recovery(report):
    counts = {}
    for kind, n in ((ModelKind.HOMOGRAPHY, 80), (ModelKind.FUNDAMENTAL, 100)):
        good = 0
        for seed in range(21, 31):
            d = generate_scene(1, kind, n, 0.5, 1.0, seed=seed).data
            ins, outs = np.flatnonzero(d.gt == 1), np.flatnonzero(d.gt == 0)
            half = kind.sample_size // 2
            h = fit_model(kind, d, np.r_[ins[:half], outs[:kind.sample_size - half]])
            cfg = MhuConfig.for_data(len(d), kind)
            out = mhu_update(h, d, cfg)
            top = np.argsort(residuals(out, d), kind="stable")[:cfg.support_size]
            good += (d.gt[top] == 1).mean() >= 0.9
        counts[kind.value] = good
    ok = all(c >= 9 for c in counts.values())
    report(5, ok, "seeds with >= 90% inlier top set: "
                  + ", ".join(f"{k} {c}/10" for k, c in counts.items()))
    assert ok


def test_c6_selection_oracle(report):
    checked = 0
    mismatches = 0
    for seed in range(12):
        kind = ModelKind.HOMOGRAPHY if seed % 2 == 0 else ModelKind.FUNDAMENTAL
        l = 1 + seed % 3
        sc = generate_scene(l, kind, 40, 0.4, 1.0, width=320, height=240, seed=seed)
        smap = slic_segment(sc.image, 6 + seed % 4)
        try:
            hyps = generate_initial_hypotheses(sc.data, smap, kind)
        except Exception:
            continue
        if len(hyps) > 12:
            continue
        hyps = mhu_update_all(hyps, sc.data, MhuConfig.for_data(len(sc.data), kind))
        for T in (1.0, 2.5, 6.0):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ModelDeficit)
                st = select_models(hyps, sc.data, l + 1, T)
            chosen, sets = brute_select(hyps, sc.data, l + 1, T)
            same = ([hyps.index(h) for h in st.selected] == chosen
                    and [set(s.tolist()) for s in st.inlier_sets] == sets)
            mismatches += not same
            checked += 1
    ok = checked >= 15 and mismatches == 0
    report(6, ok, f"{checked} selections on scenes with <= 12 hypotheses, {mismatches} mismatches")
    assert ok


def test_c7_fitting_error(report):
    rng = np.random.default_rng(7)
    ok = True
    for _ in range(200):
        n = int(rng.integers(1, 60))
        L = int(rng.integers(1, 5))
        gt = rng.integers(0, L + 1, n)
        ok &= fitting_error(gt, gt) == 0.0
        perm = np.r_[0, rng.permutation(np.arange(1, L + 1))]
        ok &= fitting_error(perm[gt], gt) == 0.0
        pred = rng.integers(0, 4, n)
        e = fitting_error(pred, gt)
        ok &= 0.0 <= e <= 100.0 and e == pytest.approx(brute_fitting_error(pred, gt))
    # k planted mislabels in well separated structures cost exactly 100k/n
    for k in range(0, 8):
        gt = np.repeat([0, 1, 2], [40, 30, 30])
        pred = gt.copy()
        idx = rng.choice(100, k, replace=False)
        pred[idx] = (pred[idx] + 1) % 3
        ok &= fitting_error(pred, gt) == 100.0 * k / 100
    report(7, ok, "identity 0%, permutation 0%, k planted mislabels = 100k/n, brute-force match")
    assert ok


def _connected(labels):
    four = [[0, 1, 0], [1, 1, 1], [0, 1, 0]]
    return all(ndimage.label(labels == k, structure=four)[1] == 1
               for k in range(labels.max() + 1))


def _best_time(f, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        f()
        best = min(best, time.perf_counter() - t0)
    return best


def test_c8_slic(report):
    rng = np.random.default_rng(8)
    small = rng.integers(0, 256, (240, 320, 3)).astype(np.uint8)
    big = rng.integers(0, 256, (480, 640, 3)).astype(np.uint8)
    ref = slic_segment(big, 150)
    covered = ref.labels.shape == big.shape[:2] and set(np.unique(ref.labels)) == set(
        range(ref.n_labels))
    connected = _connected(ref.labels)
    deterministic = all(np.array_equal(slic_segment(big, 150, threads=t).labels, ref.labels)
                        for t in (1, 2, 8))
    t_small = _best_time(lambda: slic_segment(small, 150))
    t_big = _best_time(lambda: slic_segment(big, 150))
    ratio = t_big / t_small
    ok = covered and connected and deterministic and ratio <= 5.0
    report(8, ok, f"coverage={covered} 4-connected={connected} deterministic={deterministic} "
                  f"4x pixels -> {ratio:.2f}x time")
    assert ok


def test_c9_group_bound(report):
    rng = np.random.default_rng(9)
    violations = mismatches = combined = 0
    for _ in range(100):
        lab = random_label_map(rng)
        smap = SuperpixelMap.from_labels(lab)
        h, w = lab.shape
        pts = np.column_stack([rng.uniform(0, w - 1, 60), rng.uniform(0, h - 1, 60)])
        d = CorrespondenceSet(pts, pts, np.ones(60))
        S = float(rng.uniform(2, 20))
        out = combine_groups(assign_groups(d, smap), smap, S)
        expected = brute_combine(smap.labels, locate_many(smap, pts).tolist(), S)
        mismatches += [g.key for g in out] != sorted(expected)
        for g in out:
            mismatches += (g.members, g.bbox) != expected[g.key]
            if len(g.superpixel_ids) == 2:
                combined += 1
                x0, y0, x1, y1 = g.bbox
                violations += not (x1 - x0 + 1 <= 2 * S and y1 - y0 + 1 <= 2 * S)
                violations += not fits_region(g.bbox, S)
    ok = violations == 0 and mismatches == 0 and combined > 0
    report(9, ok, f"100 maps, {combined} combined groups, {violations} over 2S x 2S, "
                  f"{mismatches} differences from brute force")
    assert ok


def test_c10_stage_costs(report):
    sc = generate_scene(2, ModelKind.HOMOGRAPHY, 60, 0.5, 1.0, seed=3)
    base = slic_segment(sc.image, 150).labels
    # twice the pixels: a second, point-free copy of the map with fresh ids;
    # M doubles with N so the grid interval S, and hence the groups, stay put
    doubled = np.hstack([base, base + base.max() + 1])

    def non_slic(label_map, m):
        cfg = PipelineConfig(kind="homography", structures=2, superpixels=m)
        timings = {}
        result = fit(sc.data, cfg, label_map=label_map, timings=timings)
        return sum(timings[k] for k in NON_SLIC), result

    # interleaved so that machine load drifts affect both sizes alike
    t1 = t2 = np.inf
    for _ in range(5):
        a, r1 = non_slic(base, 150)
        b, r2 = non_slic(doubled, 300)
        t1, t2 = min(t1, a), min(t2, b)
    ratio = t2 / t1
    same = r1.models == r2.models and np.array_equal(r1.labels, r2.labels)
    ok = ratio <= 1.3 and same
    report(10, ok, f"non-SLIC time {t1:.3f}s -> {t2:.3f}s at 2x pixels ({ratio:.2f}x), "
                   f"identical result={same}")
    assert ok
