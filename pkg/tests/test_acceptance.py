"""Acceptance suite: one test per criterion, each at its stated
tolerance and time budget, printing a single PASS line on success.

Run with output visible:  pytest tests/test_acceptance.py -v -s
"""

import math
import os
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from ordflare import metrics, raster_io
from ordflare.loss import (
    FlareClass,
    LossConfig,
    bce,
    bce_sf_instance,
    beta_weight,
    binary_label,
    grad_bce_sf,
    sigmoid,
)
from ordflare.preprocess import SummedAreaTable, max_usflux_window, process
from ordflare.trainer import (
    Scorer,
    SyntheticSpec,
    TrainConfig,
    compare_protocol,
    gen_synthetic,
    sgd_epoch,
)
from ordflare.dataset import Sample, UndersampleSpec, assign_partitions, undersample

DATA = os.path.join(os.path.dirname(__file__), "data")


def report(number, elapsed, budget, detail):
    print(f"ACCEPTANCE {number}: PASS ({elapsed * 1000:.1f} ms, budget "
          f"{budget * 1000:g} ms) {detail}", file=sys.stderr)
    assert elapsed < budget, f"criterion {number} exceeded its {budget}s budget"


def test_criterion_01_beta_table_exact():
    expected = {FlareClass.FQ: 10, FlareClass.A: 10 ** 2, FlareClass.B: 10 ** 3,
                FlareClass.C: 10 ** 4, FlareClass.M: 10 ** 2, FlareClass.X: 10}
    t0 = time.perf_counter()
    values = {c: beta_weight(c) for c in FlareClass}
    elapsed = time.perf_counter() - t0
    assert values == expected
    report(1, elapsed, 1e-3, "beta table matches exactly")


def test_criterion_02_alignment_over_logit_grid():
    logits = np.linspace(-10.0, 10.0, 1001)
    t0 = time.perf_counter()
    worst_extreme = 0.0
    worst_c = 0.0
    for z in logits:
        for c in (FlareClass.FQ, FlareClass.X):
            y = binary_label(c)
            plain = bce(sigmoid(z), y)
            worst_extreme = max(worst_extreme, abs(
                bce_sf_instance(z, y, c, LossConfig(1.0)) - plain))
        y = binary_label(FlareClass.C)
        plain = bce(sigmoid(z), y)
        worst_c = max(worst_c, abs(
            bce_sf_instance(z, y, FlareClass.C, LossConfig(4.0)) - plain))
    elapsed = time.perf_counter() - t0
    assert worst_extreme == 0.0
    assert worst_c <= 1e-15
    report(2, elapsed, 1.0,
           f"max |BCE-SF - BCE|: extremes {worst_extreme}, C-class {worst_c}")


def test_criterion_03_gradient_oracles():
    rng = np.random.default_rng(2024)
    h = 1e-5
    t0 = time.perf_counter()
    # loss gradient w.r.t. the logit
    for _ in range(100):
        z = float(rng.uniform(-8, 8))
        c = FlareClass(int(rng.integers(6)))
        y = binary_label(c)
        cfg = LossConfig(float(rng.uniform(1, 4)))
        fd = (bce_sf_instance(z + h, y, c, cfg)
              - bce_sf_instance(z - h, y, c, cfg)) / (2 * h)
        g = grad_bce_sf(z, y, c, cfg)
        assert abs(g - fd) <= 1e-5 * max(1.0, abs(g))
    # scorer parameter gradients
    checked = 0
    for kind in ("linear", "one_hidden"):
        for _ in range(50):
            dim = int(rng.integers(2, 5))
            n = int(rng.integers(2, 6))
            scorer = Scorer(kind, dim, hidden_dim=3, seed=int(rng.integers(10_000)))
            X = rng.normal(size=(n, dim))
            classes = rng.integers(0, 6, size=n)
            y = (classes >= FlareClass.M).astype(float)
            w = 2.0 / np.array([1.0, 2.0, 3.0, 4.0, 2.0, 1.0])[classes]

            def loss_at(flat, scorer=scorer, X=X, y=y, w=w):
                scorer.set_flat_params(flat)
                return float(np.mean(w * bce(sigmoid(scorer.forward(X)), y)))

            base = scorer.flat_params()
            dz = w * (sigmoid(scorer.forward(X)) - y) / n
            grads = scorer.grads(X, dz)
            flat_grad = np.concatenate([np.ravel(grads[k]) for k in scorer.param_names()])
            for idx in range(len(base)):
                up = base.copy()
                up[idx] += h
                down = base.copy()
                down[idx] -= h
                fd = (loss_at(up) - loss_at(down)) / (2 * h)
                assert abs(flat_grad[idx] - fd) <= 1e-5 * max(1.0, abs(flat_grad[idx]))
            loss_at(base)
            checked += 1
    elapsed = time.perf_counter() - t0
    report(3, elapsed, 5.0, f"loss + {checked} scorer configs vs central differences")


def test_criterion_04_sat_window_oracle():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    for _ in range(1000):
        h = int(rng.integers(16, 65))
        w = int(rng.integers(16, 65))
        k = int(rng.integers(2, 17))
        raster = rng.uniform(-4500.0, 4500.0, size=(h, w))
        # exhaustive direct summation over every window position
        quant = np.rint(np.abs(raster) * 1000.0).astype(np.int64)
        windows = np.lib.stride_tricks.sliding_window_view(quant, (k, k))
        sums = windows.sum(axis=(2, 3))
        flat = int(np.argmax(sums))
        expected_pos = (flat // sums.shape[1], flat % sums.shape[1])
        expected_sum = int(sums[expected_pos])
        pos = max_usflux_window(raster, k)
        got_sum = SummedAreaTable(raster).rect_sum_quantized(
            pos[0], pos[1], pos[0] + k, pos[1] + k)
        assert pos == expected_pos
        assert got_sum == expected_sum
    elapsed = time.perf_counter() - t0
    report(4, elapsed, 30.0, "1000 rasters, position and sum exact")


def test_criterion_05_near_limb_composite():
    t0 = time.perf_counter()
    composite = metrics.css(0.50, 0.23)
    zero_on_disagreement = metrics.css(-0.2, 0.1)
    elapsed = time.perf_counter() - t0
    assert composite == pytest.approx(0.34, abs=0.005)
    assert zero_on_disagreement == 0.0
    assert metrics.css(0.3, -0.4) == 0.0
    report(5, elapsed, 1e-3, f"css(0.50, 0.23) = {composite:.4f}")


def test_criterion_06_threshold_sweep_vs_brute_force():
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()
    for _ in range(200):
        n = int(rng.integers(6, 80))
        scores = rng.uniform(0, 1, size=n)
        labels = rng.integers(0, 2, size=n)
        labels[:2] = [0, 1]
        best_t, best_c = None, -1.0
        for i in range(1, 100):
            t = i / 100.0
            pred = scores >= t
            tp = int(np.sum(pred & (labels == 1)))
            fp = int(np.sum(pred & (labels == 0)))
            tn = int(np.sum(~pred & (labels == 0)))
            fn = int(np.sum(~pred & (labels == 1)))
            p, q = tp + fn, tn + fp
            value = 0.0
            if p and q:
                tss_v = tp / p - fp / q
                denom = p * (fn + tn) + (tp + fp) * q
                if denom:
                    hss_v = 2 * (tp * tn - fn * fp) / denom
                    value = 0.0 if tss_v * hss_v < 0 else math.sqrt(tss_v * hss_v)
            if value > best_c:
                best_t, best_c = t, value
        result = metrics.sweep_threshold(scores, labels)
        assert result.best_threshold == best_t
        assert result.best_css == pytest.approx(best_c, abs=1e-12)
    elapsed = time.perf_counter() - t0
    report(6, elapsed, 10.0, "200 random sets, smallest-threshold tie-break")


def test_criterion_07_pipeline_golden_files():
    t0 = time.perf_counter()
    for stem in ("7115_20170906T060000Z_+63.20", "401_20120314T120000Z_-12.50"):
        raster = raster_io.read_raster(os.path.join(DATA, "fixtures", stem + ".mgr"))
        mask = raster_io.read_mask(os.path.join(DATA, "fixtures", stem + ".msk"))
        image, _ = process(raster, mask)
        golden = raster_io.read_pgm(os.path.join(DATA, "golden", stem + ".pgm"))
        assert image.shape == (512, 512)
        np.testing.assert_array_equal(image, golden)
    # boundary bytes on the compact fixture: +/-256 G -> 0/255, |v|<=25 -> 128
    raster = raster_io.read_raster(
        os.path.join(DATA, "fixtures", "7115_20170906T060000Z_+63.20.mgr"))
    mask = raster_io.read_mask(
        os.path.join(DATA, "fixtures", "7115_20170906T060000Z_+63.20.msk"))
    image, _ = process(raster, mask)
    assert image[221, 216] == 255 and image[221, 217] == 0
    assert image[225, 216] == 128 and image[227, 216] == 128
    elapsed = time.perf_counter() - t0
    report(7, elapsed, 5.0, "golden PGMs bit-exact")


def test_criterion_08_partition_exclusivity_and_fl_retention():
    from datetime import datetime, timezone

    rng = np.random.default_rng(17)
    t0 = time.perf_counter()
    samples = []
    for ar in range(500):
        month = int(rng.integers(1, 13))
        onset_day = int(rng.integers(1, 26))
        n_obs = int(rng.integers(2, 6))
        for i in range(n_obs):
            cls = FlareClass(int(rng.integers(6)))
            obs = datetime(2014, month, onset_day, i, tzinfo=timezone.utc)
            samples.append(Sample(
                sample_id=f"h{ar}_{i}", ar_id=f"h{ar}", observation_time=obs,
                longitude_deg=float(rng.uniform(-90, 90)),
                raster_path=f"h{ar}_{i}.mgr", flare_class=cls,
                label="FL" if binary_label(cls) else "NF"))
    split = assign_partitions(samples)
    by_ar = {}
    for s in split:
        by_ar.setdefault(s.ar_id, set()).add(s.partition)
    assert all(len(parts) == 1 for parts in by_ar.values())
    kept = undersample(split, UndersampleSpec(seed=5))
    fl_in = sorted(s.sample_id for s in split if s.label == "FL")
    fl_out = sorted(s.sample_id for s in kept if s.label == "FL")
    assert fl_in == fl_out
    elapsed = time.perf_counter() - t0
    report(8, elapsed, 5.0,
           f"{len(by_ar)} ARs single-partition, {len(fl_in)} FL samples retained")


def test_criterion_09_loss_scaling_lr_equivalence():
    spec = SyntheticSpec(seed=31)
    train_set, _, _ = gen_synthetic(spec)
    t0 = time.perf_counter()
    worst = 0.0
    for c, lr in ((2.0, 0.05), (4.0, 0.02)):
        base = dict(weight_decay=0.0, batch_size=16, epochs=10, seed=13)
        runs = []
        for alpha, eta in ((c, lr), (1.0, c * lr)):
            cfg = TrainConfig(initial_lr=eta, alpha=alpha, loss_kind="bce-sf", **base)
            scorer = Scorer("linear", train_set.dim, seed=cfg.seed)
            rng = np.random.default_rng(cfg.seed)
            for _ in range(cfg.epochs):
                sgd_epoch(scorer, train_set, cfg, eta, rng)
            runs.append(scorer.flat_params())
        worst = max(worst, float(np.max(np.abs(runs[0] - runs[1]))))
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-10
    report(9, elapsed, 10.0, f"max trajectory divergence {worst:.2e}")


def test_criterion_10_end_to_end_protocol(tmp_path):
    t0 = time.perf_counter()
    spec = SyntheticSpec(noise=0.35, dim=8, seed=0)
    cfg_bce = TrainConfig(initial_lr=0.01, weight_decay=0.001, batch_size=64,
                          epochs=50, alpha=1.0, loss_kind="bce", seed=0)
    cfg_bcesf = replace(cfg_bce, loss_kind="bce-sf", alpha=2.0)
    first = compare_protocol(range(5), cfg_bce, cfg_bcesf, spec)
    second = compare_protocol(range(5), cfg_bce, cfg_bcesf, spec)
    # determinism: identical reports, byte for byte
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    first.to_csv(p1)
    second.to_csv(p2)
    assert p1.read_bytes() == p2.read_bytes()
    # both losses clear CSS >= 0.6 on the moderately separable spec
    for seed in first.seeds:
        for kind in ("bce", "bce-sf"):
            assert first.overall[(seed, kind)].css >= 0.6, (seed, kind)
    # per-zone rows: (seed, loss, zone) triples in order
    keys = [(s, k, r.zone.hi) for s, k, r in first.rows]
    assert keys == [(s, k, hi) for s in range(5) for k in ("bce", "bce-sf")
                    for hi in (30.0, 60.0, 90.0)]
    elapsed = time.perf_counter() - t0
    worst = min(first.overall[key].css for key in first.overall)
    report(10, elapsed, 120.0,
           f"min CSS {worst:.3f}, mean delta {first.mean_css_delta:+.4f}")
