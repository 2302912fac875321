"""Command-line pipeline driver.

One executable, ten subcommands covering the whole experiment:
preprocess, label, split, undersample, augment, train, evaluate, sweep,
compare, report.  Exit codes: 0 success, 1 usage error, 2 data error,
3 numeric/training failure.  All randomness flows from explicit --seed
flags, so identical inputs and seeds give byte-identical outputs.

Raw input rasters are discovered as ``<ar_id>_<YYYYMMDDTHHMMSSZ>_<lon>.mgr``
files (longitude in signed degrees) with a matching ``.msk`` mask next to
them; the stem becomes the sample id.
"""

import argparse
import concurrent.futures
import csv
import os
import re
import sys
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__, augment, dataset, metrics, preprocess, raster_io, trainer
from .loss import sigmoid

_STEM_RE = re.compile(r"^(?P<ar>[^_]+)_(?P<ts>\d{8}T\d{6}Z)_(?P<lon>[+-]?\d+(?:\.\d+)?)$")

TRAIN_PARTITIONS = set(dataset.PARTITION_ROLES["train"])


class _Parser(argparse.ArgumentParser):
    """argparse with the exit-code contract (usage errors exit 1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _data_error(message):
    raise dataset.ManifestError(message)


def parse_stem(stem):
    """(ar_id, observation time, longitude) from a raster file stem."""
    m = _STEM_RE.match(stem)
    if m is None:
        _data_error(
            f"cannot parse sample metadata from {stem!r}; expected "
            "<ar_id>_<YYYYMMDDTHHMMSSZ>_<lon>")
    ts = datetime.strptime(m.group("ts"), "%Y%m%dT%H%M%SZ").replace(tzinfo=timezone.utc)
    return m.group("ar"), ts, float(m.group("lon"))


def _resolve(path, manifest_path):
    """Resolve a manifest raster path against cwd, then the manifest dir."""
    if os.path.isabs(path) or os.path.exists(path):
        return path
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), path)


# ----------------------------------------------------------------- preprocess

def _preprocess_one(stem, in_dir, out_dir, opts):
    raster = raster_io.read_raster(os.path.join(in_dir, stem + ".mgr"))
    mask = raster_io.read_mask(os.path.join(in_dir, stem + ".msk"))
    result = preprocess.process(
        raster, mask,
        min_width=opts.min_width, cap=opts.cap, noise_floor=opts.noise_floor)
    if result is None:
        return None
    image, framed = result
    raster_io.write_raster(framed, os.path.join(out_dir, stem + ".mgr"))
    raster_io.write_pgm(image, os.path.join(out_dir, stem + ".pgm"))
    return os.path.join(out_dir, stem + ".mgr")


def cmd_preprocess(args):
    stems = sorted(
        name[:-4] for name in os.listdir(args.in_dir) if name.endswith(".mgr"))
    if not stems:
        _data_error(f"no .mgr rasters found in {args.in_dir}")
    for stem in stems:
        if not os.path.exists(os.path.join(args.in_dir, stem + ".msk")):
            _data_error(f"missing mask for {stem}.mgr")
    os.makedirs(args.out_dir, exist_ok=True)
    metadata = {stem: parse_stem(stem) for stem in stems}
    if args.jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
            paths = list(pool.map(
                lambda s: _preprocess_one(s, args.in_dir, args.out_dir, args), stems))
    else:
        paths = [_preprocess_one(s, args.in_dir, args.out_dir, args) for s in stems]
    samples = []
    dropped = 0
    for stem, path in zip(stems, paths):
        if path is None:
            dropped += 1
            continue
        ar_id, ts, lon = metadata[stem]
        samples.append(dataset.Sample(
            sample_id=stem, ar_id=ar_id, observation_time=ts,
            longitude_deg=lon, raster_path=path))
    dataset.write_manifest(samples, args.manifest)
    print(f"processed {len(samples)} rasters ({dropped} dropped by the size filter)")
    print(f"manifest: {args.manifest}")
    return 0


# ---------------------------------------------------------- label and split

def cmd_label(args):
    catalog = dataset.load_catalog(args.catalog)
    samples = dataset.load_manifest(args.manifest)
    labeled = []
    for s in samples:
        cls, lab = dataset.label_sample(s.observation_time, s.ar_id, catalog)
        labeled.append(replace(s, flare_class=cls, label=lab))
    dataset.write_manifest(labeled, args.manifest)
    n_fl = sum(1 for s in labeled if s.label == "FL")
    print(f"labeled {len(labeled)} samples: FL={n_fl} NF={len(labeled) - n_fl}")
    return 0


def cmd_split(args):
    samples = dataset.load_manifest(args.manifest)
    if not samples:
        _data_error(f"{args.manifest}: empty manifest")
    split = dataset.assign_partitions(samples)
    dataset.write_manifest(split, args.manifest)
    counts = {}
    for s in split:
        counts[s.partition] = counts.get(s.partition, 0) + 1
    print("partitions: " + "  ".join(f"P{k}={v}" for k, v in sorted(counts.items())))
    return 0


# -------------------------------------------------------------- undersample

def cmd_undersample(args):
    samples = dataset.load_manifest(args.manifest)
    spec = dataset.UndersampleSpec(seed=args.seed, rates={
        dataset.FlareClass.FQ: args.fq,
        dataset.FlareClass.A: args.abc,
        dataset.FlareClass.B: args.abc,
        dataset.FlareClass.C: args.abc,
    })
    has_partitions = any(s.partition is not None for s in samples)
    if has_partitions:
        pool = [s for s in samples if s.partition in TRAIN_PARTITIONS]
        rest = [s for s in samples if s.partition not in TRAIN_PARTITIONS]
    else:
        pool, rest = samples, []
    kept = dataset.undersample(pool, spec)
    out = args.out or args.manifest
    keep = {id(s) for s in kept} | {id(s) for s in rest}
    merged = [s for s in samples if id(s) in keep]  # original manifest order
    dataset.write_manifest(merged, out)
    print(f"kept {len(merged)} of {len(samples)} samples "
          f"(undersampled {len(pool)} training rows down to {len(kept)})")
    return 0


# ------------------------------------------------------------------ augment

def cmd_augment(args):
    samples = dataset.load_manifest(args.manifest)
    base = [s for s in samples if not s.augmented]
    selected = [s for s in base if s.label == args.only_class]
    if any(s.label is None for s in base):
        _data_error("manifest has unlabeled rows; run `label` first")
    has_partitions = any(s.partition is not None for s in base)
    if has_partitions:
        selected = [s for s in selected if s.partition in TRAIN_PARTITIONS]
    os.makedirs(args.out_dir, exist_ok=True)
    new_rows = []
    for s in selected:
        raster = raster_io.read_raster(_resolve(s.raster_path, args.manifest))
        for kind in augment.AUGMENT_KINDS:
            suffix = augment.AUGMENT_SUFFIXES[kind]
            if kind == "random_noise":
                spec = augment.AugmentSpec(kind, seed=augment.sample_seed(s.sample_id, args.seed))
            else:
                spec = augment.AugmentSpec(kind)
            out_path = os.path.join(args.out_dir, f"{s.sample_id}_{suffix}.mgr")
            raster_io.write_raster(augment.apply(spec, raster), out_path)
            new_rows.append(replace(
                s, sample_id=f"{s.sample_id}_{suffix}", raster_path=out_path,
                augmented=True))
    dataset.write_manifest(base + new_rows, args.manifest)
    print(f"augmented {len(selected)} {args.only_class} samples -> {len(new_rows)} new rasters")
    return 0


# -------------------------------------------------------------------- train

def _featurize(samples, manifest_path):
    feats, classes, labels, lons = [], [], [], []
    for s in samples:
        raster = raster_io.read_raster(_resolve(s.raster_path, manifest_path))
        image = preprocess.scale_to_bytes(raster)
        feats.append(trainer.pool_features(image))
        classes.append(int(s.flare_class))
        labels.append(1 if s.label == "FL" else 0)
        lons.append(s.longitude_deg)
    return trainer.SampleSet(
        features=np.asarray(feats), classes=np.asarray(classes),
        labels=np.asarray(labels), longitudes=np.asarray(lons))


def _role_sets(samples, manifest_path):
    for s in samples:
        if s.flare_class is None or s.label is None or s.partition is None:
            _data_error(f"sample {s.sample_id} lacks label or partition; "
                        "run `label` and `split` first")
    roles = dataset.split_roles({s.partition for s in samples})
    out = {}
    for role, parts in roles.items():
        rows = [s for s in samples if s.partition in parts]
        out[role] = _featurize(rows, manifest_path)
    return out


def cmd_train(args):
    cfg = trainer.parse_config(args.config)
    samples = dataset.load_manifest(args.manifest)
    sets = _role_sets(samples, args.manifest)
    scorer, history, threshold = trainer.train(
        cfg, sets["train"], sets["validation"], kind=args.scorer,
        hidden_dim=args.hidden_dim)
    trainer.save_scorer(scorer, args.out, threshold=threshold)
    print(f"trained {args.scorer} scorer for {cfg.epochs} epochs "
          f"({cfg.loss_kind}, alpha={cfg.alpha})")
    print(f"final train loss {history.train_loss[-1]:.6f}, "
          f"val loss {history.val_loss[-1]:.6f}, lr {history.lr[-1]:g}")
    print(f"calibrated threshold: {threshold}")
    print(f"model: {args.out}")
    return 0


# ----------------------------------------------------------------- evaluate

def _parse_zones(text):
    if text.startswith("annular:"):
        zones = []
        for chunk in text[len("annular:"):].split(","):
            lo, sep, hi = chunk.partition("-")
            if not sep:
                _data_error(f"bad annular zone {chunk!r}; expected lo-hi")
            zones.append(metrics.ZoneSpec(float(lo), float(hi), "annular"))
        return zones
    return [metrics.ZoneSpec(0.0, float(tok), "cumulative") for tok in text.split(",")]


def _read_two_column(path, value_name, conv):
    out = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "sample_id" not in reader.fieldnames \
                or value_name not in reader.fieldnames:
            _data_error(f"{path}: expected columns sample_id,{value_name}")
        for lineno, row in enumerate(reader, start=2):
            try:
                out[row["sample_id"]] = conv(row[value_name])
            except (TypeError, ValueError) as exc:
                raise dataset.ManifestError(f"{path}:{lineno}: {exc}") from exc
    if not out:
        _data_error(f"{path}: no rows")
    return out


def _parse_label(text):
    t = text.strip()
    if t in ("FL", "1"):
        return 1
    if t in ("NF", "0"):
        return 0
    raise ValueError(f"label must be FL/NF or 1/0, got {text!r}")


def cmd_evaluate(args):
    samples = dataset.load_manifest(args.manifest)
    if args.partition != "all":
        samples = [s for s in samples if s.partition == int(args.partition)]
    if not samples:
        _data_error("no manifest rows selected")
    if args.scores:
        score_map = _read_two_column(args.scores, "score", float)
        samples = [s for s in samples if s.sample_id in score_map]
        if not samples:
            _data_error("no manifest rows match the scores file")
        scores = np.array([score_map[s.sample_id] for s in samples])
    else:
        scorer, _ = trainer.load_scorer(args.model)
        features = _featurize(samples, args.manifest)
        scores = sigmoid(scorer.forward(features.features))
    for s in samples:
        if s.label is None:
            _data_error(f"sample {s.sample_id} is unlabeled; run `label` first")
    labels = np.array([1 if s.label == "FL" else 0 for s in samples])
    lons = np.array([s.longitude_deg for s in samples])
    zones = _parse_zones(args.zones)
    reports = metrics.zone_report(scores, labels, lons, args.threshold, zones)
    metrics.write_report_csv(reports, args.report)
    for rep in reports:
        zone = rep.zone
        span = f"{zone.mode} |lon| in ({zone.lo:g}, {zone.hi:g}]" \
            if zone.mode == "annular" else f"cumulative |lon| <= {zone.hi:g}"
        if rep.css is None:
            print(f"{span}: undefined (single-class support, n={rep.cm.total})")
        else:
            print(f"{span}: TSS={rep.tss:.4f} HSS={rep.hss:.4f} CSS={rep.css:.4f} "
                  f"(FL={rep.n_fl} NF={rep.n_nf})")
    print(f"report: {args.report}")
    return 0


def cmd_sweep(args):
    score_map = _read_two_column(args.scores, "score", float)
    label_map = _read_two_column(args.labels, "label", _parse_label)
    if set(score_map) != set(label_map):
        _data_error("scores and labels files disagree on sample ids")
    ids = sorted(score_map)
    result = metrics.sweep_threshold(
        [score_map[i] for i in ids], [label_map[i] for i in ids])
    print(f"best threshold: {result.best_threshold}")
    print(f"best CSS: {result.best_css}")
    return 0


# ------------------------------------------------------------------ compare

def cmd_compare(args):
    cfg_bce = trainer.parse_config(args.config_bce)
    cfg_bcesf = trainer.parse_config(args.config_bcesf)
    spec = trainer.SyntheticSpec(noise=args.noise, dim=args.dim)
    report = trainer.compare_protocol(
        range(args.seeds), cfg_bce, cfg_bcesf, spec, kind=args.scorer)
    report.to_csv(args.report)
    print(report.summary())
    print(f"report: {args.report}")
    return 0


def cmd_report(args):
    samples = dataset.load_manifest(args.manifest)
    print(dataset.manifest_summary(samples))
    return 0


# -------------------------------------------------------------------- wiring

def _build_parser():
    parser = _Parser(
        prog="ordflare",
        description="Ordinality-aware flare forecasting pipeline.")
    parser.add_argument("--version", action="version", version=f"ordflare {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="rasters + masks -> 512x512 images + manifest")
    p.add_argument("--in", dest="in_dir", required=True,
                   help="directory of <ar>_<time>_<lon>.mgr rasters with .msk masks")
    p.add_argument("--out", dest="out_dir", required=True,
                   help="output directory for processed .mgr and .pgm files")
    p.add_argument("--manifest", required=True, help="manifest CSV to write")
    p.add_argument("--min-width", type=int, default=preprocess.MIN_WIDTH,
                   help="drop cropped patches narrower than this (pixels)")
    p.add_argument("--cap", type=float, default=preprocess.FLUX_CAP,
                   help="flux magnitude cap (Gauss)")
    p.add_argument("--noise-floor", type=float, default=preprocess.NOISE_FLOOR,
                   help="zero values with magnitude at or below this (Gauss)")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel workers; output is identical for any value")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("label", help="attach flare classes from a catalog")
    p.add_argument("--catalog", required=True,
                   help="CSV of ar_id,start_time (ISO UTC),peak_flux (W/m^2)")
    p.add_argument("--manifest", required=True, help="manifest CSV to update in place")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("split", help="assign tri-monthly partitions by AR onset")
    p.add_argument("--manifest", required=True, help="manifest CSV to update in place")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("undersample", help="thin NF sub-classes in the training partitions")
    p.add_argument("--manifest", required=True, help="manifest CSV to read")
    p.add_argument("--seed", type=int, required=True, help="RNG seed (u64)")
    p.add_argument("--fq", type=float, default=0.08, help="FQ keep rate in (0,1]")
    p.add_argument("--abc", type=float, default=0.30, help="A/B/C keep rate in (0,1]")
    p.add_argument("--out", default=None, help="output CSV (default: in place)")
    p.set_defaults(func=cmd_undersample)

    p = sub.add_parser("augment", help="emit the five augmentations per FL training sample")
    p.add_argument("--manifest", required=True, help="manifest CSV to update in place")
    p.add_argument("--only-class", default="FL", choices=("FL", "NF"),
                   help="binary label to augment")
    p.add_argument("--out", dest="out_dir", required=True,
                   help="directory for augmented .mgr rasters")
    p.add_argument("--seed", type=int, required=True, help="global noise seed (u64)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="train a scorer on the manifest's train/val partitions")
    p.add_argument("--config", required=True, help="key = value training config file")
    p.add_argument("--manifest", required=True, help="labeled, split manifest CSV")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--scorer", default="linear", choices=("linear", "one_hidden"),
                   help="scorer architecture")
    p.add_argument("--hidden-dim", type=int, default=8,
                   help="hidden width for the one_hidden scorer")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="per-zone skill scores at a fixed threshold")
    p.add_argument("--manifest", required=True, help="labeled manifest CSV")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--scores", help="CSV of sample_id,score (probabilities)")
    group.add_argument("--model", help="model file to score rasters with")
    p.add_argument("--threshold", type=float, required=True,
                   help="decision threshold in (0,1); predict FL iff score >= threshold")
    p.add_argument("--zones", default="30,60,90",
                   help="cumulative degrees '30,60,90' or 'annular:0-30,30-60,60-90'")
    p.add_argument("--report", required=True, help="zone report CSV to write")
    p.add_argument("--partition", default="all", choices=("1", "2", "3", "4", "all"),
                   help="restrict to one tri-monthly partition")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="calibrate the threshold on the 0.01..0.99 grid")
    p.add_argument("--scores", required=True, help="CSV of sample_id,score")
    p.add_argument("--labels", required=True, help="CSV of sample_id,label (FL/NF or 1/0)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="BCE vs BCE-SF protocol on synthetic ordinal data")
    p.add_argument("--seeds", type=int, required=True, help="number of seeds (>= 5)")
    p.add_argument("--config-bce", required=True, help="config file with loss = bce")
    p.add_argument("--config-bcesf", required=True, help="config file with loss = bce-sf")
    p.add_argument("--report", required=True, help="per-seed per-zone CSV to write")
    p.add_argument("--noise", type=float, default=0.35,
                   help="synthetic noise scale (feature units)")
    p.add_argument("--dim", type=int, default=8, help="synthetic feature dimension")
    p.add_argument("--scorer", default="linear", choices=("linear", "one_hidden"))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="print a manifest summary")
    p.add_argument("--manifest", required=True, help="manifest CSV to summarize")
    p.set_defaults(func=cmd_report)

    return parser


def run(argv):
    """Dispatch a full argv list (without the program name); returns the
    exit code instead of raising SystemExit."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (dataset.ManifestError, raster_io.FormatError, trainer.ConfigError,
            preprocess.EmptyRegionError, metrics.UndefinedScoreError) as exc:
        print(f"ordflare: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"ordflare: error: {exc}", file=sys.stderr)
        return 2
    except (trainer.TrainingDivergedError, FloatingPointError) as exc:
        print(f"ordflare: error: {exc}", file=sys.stderr)
        return 3


def main(argv=None):
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
