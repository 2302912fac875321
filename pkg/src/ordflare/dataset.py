"""Flare catalog labeling, tri-monthly partitioning, undersampling and
manifest persistence.

A sample is one AR-patch observation; its flare class is the maximum
GOES class among the AR's catalog events inside the 24-hour prediction
window after the observation, FQ when the window is empty.  Partitions
are calendar quarters of the AR's onset month, so a HARP trajectory can
never straddle two partitions.
"""

import csv
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .loss import FlareClass, binary_label

__all__ = [
    "CatalogEvent",
    "Sample",
    "UndersampleSpec",
    "FlareCatalog",
    "ManifestError",
    "flux_to_class",
    "label_sample",
    "partition",
    "undersample",
    "split_roles",
    "load_catalog",
    "load_manifest",
    "write_manifest",
    "manifest_summary",
    "PARTITION_ROLES",
    "PREDICTION_WINDOW",
]

PREDICTION_WINDOW = timedelta(hours=24)

# Fixed role assignment of the four tri-monthly partitions.
PARTITION_ROLES = {"train": (1, 2), "validation": (3,), "test": (4,)}

# Strict lower bounds on peak X-ray flux (W/m^2) per GOES class.
_FLUX_THRESHOLDS = (
    (1e-4, FlareClass.X),
    (1e-5, FlareClass.M),
    (1e-6, FlareClass.C),
    (1e-7, FlareClass.B),
    (1e-8, FlareClass.A),
)

MANIFEST_COLUMNS = (
    "sample_id", "ar_id", "observation_time", "longitude_deg",
    "raster_path", "flare_class", "label", "partition", "augmented",
)


class ManifestError(ValueError):
    """Malformed manifest or catalog content, with the offending line."""


def parse_utc(text):
    """Parse an ISO-8601 UTC timestamp, accepting the Z suffix."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ValueError(f"bad ISO-8601 timestamp {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_utc(ts):
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class CatalogEvent:
    """One flare event: AR id, UTC start time, peak X-ray flux in W/m^2."""

    ar_id: str
    start_time: datetime
    peak_flux: float

    def __post_init__(self):
        if not self.peak_flux > 0:
            raise ValueError(f"peak_flux must be positive, got {self.peak_flux}")

    @property
    def flare_class(self):
        return flux_to_class(self.peak_flux)


@dataclass
class Sample:
    """One AR-patch instance of the manifest.

    ``flare_class``/``label``/``partition`` are filled by the labeling
    and splitting stages and may be absent on freshly preprocessed rows.
    """

    sample_id: str
    ar_id: str
    observation_time: datetime
    longitude_deg: float
    raster_path: str
    flare_class: "FlareClass | None" = None
    label: "str | None" = None
    partition: "int | None" = None
    augmented: bool = False

    def __post_init__(self):
        if not -90.0 <= self.longitude_deg <= 90.0:
            raise ValueError(f"longitude {self.longitude_deg} outside [-90, +90] degrees")
        if self.partition is not None and self.partition not in (1, 2, 3, 4):
            raise ValueError(f"partition must be 1..4, got {self.partition}")
        if self.label is not None and self.label not in ("FL", "NF"):
            raise ValueError(f"label must be FL or NF, got {self.label!r}")
        if self.flare_class is not None and self.label is not None:
            expected = "FL" if binary_label(self.flare_class) else "NF"
            if self.label != expected:
                raise ValueError(
                    f"label {self.label} contradicts flare class {self.flare_class.name}"
                )


def flux_to_class(peak_flux):
    """GOES class of a peak X-ray flux, strict lower-bound bucketing.

    Flux at or below 1e-8 W/m^2 is flare-quiet (FQ).
    """
    if not peak_flux > 0:
        raise ValueError(f"peak_flux must be positive, got {peak_flux}")
    for threshold, cls in _FLUX_THRESHOLDS:
        if peak_flux > threshold:
            return cls
    return FlareClass.FQ


class FlareCatalog:
    """Read-only index of catalog events by AR id."""

    def __init__(self, events):
        self._by_ar = {}
        for ev in events:
            self._by_ar.setdefault(ev.ar_id, []).append(ev)
        for evs in self._by_ar.values():
            evs.sort(key=lambda e: e.start_time)

    def events_for(self, ar_id):
        return tuple(self._by_ar.get(ar_id, ()))

    def __len__(self):
        return sum(len(v) for v in self._by_ar.values())


def label_sample(observation_time, ar_id, catalog):
    """(flare class, binary label) of an AR patch.

    Takes the maximum flare class among the AR's events starting within
    the half-open window (t, t + 24 h]; an empty window (or an AR the
    catalog does not know) yields FQ.  Label is FL iff the class is >=M.
    """
    end = observation_time + PREDICTION_WINDOW
    best = FlareClass.FQ
    for ev in catalog.events_for(ar_id):
        if observation_time < ev.start_time <= end:
            best = max(best, ev.flare_class)
    return best, ("FL" if binary_label(best) else "NF")


def partition(ar_onset_time):
    """Tri-monthly partition 1..4 from the calendar quarter of the onset."""
    return (ar_onset_time.month - 1) // 3 + 1


def split_roles(partitions):
    """Fixed partition-to-role map; all four partitions must be present."""
    present = set(partitions)
    missing = {1, 2, 3, 4} - present
    if missing:
        raise ValueError(f"missing partitions: {sorted(missing)}")
    return {role: set(parts) for role, parts in PARTITION_ROLES.items()}


@dataclass(frozen=True)
class UndersampleSpec:
    """Per-NF-sub-class keep rates; FL sub-classes are always kept."""

    seed: int = 0
    rates: dict = field(default_factory=lambda: {
        FlareClass.FQ: 0.08,
        FlareClass.A: 0.30,
        FlareClass.B: 0.30,
        FlareClass.C: 0.30,
    })

    def __post_init__(self):
        for cls, rate in self.rates.items():
            if binary_label(cls):
                raise ValueError(f"keep rate given for FL sub-class {cls.name}")
            if not 0.0 < rate <= 1.0:
                raise ValueError(f"keep rate for {cls.name} must be in (0, 1], got {rate}")


def undersample(samples, spec):
    """Thin the NF sub-classes by their keep rates; keep every FL sample.

    Each NF sample is kept independently with its sub-class rate, drawn
    from the seeded generator in input order, so a fixed seed and input
    order reproduce the subset exactly.
    """
    rng = np.random.default_rng(spec.seed)
    kept = []
    for s in samples:
        if s.flare_class is None:
            raise ValueError(f"sample {s.sample_id} has no flare class; label first")
        if binary_label(s.flare_class):
            kept.append(s)
            continue
        rate = spec.rates.get(s.flare_class, 1.0)
        if rng.random() < rate:
            kept.append(s)
    return kept


def load_catalog(path):
    """Read a flare catalog CSV (ar_id, start_time, peak_flux)."""
    events = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader, ("ar_id", "start_time", "peak_flux"), path)
        for lineno, row in enumerate(reader, start=2):
            try:
                events.append(CatalogEvent(
                    ar_id=row["ar_id"].strip(),
                    start_time=parse_utc(row["start_time"]),
                    peak_flux=float(row["peak_flux"]),
                ))
            except (ValueError, KeyError, AttributeError) as exc:
                raise ManifestError(f"{path}:{lineno}: {exc}") from exc
    return FlareCatalog(events)


def _require_columns(reader, columns, path):
    have = reader.fieldnames or ()
    missing = [c for c in columns if c not in have]
    if missing:
        raise ManifestError(f"{path}: missing columns {missing}")


def _parse_row(row, lineno, path):
    try:
        cls = row["flare_class"].strip()
        label = row["label"].strip()
        part = row["partition"].strip()
        aug = row["augmented"].strip()
        if aug not in ("0", "1"):
            raise ValueError(f"augmented must be 0 or 1, got {aug!r}")
        return Sample(
            sample_id=row["sample_id"].strip(),
            ar_id=row["ar_id"].strip(),
            observation_time=parse_utc(row["observation_time"]),
            longitude_deg=float(row["longitude_deg"]),
            raster_path=row["raster_path"].strip(),
            flare_class=FlareClass[cls] if cls else None,
            label=label or None,
            partition=int(part) if part else None,
            augmented=aug == "1",
        )
    except ManifestError:
        raise
    except (ValueError, KeyError, AttributeError) as exc:
        raise ManifestError(f"{path}:{lineno}: {exc}") from exc


def load_manifest(path):
    """Read a sample manifest CSV; parse errors name the line number."""
    samples = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader, MANIFEST_COLUMNS, path)
        for lineno, row in enumerate(reader, start=2):
            if None in row.values() or None in row:
                raise ManifestError(f"{path}:{lineno}: wrong number of fields")
            samples.append(_parse_row(row, lineno, path))
    return samples


def write_manifest(samples, path):
    """Write samples as CSV; a write/load round trip is lossless."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for s in samples:
            writer.writerow([
                s.sample_id,
                s.ar_id,
                format_utc(s.observation_time),
                repr(float(s.longitude_deg)),
                s.raster_path,
                "" if s.flare_class is None else s.flare_class.name,
                s.label or "",
                "" if s.partition is None else s.partition,
                "1" if s.augmented else "0",
            ])


def onset_times(samples):
    """Earliest observation per AR id, the HARP-series onset stand-in."""
    onsets = {}
    for s in samples:
        prev = onsets.get(s.ar_id)
        if prev is None or s.observation_time < prev:
            onsets[s.ar_id] = s.observation_time
    return onsets


def assign_partitions(samples):
    """Give every sample its AR's onset-quarter partition."""
    onsets = onset_times(samples)
    return [replace_partition(s, partition(onsets[s.ar_id])) for s in samples]


def replace_partition(sample, part):
    return replace(sample, partition=part)


def manifest_summary(samples):
    """Human-readable class/partition/label counts and imbalance ratio."""
    by_class = {c.name: 0 for c in FlareClass}
    by_partition = {}
    n_fl = n_nf = n_aug = 0
    for s in samples:
        if s.flare_class is not None:
            by_class[s.flare_class.name] += 1
        if s.partition is not None:
            by_partition[s.partition] = by_partition.get(s.partition, 0) + 1
        if s.label == "FL":
            n_fl += 1
        elif s.label == "NF":
            n_nf += 1
        n_aug += int(s.augmented)
    lines = [f"samples: {len(samples)} ({n_aug} augmented)"]
    lines.append("classes: " + "  ".join(f"{k}={v}" for k, v in by_class.items()))
    if by_partition:
        lines.append("partitions: " + "  ".join(
            f"P{k}={v}" for k, v in sorted(by_partition.items())))
    lines.append(f"labels: FL={n_fl}  NF={n_nf}")
    if n_fl and n_nf:
        lines.append(f"imbalance ratio FL:NF = 1:{n_nf / n_fl:g}")
    return "\n".join(lines)
