"""Forecast verification: confusion matrices, TSS/HSS/CSS, threshold
calibration and per-longitude-zone skill reports.

TSS and HSS range from -1 to 1 (1 all correct, 0 no skill); CSS is their
geometric mean, set to 0 when the two scores disagree in sign, so it
always lies in [0, 1].  Skill scores with a zero denominator are treated
as *undefined* and surface as ``None``, never as a fabricated number;
only the threshold sweep coerces undefined CSS to 0 when ranking.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfusionMatrix",
    "SkillReport",
    "ZoneSpec",
    "SweepResult",
    "UndefinedScoreError",
    "confusion",
    "tss",
    "hss",
    "css",
    "skill_report",
    "sweep_threshold",
    "zone_report",
    "write_report_csv",
    "SWEEP_THRESHOLDS",
]

# Calibration grid: 0.01, 0.02, ..., 0.99.
SWEEP_THRESHOLDS = tuple(i / 100.0 for i in range(1, 100))

# Marker written to CSV cells for undefined (zero-denominator) scores.
NA = "NA"


class UndefinedScoreError(ValueError):
    """A skill score's denominator is zero for the given counts."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """TP/FP/TN/FN counts of a thresholded binary forecast."""

    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")

    @property
    def n_positive(self):
        """Observed positives P = TP + FN."""
        return self.tp + self.fn

    @property
    def n_negative(self):
        """Observed negatives N = TN + FP."""
        return self.tn + self.fp

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ZoneSpec:
    """Absolute-longitude zone, bounds in degrees within [0, 90].

    ``cumulative`` selects |lon| <= hi (the paper-style +/-30, +/-60,
    +/-90 views); ``annular`` selects lo < |lon| <= hi (non-overlapping
    rings).  Samples exactly on a ring boundary belong to the inner ring.
    """

    lo: float
    hi: float
    mode: str = "cumulative"

    def __post_init__(self):
        if self.mode not in ("cumulative", "annular"):
            raise ValueError(f"mode must be 'cumulative' or 'annular', got {self.mode!r}")
        if not 0.0 <= self.lo < self.hi <= 90.0:
            raise ValueError(f"need 0 <= lo < hi <= 90, got lo={self.lo} hi={self.hi}")

    def contains(self, longitude):
        """Membership of a longitude in degrees (vectorized)."""
        a = np.abs(np.asarray(longitude, dtype=float))
        if self.mode == "cumulative":
            out = a <= self.hi
        else:
            out = (a > self.lo) & (a <= self.hi)
        return bool(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SkillReport:
    """Scores of one forecast slice; None marks an undefined score."""

    tss: "float | None"
    hss: "float | None"
    css: "float | None"
    threshold: float
    cm: ConfusionMatrix
    zone: "ZoneSpec | None" = None

    @property
    def n_fl(self):
        return self.cm.n_positive

    @property
    def n_nf(self):
        return self.cm.n_negative


@dataclass(frozen=True)
class SweepResult:
    best_threshold: float
    best_css: float
    table: "tuple[SkillReport, ...]"


def _scores_labels(scores, labels):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1:
        raise ValueError("scores and labels must be 1-D")
    if len(s) != len(y):
        raise ValueError(f"length mismatch: {len(s)} scores vs {len(y)} labels")
    if len(s) == 0:
        raise ValueError("empty score vector")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return s, y.astype(int)


def confusion(scores, labels, threshold):
    """Count TP/FP/TN/FN predicting FL iff score >= threshold."""
    s, y = _scores_labels(scores, labels)
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    pred = s >= threshold
    obs = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & obs)),
        fp=int(np.sum(pred & ~obs)),
        tn=int(np.sum(~pred & ~obs)),
        fn=int(np.sum(~pred & obs)),
    )


def tss(cm):
    """True Skill Statistic: TP/(TP+FN) - FP/(FP+TN)."""
    if cm.n_positive == 0 or cm.n_negative == 0:
        raise UndefinedScoreError("TSS undefined: empty positive or negative support")
    return cm.tp / cm.n_positive - cm.fp / cm.n_negative


def hss(cm):
    """Heidke Skill Score: 2(TP*TN - FN*FP) / (P(FN+TN) + (TP+FP)N).

    P = TP+FN and N = TN+FP are the observed supports; HSS corrects the
    forecast for chance agreement, which makes it imbalance-aware.
    """
    p, n = cm.n_positive, cm.n_negative
    denom = p * (cm.fn + cm.tn) + (cm.tp + cm.fp) * n
    if denom == 0:
        raise UndefinedScoreError("HSS undefined: zero denominator")
    return 2.0 * (cm.tp * cm.tn - cm.fn * cm.fp) / denom


def css(tss_value, hss_value):
    """Composite Skill Score: geometric mean of TSS and HSS.

    Zero whenever the product is negative, so the result is in [0, 1].
    """
    prod = tss_value * hss_value
    if prod < 0:
        return 0.0
    return math.sqrt(prod)


def skill_report(cm, threshold, zone=None):
    """All three scores for one confusion matrix; undefined -> None."""
    try:
        t = tss(cm)
        h = hss(cm)
    except UndefinedScoreError:
        return SkillReport(None, None, None, threshold, cm, zone)
    return SkillReport(t, h, css(t, h), threshold, cm, zone)


def sweep_threshold(scores, labels):
    """Calibrate the decision threshold on the 0.01..0.99 grid.

    Evaluates CSS at every grid threshold and returns the one maximizing
    it, ties broken by the smallest threshold.  Thresholds where a score
    is undefined count as CSS 0 in the ranking while their table row
    keeps the undefined marker.
    """
    s, y = _scores_labels(scores, labels)
    if len(np.unique(y)) < 2:
        raise UndefinedScoreError("threshold sweep needs both labels present")
    table = []
    best_t, best_c = None, -1.0
    for t in SWEEP_THRESHOLDS:
        rep = skill_report(confusion(s, y, t), t)
        table.append(rep)
        effective = rep.css if rep.css is not None else 0.0
        if effective > best_c:
            best_t, best_c = t, effective
    return SweepResult(best_threshold=best_t, best_css=best_c, table=tuple(table))


def zone_report(scores, labels, longitudes, threshold, zones):
    """Per-zone skill reports at a fixed operating threshold.

    Samples are assigned to each zone by the absolute value of their
    longitude; a zone whose support covers only one label yields a
    report with undefined scores rather than a number.
    """
    s, y = _scores_labels(scores, labels)
    lon = np.asarray(longitudes, dtype=float)
    if lon.shape != s.shape:
        raise ValueError("longitudes must match scores in length")
    if np.any(np.abs(lon) > 90.0):
        raise ValueError("longitudes must lie in [-90, +90] degrees")
    reports = []
    for zone in zones:
        sel = zone.contains(lon)
        if not np.any(sel):
            cm = ConfusionMatrix(0, 0, 0, 0)
            reports.append(SkillReport(None, None, None, threshold, cm, zone))
            continue
        cm = confusion(s[sel], y[sel], threshold)
        reports.append(skill_report(cm, threshold, zone))
    return reports


def _cell(value):
    return NA if value is None else repr(float(value))


REPORT_COLUMNS = (
    "zone_lo", "zone_hi", "mode", "threshold",
    "tp", "fp", "tn", "fn", "tss", "hss", "css", "n_fl", "n_nf",
)


def report_row(rep):
    """CSV cells of one report, in REPORT_COLUMNS order."""
    zone = rep.zone
    return [
        "" if zone is None else repr(float(zone.lo)),
        "" if zone is None else repr(float(zone.hi)),
        "" if zone is None else zone.mode,
        repr(float(rep.threshold)),
        rep.cm.tp, rep.cm.fp, rep.cm.tn, rep.cm.fn,
        _cell(rep.tss), _cell(rep.hss), _cell(rep.css),
        rep.n_fl, rep.n_nf,
    ]


def write_report_csv(reports, path):
    """Emit zone reports as UTF-8 CSV, one row per zone, header first."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rep in reports:
            writer.writerow(report_row(rep))
