"""Skill scores, threshold calibration and longitude-zone reports.

Simulates forecast probabilities whose quality degrades toward the
solar limb (projection effects), calibrates the decision threshold on
the 0.01..0.99 CSS grid, and emits cumulative and annular zone reports.
"""

import os

import numpy as np

from ordflare.metrics import (
    ZoneSpec,
    confusion,
    css,
    hss,
    sweep_threshold,
    tss,
    write_report_csv,
    zone_report,
)

OUT = os.path.join(os.path.dirname(__file__), "output")


def simulated_forecasts(n=4000, seed=3):
    rng = np.random.default_rng(seed)
    labels = (rng.uniform(size=n) < 0.12).astype(int)
    longitudes = rng.uniform(-90.0, 90.0, size=n)
    # signal strength fades with |longitude|
    quality = 2.4 * (1.0 - 0.7 * np.abs(longitudes) / 90.0)
    z = quality * (2 * labels - 1) + rng.normal(0, 1.1, size=n)
    scores = 1.0 / (1.0 + np.exp(-z))
    return scores, labels, longitudes


def main():
    os.makedirs(OUT, exist_ok=True)
    scores, labels, lons = simulated_forecasts()

    cm = confusion(scores, labels, 0.5)
    print(f"at threshold 0.50: tp={cm.tp} fp={cm.fp} tn={cm.tn} fn={cm.fn}")
    print(f"  TSS={tss(cm):.4f} HSS={hss(cm):.4f} CSS={css(tss(cm), hss(cm)):.4f}")

    result = sweep_threshold(scores, labels)
    print(f"calibrated threshold: {result.best_threshold} (CSS {result.best_css:.4f})")

    cumulative = [ZoneSpec(0, hi, "cumulative") for hi in (30.0, 60.0, 90.0)]
    annular = [ZoneSpec(lo, hi, "annular") for lo, hi in ((0, 30), (30, 60), (60, 90))]
    print("\nzone performance at the calibrated threshold:")
    for zones, title in ((cumulative, "cumulative"), (annular, "annular")):
        print(f"  {title}:")
        reports = zone_report(scores, labels, lons, result.best_threshold, zones)
        for rep in reports:
            span = f"|lon| <= {rep.zone.hi:g}" if rep.zone.mode == "cumulative" \
                else f"{rep.zone.lo:g} < |lon| <= {rep.zone.hi:g}"
            print(f"    {span:18s} TSS={rep.tss:.3f} HSS={rep.hss:.3f} "
                  f"CSS={rep.css:.3f} (FL={rep.n_fl}, NF={rep.n_nf})")
        path = os.path.join(OUT, f"zones_{title}.csv")
        write_report_csv(reports, path)
        print(f"    -> {path}")


if __name__ == "__main__":
    main()
