from datetime import datetime, timedelta, timezone

import pytest

from ordflare.dataset import (
    CatalogEvent,
    FlareCatalog,
    ManifestError,
    Sample,
    UndersampleSpec,
    assign_partitions,
    flux_to_class,
    format_utc,
    label_sample,
    load_catalog,
    load_manifest,
    manifest_summary,
    onset_times,
    parse_utc,
    partition,
    split_roles,
    undersample,
    write_manifest,
)
from ordflare.loss import FlareClass


def utc(*args):
    return datetime(*args, tzinfo=timezone.utc)


def make_sample(i, ar="h1", t=None, cls=None, label=None, part=None, aug=False):
    return Sample(
        sample_id=f"s{i}", ar_id=ar,
        observation_time=t or utc(2014, 3, 1, 12),
        longitude_deg=0.0, raster_path=f"s{i}.mgr",
        flare_class=cls, label=label, partition=part, augmented=aug)


class TestFluxToClass:
    def test_paper_thresholds(self):
        assert flux_to_class(2e-5) is FlareClass.M
        assert flux_to_class(2e-4) is FlareClass.X
        assert flux_to_class(5e-6) is FlareClass.C
        # 5e-7 clears only the >1e-7 bound, so it is a B-class flare
        assert flux_to_class(5e-7) is FlareClass.B
        assert flux_to_class(5e-8) is FlareClass.A

    def test_boundaries_are_strict(self):
        assert flux_to_class(1e-8) is FlareClass.FQ
        assert flux_to_class(1e-7) is FlareClass.A
        assert flux_to_class(1e-6) is FlareClass.B
        assert flux_to_class(1e-5) is FlareClass.C
        assert flux_to_class(1e-4) is FlareClass.M

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            flux_to_class(0.0)
        with pytest.raises(ValueError):
            flux_to_class(-1e-6)

    def test_monotone_in_flux(self):
        fluxes = [1e-9, 5e-8, 5e-7, 5e-6, 5e-5, 5e-4]
        classes = [flux_to_class(f) for f in fluxes]
        assert classes == sorted(classes)


class TestLabelSample:
    def catalog(self, *events):
        return FlareCatalog([
            CatalogEvent(ar_id=ar, start_time=t, peak_flux=flux)
            for ar, t, flux in events])

    def test_m_flare_in_window(self):
        cat = self.catalog(("h1", utc(2014, 1, 1, 5), 1.2e-5))
        cls, label = label_sample(utc(2014, 1, 1, 0), "h1", cat)
        assert cls is FlareClass.M and label == "FL"

    def test_maximum_over_window(self):
        cat = self.catalog(
            ("h1", utc(2014, 1, 1, 3), 9e-6),   # C9
            ("h1", utc(2014, 1, 1, 20), 2e-7))  # B2
        cls, label = label_sample(utc(2014, 1, 1, 0), "h1", cat)
        assert cls is FlareClass.C and label == "NF"

    def test_empty_window_is_flare_quiet(self):
        cat = self.catalog(("h1", utc(2014, 1, 5), 1e-4))
        cls, label = label_sample(utc(2014, 1, 1), "h1", cat)
        assert cls is FlareClass.FQ and label == "NF"

    def test_unknown_ar_is_not_an_error(self):
        cls, label = label_sample(utc(2014, 1, 1), "nope", self.catalog())
        assert cls is FlareClass.FQ and label == "NF"

    def test_window_is_half_open(self):
        # a flare exactly at the observation time is not a future event
        cat = self.catalog(("h1", utc(2014, 1, 1, 0), 1e-4))
        cls, _ = label_sample(utc(2014, 1, 1, 0), "h1", cat)
        assert cls is FlareClass.FQ
        # the +24 h endpoint is included
        cat = self.catalog(("h1", utc(2014, 1, 2, 0), 2e-4))
        cls, label = label_sample(utc(2014, 1, 1, 0), "h1", cat)
        assert cls is FlareClass.X and label == "FL"
        # just past the endpoint is excluded
        cat = self.catalog(("h1", utc(2014, 1, 2, 0, 0, 1), 2e-4))
        cls, _ = label_sample(utc(2014, 1, 1, 0), "h1", cat)
        assert cls is FlareClass.FQ

    def test_monotone_under_added_events(self):
        base = [("h1", utc(2014, 1, 1, 6), 5e-7)]
        extra = ("h1", utc(2014, 1, 1, 9), 3e-5)
        before, _ = label_sample(utc(2014, 1, 1), "h1", self.catalog(*base))
        after, _ = label_sample(utc(2014, 1, 1), "h1", self.catalog(*base, extra))
        assert after >= before


class TestPartition:
    def test_quarter_rule(self):
        assert partition(utc(2012, 5, 14)) == 2
        assert partition(utc(2017, 12, 31)) == 4
        assert partition(utc(2010, 1, 1)) == 1
        assert partition(utc(2016, 9, 30)) == 3

    def test_same_harp_same_partition(self):
        samples = [
            make_sample(1, ar="h9", t=utc(2013, 3, 30, 22)),
            make_sample(2, ar="h9", t=utc(2013, 4, 2, 4)),
        ]
        out = assign_partitions(samples)
        # onset (earliest observation) is in March -> both rows partition 1
        assert {s.partition for s in out} == {1}

    def test_onset_is_earliest_observation(self):
        samples = [
            make_sample(1, ar="h2", t=utc(2013, 7, 2)),
            make_sample(2, ar="h2", t=utc(2013, 6, 29)),
        ]
        assert onset_times(samples)["h2"] == utc(2013, 6, 29)
        assert {s.partition for s in assign_partitions(samples)} == {2}

    def test_split_roles(self):
        roles = split_roles({1, 2, 3, 4})
        assert roles == {"train": {1, 2}, "validation": {3}, "test": {4}}

    def test_split_roles_missing_partition(self):
        with pytest.raises(ValueError):
            split_roles({1, 2, 3})


class TestUndersample:
    def test_no_nf_is_identity(self):
        samples = [make_sample(i, cls=FlareClass.M, label="FL") for i in range(5)]
        assert undersample(samples, UndersampleSpec(seed=1)) == samples

    def test_fl_always_kept(self):
        samples = [make_sample(i, cls=FlareClass.FQ, label="NF") for i in range(100)]
        samples += [make_sample(100 + i, cls=FlareClass.M, label="FL") for i in range(7)]
        samples += [make_sample(200 + i, cls=FlareClass.X, label="FL") for i in range(3)]
        kept = undersample(samples, UndersampleSpec(seed=2))
        fl_in = {s.sample_id for s in samples if s.label == "FL"}
        fl_out = {s.sample_id for s in kept if s.label == "FL"}
        assert fl_in == fl_out

    def test_fq_rate_concentration_and_determinism(self):
        samples = [make_sample(i, cls=FlareClass.FQ, label="NF") for i in range(10_000)]
        spec = UndersampleSpec(seed=42)
        kept = undersample(samples, spec)
        assert 700 <= len(kept) <= 900
        again = undersample(samples, spec)
        assert [s.sample_id for s in kept] == [s.sample_id for s in again]

    def test_abc_rates(self):
        samples = [make_sample(i, cls=FlareClass.B, label="NF") for i in range(10_000)]
        kept = undersample(samples, UndersampleSpec(seed=9))
        assert 2800 <= len(kept) <= 3200

    def test_unlabeled_sample_rejected(self):
        with pytest.raises(ValueError):
            undersample([make_sample(1)], UndersampleSpec(seed=0))

    def test_bad_rates_rejected(self):
        with pytest.raises(ValueError):
            UndersampleSpec(seed=0, rates={FlareClass.FQ: 0.0})
        with pytest.raises(ValueError):
            UndersampleSpec(seed=0, rates={FlareClass.M: 0.5})


class TestManifestRoundTrip:
    def test_header_only(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([], path)
        assert load_manifest(path) == []

    def test_three_row_round_trip(self, tmp_path):
        samples = [
            make_sample(1, cls=FlareClass.X, label="FL", part=2),
            Sample("s2", "h3", utc(2015, 11, 5, 23, 59, 59), -63.25, "deep/dir/s2.mgr",
                   FlareClass.FQ, "NF", 4, True),
            make_sample(3),  # unlabeled staging row
        ]
        path = tmp_path / "m.csv"
        write_manifest(samples, path)
        assert load_manifest(path) == samples

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([make_sample(1), make_sample(2)], path)
        lines = path.read_text().splitlines()
        lines[2] = lines[2].replace("0.0", "not-a-number")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ManifestError, match=":3"):
            load_manifest(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("sample_id,ar_id\na,b\n")
        with pytest.raises(ManifestError, match="missing columns"):
            load_manifest(path)

    def test_label_class_contradiction_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([make_sample(1, cls=FlareClass.X, label="FL")], path)
        text = path.read_text().replace("FL", "NF")
        path.write_text(text)
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_timestamps_accept_z_and_offset(self):
        assert parse_utc("2014-01-02T03:04:05Z") == utc(2014, 1, 2, 3, 4, 5)
        assert parse_utc("2014-01-02T03:04:05+00:00") == utc(2014, 1, 2, 3, 4, 5)
        assert format_utc(utc(2014, 1, 2, 3, 4, 5)) == "2014-01-02T03:04:05Z"

    def test_imbalance_summary(self):
        samples = [make_sample(i, cls=FlareClass.B, label="NF") for i in range(49)]
        samples.append(make_sample(99, cls=FlareClass.M, label="FL"))
        assert "1:49" in manifest_summary(samples)


class TestCatalogCsv:
    def test_load(self, tmp_path):
        path = tmp_path / "catalog.csv"
        path.write_text(
            "ar_id,start_time,peak_flux\n"
            "h1,2014-01-01T05:00:00Z,1.2e-5\n"
            "h1,2014-01-03T00:00:00Z,3.0e-4\n"
            "h2,2014-02-01T00:00:00Z,5.0e-7\n")
        catalog = load_catalog(path)
        assert len(catalog) == 3
        assert [e.flare_class for e in catalog.events_for("h1")] == \
            [FlareClass.M, FlareClass.X]

    def test_bad_flux_names_line(self, tmp_path):
        path = tmp_path / "catalog.csv"
        path.write_text("ar_id,start_time,peak_flux\nh1,2014-01-01T00:00:00Z,-1e-5\n")
        with pytest.raises(ManifestError, match=":2"):
            load_catalog(path)
