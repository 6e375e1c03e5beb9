"""Dataset IO, normalization, and the synthetic generator."""

import numpy as np
import pytest

import specsense as ss
from specsense import DataFormatError, DegenerateDataError


def make_dataset(n=4, labeled=True, seed=0):
    rng = np.random.default_rng(seed)
    bins = rng.normal(-100.0, 5.0, size=(n, ss.NUM_BINS)).astype(np.float32)
    labels = (np.arange(n) % 2).astype(np.int32) if labeled else None
    return ss.Dataset(bins=bins, labels=labels)


class TestCsvRoundTrip:
    def test_labeled_round_trip(self, tmp_path):
        ds = make_dataset(10)
        path = tmp_path / "d.csv"
        ss.save_dataset(ds, str(path))
        back = ss.load_dataset(str(path))
        assert np.array_equal(back.labels, ds.labels)
        assert np.abs(back.bins - ds.bins).max() < 1e-6

    def test_unlabeled_csv_has_no_label_column(self, tmp_path):
        ds = make_dataset(2, labeled=False)
        path = tmp_path / "u.csv"
        ss.save_dataset(ds, str(path))
        header = path.read_text().splitlines()[0]
        assert "label" not in header
        assert ss.load_dataset(str(path)).labels is None

    def test_two_row_csv_parses(self, tmp_path):
        path = tmp_path / "two.csv"
        header = ",".join(f"b{i}" for i in range(1024)) + ",label"
        row = ",".join(["-100"] * 1024)
        path.write_text(f"{header}\n{row},0\n{row},1\n")
        ds = ss.load_dataset(str(path))
        assert len(ds) == 2
        assert ds.labels.tolist() == [0, 1]

    def test_short_row_fails_with_row_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        header = ",".join(f"b{i}" for i in range(1024))
        path.write_text(f"{header}\n" + ",".join(["-1"] * 1023) + "\n")
        with pytest.raises(DataFormatError, match="row 1"):
            ss.load_dataset(str(path))

    def test_non_numeric_cell_fails(self, tmp_path):
        path = tmp_path / "junk.csv"
        header = ",".join(f"b{i}" for i in range(1024))
        good = ",".join(["-1"] * 1024)
        bad = ",".join(["-1"] * 1023 + ["oops"])
        path.write_text(f"{header}\n{good}\n{bad}\n")
        with pytest.raises(DataFormatError, match="row 2"):
            ss.load_dataset(str(path))


class TestBinaryRoundTrip:
    def test_bitwise_round_trip(self, tmp_path):
        ds = make_dataset(7)
        path = tmp_path / "d.bin"
        ss.save_dataset(ds, str(path))
        back = ss.load_dataset(str(path))
        assert np.array_equal(back.bins, ds.bins)  # float32 end to end
        assert np.array_equal(back.labels, ds.labels)

    def test_unlabeled_round_trip(self, tmp_path):
        ds = make_dataset(3, labeled=False)
        path = tmp_path / "u.bin"
        ss.save_dataset(ds, str(path))
        assert ss.load_dataset(str(path)).labels is None

    def test_truncated_file_rejected(self, tmp_path):
        ds = make_dataset(3)
        path = tmp_path / "t.bin"
        ss.save_dataset(ds, str(path))
        raw = path.read_bytes()
        path.write_bytes(raw[:-10])
        with pytest.raises(DataFormatError):
            ss.load_dataset(str(path))

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "m.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(DataFormatError):
            ss.load_dataset(str(path))


class TestNormalization:
    def test_hand_values(self):
        bins = np.stack([np.zeros(1024), np.full(1024, 2.0)]).astype(np.float32)
        ds = ss.Dataset(bins=bins)
        nds = ss.normalize_dataset(ds)
        # mean 1, population std 1 -> values map to -1 / +1
        assert nds.norm_stats.mean == pytest.approx(1.0)
        assert nds.norm_stats.std == pytest.approx(1.0)
        assert np.allclose(nds.bins[0], -1.0)
        assert np.allclose(nds.bins[1], 1.0)

    def test_global_moments_after_normalization(self):
        ds = make_dataset(20, seed=3)
        nds = ss.normalize_dataset(ds)
        assert abs(float(nds.bins.mean())) < 1e-6
        assert abs(float(nds.bins.std()) - 1.0) < 1e-6

    def test_denormalize_inverts(self):
        ds = make_dataset(5, seed=4)
        back = ss.denormalize_dataset(ss.normalize_dataset(ds))
        assert np.abs(back.bins - ds.bins).max() < 1e-5

    def test_already_normalized_passes_through(self):
        nds = ss.normalize_dataset(make_dataset(5))
        again = ss.normalize_dataset(nds)
        assert again.norm_stats == nds.norm_stats
        assert np.array_equal(again.bins, nds.bins)

    def test_explicit_stats_are_applied_not_refit(self):
        ds = make_dataset(5, seed=9)
        stats = ss.NormStats(mean=-100.0, std=5.0)
        nds = ss.normalize_dataset(ds, stats=stats)
        assert nds.norm_stats == stats
        assert np.allclose(nds.bins, (ds.bins - -100.0) / 5.0, atol=1e-6)

    def test_constant_dataset_is_degenerate(self):
        bins = np.full((3, 1024), -110.0, dtype=np.float32)
        with pytest.raises(DegenerateDataError):
            ss.normalize_dataset(ss.Dataset(bins=bins))

    def test_empty_dataset_rejected(self):
        with pytest.raises(Exception):
            ss.Dataset(bins=np.empty((0, 1024), dtype=np.float32))


class TestSyntheticGenerator:
    def test_seeded_determinism(self):
        p = ss.default_profile(3, seed=42)
        a = ss.synth_generate(p, 10)
        b = ss.synth_generate(p, 10)
        assert np.array_equal(a.bins, b.bins)
        assert np.array_equal(a.labels, b.labels)

    def test_batch_invariance(self):
        # the first rows of a bigger draw equal a smaller draw, per class
        p = ss.default_profile(2, seed=7)
        small = ss.synth_generate(p, 5)
        big = ss.synth_generate(p, 20)
        for cls in range(2):
            s = small.bins[small.labels == cls]
            g = big.bins[big.labels == cls][:5]
            assert np.array_equal(s, g)

    def test_labels_and_counts(self):
        p = ss.default_profile(4, seed=0)
        ds = ss.synth_generate(p, 25)
        assert len(ds) == 100
        assert np.bincount(ds.labels).tolist() == [25, 25, 25, 25]
        assert ds.class_names == ("wideband", "narrowband", "multitone", "pilotband")

    def test_noise_only_sigma_zero_is_exact_floor(self):
        tpl = ss.ClassTemplate("flat", "noise-only", center=(0, 1023), width=(1, 1), power_db=(0.0, 0.0))
        p = ss.SyntheticProfile(templates=(tpl,), noise_sigma_db=0.0, seed=1)
        ds = ss.synth_generate(p, 3)
        assert np.all(ds.bins == np.float32(-110.0))

    def test_narrowband_peak_lands_in_center_range(self):
        # Monte-Carlo against the generator definition: with +30 dB peaks the
        # argmax must fall inside the drawn center range almost always.
        tpl = ss.ClassTemplate("nb", "narrowband-peak", center=(200, 800), width=(24, 48), power_db=(30.0, 30.1))
        p = ss.SyntheticProfile(templates=(tpl,), seed=3)
        ds = ss.synth_generate(p, 1000)
        hits = 0
        for sweep, m in zip(ds.bins, ds.meta):
            if abs(int(np.argmax(sweep)) - m["center"]) <= m["width"] / 2:
                hits += 1
        assert hits >= 990

    def test_meta_records_draws(self):
        p = ss.default_profile(1, seed=5)
        ds = ss.synth_generate(p, 4)
        for m in ds.meta:
            assert p.templates[0].center[0] <= m["center"] <= p.templates[0].center[1]
            assert p.templates[0].width[0] <= m["width"] <= p.templates[0].width[1]

    def test_power_spread_is_wide(self):
        # every default template spans >= 15 dB of drawn power
        for tpl in ss.default_profile(4, seed=0).templates:
            assert tpl.power_db[1] - tpl.power_db[0] >= 15.0


class TestDatasetValidation:
    def test_wrong_bin_count_rejected(self):
        with pytest.raises(Exception):
            ss.Dataset(bins=np.zeros((2, 100), dtype=np.float32))

    def test_label_length_mismatch_rejected(self):
        with pytest.raises(Exception):
            ss.Dataset(
                bins=np.zeros((2, 1024), dtype=np.float32),
                labels=np.array([0], dtype=np.int32),
            )

    def test_nonfinite_bins_rejected(self):
        bins = np.zeros((2, 1024), dtype=np.float32)
        bins[1, 5] = np.nan
        with pytest.raises(Exception):
            ss.Dataset(bins=bins)

    def test_bins_are_read_only(self):
        ds = make_dataset(2)
        with pytest.raises(ValueError):
            ds.bins[0, 0] = 1.0
