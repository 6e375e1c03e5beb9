"""Artifact persistence: bitwise round trips, integrity refusal, label map."""

import json
import os

import numpy as np
import pytest

import specsense as ss
from specsense import LabelMap, load_artifact, save_artifact
from specsense.artifact import build_meta, dataset_fingerprint
from specsense.errors import ArtifactIntegrityError


@pytest.fixture(scope="module")
def original(tiny_ssdc_report, small_dataset):
    meta = ss.build_meta(5, 2, small_dataset, extra={"variant": "ssdc", "surrogate": False})
    return ss.artifact_from_training(tiny_ssdc_report, small_dataset, meta=meta)


@pytest.fixture(scope="module")
def loaded(original, tmp_path_factory):
    path = str(tmp_path_factory.mktemp("roundtrip") / "artifact.json")
    save_artifact(original, path)
    return load_artifact(path)


class TestRoundTrip:
    def test_weights_bitwise(self, original, loaded):
        for mine, theirs in zip(original.model.layers, loaded.model.layers):
            assert mine.spec() == theirs.spec()
            for name, arr in mine.params().items():
                assert np.array_equal(arr, theirs.params()[name]), name
            for name, arr in mine.state().items():
                assert np.array_equal(arr, theirs.state()[name]), name

    def test_clustering_arrays_bitwise(self, original, loaded):
        # centroids and the PCA basis are stored float64 so that assignment
        # arithmetic is identical before and after the round trip
        assert loaded.cluster_model.centroids.dtype == np.float64
        assert np.array_equal(original.cluster_model.centroids, loaded.cluster_model.centroids)
        assert np.array_equal(original.cluster_model.pca.mean, loaded.cluster_model.pca.mean)
        assert np.array_equal(
            original.cluster_model.pca.components, loaded.cluster_model.pca.components
        )
        assert original.cluster_model.inertia == loaded.cluster_model.inertia

    def test_stats_and_meta(self, original, loaded):
        assert original.norm_stats.mean == loaded.norm_stats.mean
        assert original.norm_stats.std == loaded.norm_stats.std
        assert np.array_equal(original.cluster_counts, loaded.cluster_counts)
        assert original.meta == loaded.meta
        assert loaded.k == original.k

    def test_assignments_survive(self, original, loaded, small_dataset):
        emb0 = ss.embed_array(original.model, small_dataset.bins)
        emb1 = ss.embed_array(loaded.model, small_dataset.bins)
        assert np.array_equal(emb0, emb1)
        pts0 = ss.pca_transform(original.cluster_model.pca, emb0.astype(np.float64))
        pts1 = ss.pca_transform(loaded.cluster_model.pca, emb1.astype(np.float64))
        l0, _ = ss.kmeans_assign(original.cluster_model, pts0)
        l1, _ = ss.kmeans_assign(loaded.cluster_model, pts1)
        assert np.array_equal(l0, l1)

    def test_empty_cluster_average_stays_nan(self, original, tmp_path):
        rigged = ss.ModelArtifact(
            model=original.model,
            norm_stats=original.norm_stats,
            cluster_model=original.cluster_model,
            cluster_counts=np.array([0] + list(original.cluster_counts[1:])),
            cluster_averages_db=original.cluster_averages_db.copy(),
            cluster_medoids_db=original.cluster_medoids_db,
            meta={},
        )
        rigged.cluster_averages_db[0] = np.nan
        path = str(tmp_path / "rigged.json")
        save_artifact(rigged, path)
        back = load_artifact(path)
        assert np.isnan(back.cluster_averages_db[0]).all()
        assert np.isfinite(back.cluster_averages_db[1:]).all()

    def test_no_temp_files_left(self, tiny_artifact):
        siblings = os.listdir(os.path.dirname(tiny_artifact))
        assert [s for s in siblings if s.endswith(".tmp")] == []

    def test_overwrite_replaces_whole_document(self, original, tmp_path):
        path = str(tmp_path / "a.json")
        save_artifact(original, path)
        relabeled = ss.ModelArtifact(
            model=original.model,
            norm_stats=original.norm_stats,
            cluster_model=original.cluster_model,
            cluster_counts=original.cluster_counts,
            cluster_averages_db=original.cluster_averages_db,
            cluster_medoids_db=original.cluster_medoids_db,
            meta={"generation": 2},
        )
        save_artifact(relabeled, path)
        assert load_artifact(path).meta == {"generation": 2}


def _tamper(path, tmp_path, mutate):
    with open(path) as fh:
        doc = json.load(fh)
    mutate(doc)
    out = str(tmp_path / "tampered.json")
    with open(out, "w") as fh:
        json.dump(doc, fh)
    return out


class TestIntegrity:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactIntegrityError):
            load_artifact(str(tmp_path / "nope.json"))

    def test_not_json(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("{not json")
        with pytest.raises(ArtifactIntegrityError):
            load_artifact(str(path))

    def test_unsupported_version(self, tiny_artifact, tmp_path):
        bad = _tamper(tiny_artifact, tmp_path, lambda d: d.update(format_version=99))
        with pytest.raises(ArtifactIntegrityError, match="version"):
            load_artifact(bad)

    def test_unknown_architecture(self, tiny_artifact, tmp_path):
        bad = _tamper(tiny_artifact, tmp_path, lambda d: d.update(arch="mlp"))
        with pytest.raises(ArtifactIntegrityError, match="architecture"):
            load_artifact(bad)

    def test_param_count_mismatch(self, tiny_artifact, tmp_path):
        bad = _tamper(tiny_artifact, tmp_path, lambda d: d.update(param_count=1))
        with pytest.raises(ArtifactIntegrityError, match="parameters"):
            load_artifact(bad)

    def test_truncated_weight_blob(self, tiny_artifact, tmp_path):
        def chop(doc):
            blob = doc["layers"][0]["w"]["data"]
            doc["layers"][0]["w"]["data"] = blob[: len(blob) // 2]

        with pytest.raises(ArtifactIntegrityError):
            load_artifact(_tamper(tiny_artifact, tmp_path, chop))

    def test_invalid_base64(self, tiny_artifact, tmp_path):
        def corrupt(doc):
            doc["layers"][0]["w"]["data"] = "!!!not-base64!!!"

        with pytest.raises(ArtifactIntegrityError):
            load_artifact(_tamper(tiny_artifact, tmp_path, corrupt))

    def test_wrong_array_shape(self, tiny_artifact, tmp_path):
        def reshape(doc):
            doc["layers"][0]["w"]["shape"] = [1, 1, 1]

        with pytest.raises(ArtifactIntegrityError):
            load_artifact(_tamper(tiny_artifact, tmp_path, reshape))

    def test_missing_layer_array(self, tiny_artifact, tmp_path):
        def drop(doc):
            del doc["layers"][0]["w"]

        with pytest.raises(ArtifactIntegrityError, match="missing"):
            load_artifact(_tamper(tiny_artifact, tmp_path, drop))

    def test_centroid_dimension_mismatch(self, tiny_artifact, tmp_path):
        def stretch(doc):
            doc["k"] = 7

        with pytest.raises(ArtifactIntegrityError):
            load_artifact(_tamper(tiny_artifact, tmp_path, stretch))

    def test_non_finite_values_rejected(self, tiny_artifact, tmp_path):
        import base64

        def poison(doc):
            spec = doc["centroids"]
            raw = bytearray(base64.b64decode(spec["data"]))
            raw[:8] = np.array([np.inf]).tobytes()
            spec["data"] = base64.b64encode(bytes(raw)).decode()

        with pytest.raises(ArtifactIntegrityError, match="non-finite"):
            load_artifact(_tamper(tiny_artifact, tmp_path, poison))


class TestFingerprint:
    def test_deterministic_and_prefixed(self, small_dataset):
        a = dataset_fingerprint(small_dataset)
        assert a == dataset_fingerprint(small_dataset)
        assert a.startswith("sha256:")

    def test_sensitive_to_bins_and_labels(self, small_dataset):
        tweaked = ss.Dataset(
            bins=small_dataset.bins + np.float32(1e-3),
            labels=small_dataset.labels,
            class_names=small_dataset.class_names,
            norm_stats=small_dataset.norm_stats,
        )
        relabeled = ss.Dataset(
            bins=small_dataset.bins,
            labels=(small_dataset.labels + 1) % 3,
            class_names=small_dataset.class_names,
            norm_stats=small_dataset.norm_stats,
        )
        fp = dataset_fingerprint(small_dataset)
        assert dataset_fingerprint(tweaked) != fp
        assert dataset_fingerprint(relabeled) != fp

    def test_build_meta_fields(self, small_dataset):
        meta = build_meta(5, 2, small_dataset, extra={"variant": "ssdc"})
        assert meta["seed"] == 5
        assert meta["epochs"] == 2
        assert meta["n_sweeps"] == 120
        assert meta["dataset_fingerprint"] == dataset_fingerprint(small_dataset)
        assert meta["variant"] == "ssdc"
        assert "T" in meta["trained_at"]


class TestFromTraining:
    def test_counts_match_final_labels(self, original, tiny_ssdc_report):
        want = np.bincount(tiny_ssdc_report.final_labels, minlength=4)
        assert np.array_equal(original.cluster_counts, want)
        assert int(original.cluster_counts.sum()) == 120

    def test_averages_match_metrics(self, original, tiny_ssdc_report, small_dataset):
        want, _ = ss.cluster_averages(small_dataset, tiny_ssdc_report.final_labels, 4)
        np.testing.assert_array_equal(
            np.nan_to_num(original.cluster_averages_db, nan=-1.0),
            np.nan_to_num(want, nan=-1.0),
        )

    def test_medoid_is_nearest_member(self, original, tiny_ssdc_report, small_dataset):
        cm = original.cluster_model
        emb = ss.embed_array(original.model, small_dataset.bins).astype(np.float64)
        pts = ss.pca_transform(cm.pca, emb)
        labels = tiny_ssdc_report.final_labels
        _, d2 = ss.kmeans_assign(cm, pts)
        for cid in range(4):
            members = np.nonzero(labels == cid)[0]
            if not len(members):
                continue
            best = members[np.argmin(d2[members])]
            want = ss.denormalize_bins(small_dataset.bins[best], small_dataset.norm_stats)
            np.testing.assert_allclose(original.cluster_medoids_db[cid], want, atol=1e-6)

    def test_medoid_classifies_to_own_cluster(self, original, tiny_ssdc_report, small_dataset):
        for cid in range(4):
            if original.cluster_counts[cid] == 0:
                continue
            res = ss.predict(
                original.model,
                original.cluster_model,
                {},
                original.cluster_medoids_db[cid].astype(np.float32),
                small_dataset.norm_stats,
            )
            assert res.cluster_id == cid


class TestLabelMap:
    def test_fresh_map_defaults(self, tmp_path):
        lm = LabelMap(path=str(tmp_path / "labels.json"), k=4)
        assert lm.revision == 0
        assert lm.get(0) == "unmapped"
        assert lm.as_dict() == {}

    def test_set_label_bumps_revision_and_persists(self, tmp_path):
        path = str(tmp_path / "labels.json")
        lm = LabelMap(path=path, k=4)
        assert lm.set_label(2, "LTE") == 1
        assert lm.set_label(0, "WiFi") == 2
        back = LabelMap.load(path, k=4)
        assert back.revision == 2
        assert back.get(2) == "LTE"
        assert back.get(0) == "WiFi"
        assert back.get(1) == "unmapped"

    def test_last_write_wins(self, tmp_path):
        lm = LabelMap(path=str(tmp_path / "labels.json"), k=4)
        lm.set_label(1, "LTE")
        rev = lm.set_label(1, "5G NR")
        assert rev == 2
        assert lm.get(1) == "5G NR"

    def test_load_missing_file_is_empty(self, tmp_path):
        lm = LabelMap.load(str(tmp_path / "absent.json"), k=4)
        assert lm.revision == 0
        assert lm.as_dict() == {}

    def test_out_of_range_id_rejected(self, tmp_path):
        lm = LabelMap(path=str(tmp_path / "labels.json"), k=4)
        with pytest.raises(ValueError):
            lm.set_label(4, "LTE")
        with pytest.raises(ValueError):
            lm.set_label(-1, "LTE")

    def test_blank_label_rejected(self, tmp_path):
        lm = LabelMap(path=str(tmp_path / "labels.json"), k=4)
        with pytest.raises(ValueError):
            lm.set_label(0, "   ")

    def test_label_whitespace_trimmed(self, tmp_path):
        lm = LabelMap(path=str(tmp_path / "labels.json"), k=4)
        lm.set_label(0, "  LTE  ")
        assert lm.get(0) == "LTE"

    def test_load_validates_ids_against_k(self, tmp_path):
        path = str(tmp_path / "labels.json")
        lm = LabelMap(path=path, k=10)
        lm.set_label(7, "LTE")
        with pytest.raises(ArtifactIntegrityError):
            LabelMap.load(path, k=4)

    def test_corrupt_file_rejected(self, tmp_path):
        path = tmp_path / "labels.json"
        path.write_text("{broken")
        with pytest.raises(ArtifactIntegrityError):
            LabelMap.load(str(path), k=4)

    def test_wrong_version_rejected(self, tmp_path):
        path = tmp_path / "labels.json"
        path.write_text(json.dumps({"format_version": 9, "revision": 1, "entries": {}}))
        with pytest.raises(ArtifactIntegrityError):
            LabelMap.load(str(path), k=4)

    def test_file_always_complete_json(self, tmp_path):
        # every persisted generation must parse; rename-into-place means a
        # reader can never observe a half-written document
        path = str(tmp_path / "labels.json")
        lm = LabelMap(path=path, k=8)
        for i in range(20):
            lm.set_label(i % 8, f"label-{i}")
            with open(path) as fh:
                doc = json.load(fh)
            assert doc["revision"] == i + 1
        assert [s for s in os.listdir(tmp_path) if s.endswith(".tmp")] == []

    def test_updated_at_recorded(self, tmp_path):
        path = str(tmp_path / "labels.json")
        lm = LabelMap(path=path, k=4)
        lm.set_label(3, "WiFi")
        with open(path) as fh:
            doc = json.load(fh)
        assert "T" in doc["entries"]["3"]["updated_at"]
