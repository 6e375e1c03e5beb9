import numpy as np
import pytest

import specsense as ss


@pytest.fixture(scope="session")
def small_dataset():
    """120 labeled sweeps, 3 well-separated classes, normalized."""
    profile = ss.default_profile(3, seed=11)
    return ss.normalize_dataset(ss.synth_generate(profile, 40))


@pytest.fixture(scope="session")
def tiny_ssdc_report(small_dataset):
    """A 2-round SSDC run shared by the artifact/service/predict tests."""
    cfg = ss.TrainConfig(epochs=2, batch_size=32, k=4, seed=5)
    return ss.train_ssdc(small_dataset, cfg)


@pytest.fixture(scope="session")
def tiny_artifact(tmp_path_factory, tiny_ssdc_report, small_dataset):
    path = tmp_path_factory.mktemp("artifact") / "artifact.json"
    meta = ss.build_meta(5, 2, small_dataset, extra={"variant": "ssdc", "surrogate": False})
    artifact = ss.artifact_from_training(tiny_ssdc_report, small_dataset, meta=meta)
    ss.save_artifact(artifact, str(path))
    return str(path)


def assert_close(actual, expected, tol=1e-9, label=""):
    __tracebackhide__ = True
    if abs(actual - expected) > tol:
        raise AssertionError(f"{label or 'value'}: {actual!r} != {expected!r} (tol {tol})")


@pytest.fixture
def rng():
    return np.random.default_rng(0)
