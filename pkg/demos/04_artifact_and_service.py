"""Train briefly, persist the model as a versioned artifact, reload it,
and serve it over HTTP: classify a sweep, name its cluster, and watch the
label survive a service restart.

Run from the repository root:

    python3 demos/04_artifact_and_service.py
"""

import http.client
import json
import tempfile
from pathlib import Path

import numpy as np

import specsense as ss


def call(port, method, path, body=None):
    conn = http.client.HTTPConnection("127.0.0.1", port, timeout=10)
    try:
        conn.request(method, path, body=None if body is None else json.dumps(body))
        response = conn.getresponse()
        return json.loads(response.read().decode("utf-8"))
    finally:
        conn.close()


workdir = Path(tempfile.mkdtemp(prefix="specsense-demo-"))
artifact_path = str(workdir / "model.artifact.json")
labels_path = str(workdir / "labels.json")

# --- train and persist -------------------------------------------------------
profile = ss.default_profile(3, seed=5)
dataset = ss.normalize_dataset(ss.synth_generate(profile, 60))
report = ss.train_ssdc(dataset, ss.TrainConfig(epochs=3, batch_size=64, k=4, seed=5))
meta = ss.build_meta(seed=5, epochs=3, dataset=dataset, extra={"variant": "ssdc"})
artifact = ss.artifact_from_training(report, dataset, meta=meta)
ss.save_artifact(artifact, artifact_path)
print(f"saved {artifact_path} ({Path(artifact_path).stat().st_size / 1024:.0f} KiB)")

# The loader refuses artifacts whose blobs do not match their declared
# layout, so a clean load doubles as an integrity check.
loaded = ss.load_artifact(artifact_path)
print(f"reloaded: k={loaded.k}, {loaded.model.param_count():,} parameters")

# --- serve -------------------------------------------------------------------
service = ss.create_service(artifact_path, labels_path, port=0).start()
print(f"serving on 127.0.0.1:{service.port}")

info = call(service.port, "GET", "/v1/model/info")
print(f"model/info: arch={info['arch']} k={info['k']} params={info['params']:,}")

sweep = ss.denormalize_bins(dataset.bins[0], dataset.norm_stats)
result = call(service.port, "POST", "/v1/classify", {"fft": [float(v) for v in sweep]})
cluster = result["cluster_id"]
print(f"classify: cluster={cluster} label={result['label']} confidence={result['confidence']:.3f}")

call(service.port, "PUT", f"/v1/clusters/{cluster}/label", {"label": "LTE"})
result = call(service.port, "POST", "/v1/classify", {"fft": [float(v) for v in sweep]})
print(f"after labeling: label={result['label']}")

service.shutdown()

# --- restart: labels persist on disk, not in process memory ------------------
service = ss.create_service(artifact_path, labels_path, port=0).start()
rows = call(service.port, "GET", "/v1/clusters")["clusters"]
named = {row["id"]: row["label"] for row in rows if row["label"]}
print(f"after restart, labeled clusters: {named}")
service.shutdown()
