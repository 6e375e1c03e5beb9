"""HTTP classification service over a trained artifact.

Stdlib-only server (ThreadingHTTPServer): many concurrent readers share the
immutable model, label writes serialize through one lock and persist
atomically before the response goes out.  Endpoints live under /v1 and speak
JSON; an optional permissive CORS mode serves browser clients.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .artifact import LabelMap, ModelArtifact, load_artifact
from .errors import SpecsenseError
from .nn import complexity_report
from .ssdc import predict

_PUT_LABEL = re.compile(r"^/v1/clusters/(\d+)/label$")


class _RequestError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class ServiceState:
    """Shared state behind the handlers: immutable model, mutable labels."""

    def __init__(self, artifact: ModelArtifact, labelmap: LabelMap):
        self.artifact = artifact
        self.labelmap = labelmap
        self.lock = threading.Lock()
        self.params, self.gflops = complexity_report(artifact.model)

    def parse_fft(self, body: dict) -> np.ndarray:
        if not isinstance(body, dict) or "fft" not in body:
            raise _RequestError(400, "body must be a JSON object with an 'fft' field")
        fft = body["fft"]
        if not isinstance(fft, list):
            raise _RequestError(400, "'fft' must be an array of numbers")
        if len(fft) != 1024:
            raise _RequestError(400, f"'fft' must hold exactly 1024 bins, got {len(fft)}")
        try:
            arr = np.asarray(fft, dtype=np.float64)
        except (TypeError, ValueError):
            raise _RequestError(400, "'fft' must hold only numbers") from None
        if arr.ndim != 1 or not np.isfinite(arr).all():
            raise _RequestError(400, "'fft' must hold only finite numbers")
        return arr

    def classify(self, bins: np.ndarray) -> dict:
        with self.lock:
            labels = self.labelmap.as_dict()
        result = predict(
            self.artifact.model,
            self.artifact.cluster_model,
            labels,
            bins,
            self.artifact.norm_stats,
        )
        return {
            "cluster_id": int(result.cluster_id),
            "label": result.label,
            "confidence": float(result.confidence),
            "embedding": [float(v) for v in result.embedding],
        }

    def embed(self, bins: np.ndarray) -> dict:
        # same code path as classify so the two endpoints agree bit for bit
        return {"embedding": self.classify(bins)["embedding"]}

    def clusters(self) -> dict:
        art = self.artifact
        with self.lock:
            labels = self.labelmap.as_dict()
            revision = self.labelmap.revision
        rows = []
        for cid in range(art.k):
            count = int(art.cluster_counts[cid])
            avg = art.cluster_averages_db[cid]
            rows.append(
                {
                    "id": cid,
                    "count": count,
                    "label": labels.get(cid),
                    "average": [float(v) for v in avg] if count > 0 else None,
                    "centroid2d": [float(v) for v in art.cluster_model.centroids[cid, :2]],
                }
            )
        return {"k": art.k, "revision": revision, "clusters": rows}

    def set_label(self, cluster_id: int, body: dict) -> dict:
        if cluster_id >= self.artifact.k:
            raise _RequestError(404, f"cluster {cluster_id} does not exist (k={self.artifact.k})")
        if not isinstance(body, dict) or "label" not in body:
            raise _RequestError(400, "body must be a JSON object with a 'label' field")
        label = body["label"]
        if not isinstance(label, str) or not label.strip():
            raise _RequestError(400, "'label' must be a non-empty string")
        with self.lock:
            revision = self.labelmap.set_label(cluster_id, label)
        return {"revision": revision}

    def model_info(self) -> dict:
        meta = self.artifact.meta
        return {
            "arch": self.artifact.model.arch,
            "k": self.artifact.k,
            "params": self.params,
            "gflops": self.gflops,
            "trained_at": meta.get("trained_at"),
            "seed": meta.get("seed"),
        }


def _make_handler(state: ServiceState, cors: bool, quiet: bool):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "specsense"

        def log_message(self, fmt, *args):
            if not quiet:
                super().log_message(fmt, *args)

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            if cors:
                self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if not raw:
                raise _RequestError(400, "request body required")
            try:
                return json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise _RequestError(400, "request body is not valid JSON") from None

        def _dispatch(self, method: str) -> None:
            path = self.path.split("?", 1)[0]
            try:
                if method == "GET" and path == "/v1/model/info":
                    self._send(200, state.model_info())
                elif method == "GET" and path == "/v1/clusters":
                    self._send(200, state.clusters())
                elif method == "POST" and path == "/v1/classify":
                    self._send(200, state.classify(state.parse_fft(self._read_body())))
                elif method == "POST" and path == "/v1/embed":
                    self._send(200, state.embed(state.parse_fft(self._read_body())))
                elif method == "PUT" and _PUT_LABEL.match(path):
                    cid = int(_PUT_LABEL.match(path).group(1))
                    self._send(200, state.set_label(cid, self._read_body()))
                else:
                    self._send(404, {"error": f"no route for {method} {path}"})
            except _RequestError as exc:
                self._send(exc.status, {"error": exc.message})
            except SpecsenseError as exc:
                self._send(400, {"error": str(exc)})
            except Exception as exc:  # noqa: BLE001 - boundary
                self._send(500, {"error": f"internal error: {exc}"})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_PUT(self):
            self._dispatch("PUT")

        def do_OPTIONS(self):
            self.send_response(204)
            if cors:
                self.send_header("Access-Control-Allow-Origin", "*")
                self.send_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS")
                self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

    return Handler


class Service:
    """A running (or startable) HTTP service bound to a port."""

    def __init__(self, state: ServiceState, host: str, port: int, cors: bool, quiet: bool):
        self.state = state
        self.server = ThreadingHTTPServer((host, port), _make_handler(state, cors, quiet))
        self.server.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    def start(self) -> "Service":
        """Serve on a background thread (tests and embedding callers)."""
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.server.serve_forever()

    def shutdown(self) -> None:
        self.server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.server.server_close()


def create_service(
    artifact_path: str,
    labelmap_path: str,
    port: int = 8080,
    host: str = "127.0.0.1",
    cors: bool = True,
    quiet: bool = True,
) -> Service:
    """Load the artifact, open/initialize the label map, bind the port."""
    artifact = load_artifact(artifact_path)
    labelmap = LabelMap.load(labelmap_path, k=artifact.k)
    labelmap.path = labelmap_path
    return Service(ServiceState(artifact, labelmap), host, port, cors, quiet)
