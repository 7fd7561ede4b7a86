import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from fastapi.testclient import TestClient

from weaklab.corpus import save_project
from weaklab.server import (
    BadResponse,
    ModelServerConfig,
    ProjectStore,
    RemoteError,
    Timeout,
    bridge_predict,
    build_request,
    create_app,
)
from weaklab.sources import apply_text_match

from helpers import tiny_project


def spans_from_weak_column(document, column=0):
    """Independent run-decoder used by the echo stub: contiguous non-null
    votes of one source become {label, start, end} spans."""
    tokens = document["tokens"]
    weak = document["weak_annotations"]
    spans = []
    current = None  # [label, start_token, end_token]
    for t, per_source in enumerate(weak):
        tag = per_source[column] if column < len(per_source) else None
        if tag is None:
            current = None
            continue
        kind, label = tag.split("-", 1)
        if kind == "B" or current is None or current[0] != label:
            current = [label, t, t]
            spans.append(current)
        else:
            current[2] = t
    return [
        {
            "label": label,
            "start": tokens[t0]["start"],
            "end": tokens[t1]["end"],
        }
        for label, t0, t1 in spans
    ]


class StubHandler(BaseHTTPRequestHandler):
    requests_seen = []

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length)) if length else {}
        StubHandler.requests_seen.append(
            {"path": self.path, "payload": payload, "headers": dict(self.headers)}
        )
        if self.path == "/echo":
            body = {
                "predictions": [
                    {
                        "id": doc["id"],
                        "annotations": spans_from_weak_column(doc),
                    }
                    for doc in payload["documents"]
                ]
            }
            self._reply(200, body)
        elif self.path == "/bad_offset":
            body = {
                "predictions": [
                    {
                        "id": payload["documents"][0]["id"],
                        "annotations": [
                            {"label": "Material", "start": 0, "end": 4},
                            {"label": "Material", "start": 5, "end": 10_000},
                        ],
                    }
                ]
            }
            self._reply(200, body)
        elif self.path == "/unknown_label":
            body = {
                "predictions": [
                    {
                        "id": payload["documents"][0]["id"],
                        "annotations": [
                            {"label": "BrandNewLabel", "start": 0, "end": 4}
                        ],
                    }
                ]
            }
            self._reply(200, body)
        elif self.path == "/slow":
            time.sleep(1.5)
            self._reply(200, {"predictions": []})
        elif self.path == "/error":
            self._reply(500, {"oops": "model exploded"})
        elif self.path == "/not_json":
            self.send_response(200)
            self.send_header("Content-Type", "text/plain")
            self.end_headers()
            self.wfile.write(b"hello")
        else:
            self._reply(404, {"error": "unknown stub path"})

    def _reply(self, status, body):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)


@pytest.fixture(scope="module")
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


@pytest.fixture
def project_with_weak_layer():
    project = tiny_project()
    doc = project.documents["doc1"]
    spans = apply_text_match(doc, "TiO2", "Material", source_id="tm")
    spans += apply_text_match(doc, "degC", "Condition-Unit", source_id="tm")
    spans.sort(key=lambda a: a.start)
    project.set_layer("doc1", "tm", spans)
    return project


class TestWireFormat:
    def test_request_shape(self, project_with_weak_layer):
        request = build_request(project_with_weak_layer, ["doc1"], ["tm"])
        assert set(request) == {"documents", "label_set"}
        assert request["label_set"] == sorted(project_with_weak_layer.labels)
        doc = request["documents"][0]
        assert set(doc) == {"id", "text", "tokens", "weak_annotations"}
        assert doc["tokens"][0] == {"start": 0, "end": 4}
        n_tokens = len(doc["tokens"])
        weak = doc["weak_annotations"]
        assert len(weak) == n_tokens
        assert all(len(row) == 1 for row in weak)
        assert weak[0] == ["B-Material"]  # TiO2
        assert weak[1] == [None]  # powder: abstain, not "O"
        assert "O" not in {v for row in weak for v in row if v}


class TestBridgePredict:
    def test_echo_round_trip(self, stub_server, project_with_weak_layer):
        cfg = ModelServerConfig("echo", f"{stub_server}/echo", timeout=5)
        per_doc, labels = bridge_predict(
            cfg, project_with_weak_layer, ["doc1"], ["tm"]
        )
        weak = project_with_weak_layer.layer("doc1", "tm")
        assert [(a.label, a.start, a.end) for a in per_doc["doc1"]] == [
            (a.label, a.start, a.end) for a in weak
        ]
        assert labels == {"Material", "Condition-Unit"}
        assert all(a.provenance == "model:echo" for a in per_doc["doc1"])

    def test_bad_offset_names_annotation(self, stub_server, project_with_weak_layer):
        cfg = ModelServerConfig("bad", f"{stub_server}/bad_offset", timeout=5)
        with pytest.raises(BadResponse) as info:
            bridge_predict(cfg, project_with_weak_layer, ["doc1"], ["tm"])
        assert "annotations[1]" in str(info.value)

    def test_timeout(self, stub_server, project_with_weak_layer):
        cfg = ModelServerConfig("slow", f"{stub_server}/slow", timeout=0.2)
        with pytest.raises(Timeout):
            bridge_predict(cfg, project_with_weak_layer, ["doc1"], ["tm"])

    def test_remote_error_carries_body(self, stub_server, project_with_weak_layer):
        cfg = ModelServerConfig("err", f"{stub_server}/error", timeout=5)
        with pytest.raises(RemoteError) as info:
            bridge_predict(cfg, project_with_weak_layer, ["doc1"], ["tm"])
        assert info.value.status == 500
        assert "model exploded" in info.value.body

    def test_non_json_response(self, stub_server, project_with_weak_layer):
        cfg = ModelServerConfig("nj", f"{stub_server}/not_json", timeout=5)
        with pytest.raises(BadResponse):
            bridge_predict(cfg, project_with_weak_layer, ["doc1"], ["tm"])

    def test_unreachable_server(self, project_with_weak_layer):
        cfg = ModelServerConfig("gone", "http://127.0.0.1:9", timeout=0.5)
        with pytest.raises((RemoteError, Timeout)):
            bridge_predict(cfg, project_with_weak_layer, ["doc1"], ["tm"])


class TestBridgeEndpoint:
    def make_client(self, tmp_path, project):
        save_project(project, str(tmp_path))
        store = ProjectStore(str(tmp_path))
        return TestClient(create_app(store)), store

    def test_predict_stores_model_layer(
        self, tmp_path, stub_server, project_with_weak_layer
    ):
        client, store = self.make_client(tmp_path, project_with_weak_layer)
        with client:
            resp = client.post(
                "/model/echo/predict",
                json={"url": f"{stub_server}/echo", "layers": ["tm"]},
            )
            assert resp.status_code == 200, resp.text
            assert resp.json()["layer"] == "model:echo"
            stored = client.get("/docs/doc1/annotations/model:echo").json()
            weak = client.get("/docs/doc1/annotations/tm").json()
            got = [
                (a["label"], a["start"], a["end"])
                for a in stored["annotations"]
            ]
            want = [
                (a["label"], a["start"], a["end"]) for a in weak["annotations"]
            ]
            assert got == want

    def test_failure_writes_no_layer(
        self, tmp_path, stub_server, project_with_weak_layer
    ):
        client, store = self.make_client(tmp_path, project_with_weak_layer)
        with client:
            resp = client.post(
                "/model/bad/predict",
                json={"url": f"{stub_server}/bad_offset", "layers": ["tm"]},
            )
            assert resp.status_code == 502
            detail = resp.json()["detail"]
            assert detail["error"] == "BadResponse"
            assert "annotations[1]" in detail["message"]
            layer = client.get("/docs/doc1/annotations/model:bad").json()
            assert layer["annotations"] == []
            assert layer["version"] == 0

    def test_timeout_maps_to_502(self, tmp_path, stub_server, project_with_weak_layer):
        client, _ = self.make_client(tmp_path, project_with_weak_layer)
        with client:
            resp = client.post(
                "/model/slow/predict",
                json={
                    "url": f"{stub_server}/slow",
                    "layers": ["tm"],
                    "timeout": 0.2,
                },
            )
            assert resp.status_code == 502
            assert resp.json()["detail"]["error"] == "Timeout"

    def test_unknown_label_admitted_with_flag(
        self, tmp_path, stub_server, project_with_weak_layer
    ):
        client, store = self.make_client(tmp_path, project_with_weak_layer)
        with client:
            resp = client.post(
                "/model/nova/predict",
                json={"url": f"{stub_server}/unknown_label", "layers": ["tm"]},
            )
            assert resp.status_code == 200
            assert "BrandNewLabel" in store.project.model_labels
            assert "BrandNewLabel" not in store.project.labels
            projects = client.get("/projects").json()[0]
            assert "BrandNewLabel" in projects["model_labels"]

    def test_unknown_model_server_404(self, tmp_path, project_with_weak_layer):
        client, _ = self.make_client(tmp_path, project_with_weak_layer)
        with client:
            resp = client.post("/model/ghost/predict", json={})
            assert resp.status_code == 404

    def test_env_var_seeds_default_config(
        self, tmp_path, stub_server, project_with_weak_layer, monkeypatch
    ):
        monkeypatch.setenv("WEAKLAB_MODEL_URL", f"{stub_server}/echo")
        save_project(project_with_weak_layer, str(tmp_path / "p2"))
        store = ProjectStore(str(tmp_path / "p2"))
        with TestClient(create_app(store)) as client:
            resp = client.post("/model/default/predict", json={"layers": ["tm"]})
            assert resp.status_code == 200
