"""Bridge to an external model server.

The server receives tokenized documents plus the current weak annotations
and returns span predictions under a fixed JSON contract. The bridge
validates every prediction before anything is stored, so a bad response
never leaves a half-written layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import urlparse

import httpx

from ..corpus import Document, Project, SpanAnnotation, model_provenance
from ..errors import BridgeError
from ..tags import TagSpace, build_vote_grid


class Timeout(BridgeError):
    pass


class RemoteError(BridgeError):
    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class BadResponse(BridgeError):
    """Schema violation; the message carries a path into the JSON."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ModelServerConfig:
    name: str
    url: str
    timeout: float = 30.0
    auth_header: str | None = None

    def __post_init__(self):
        parsed = urlparse(self.url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ValueError(f"invalid model server url {self.url!r}")


def build_request(
    project: Project, doc_ids: list[str], layers: list[str]
) -> dict:
    """Assemble the wire payload: tokens plus a token x source matrix of
    weak votes, null meaning abstention."""
    tag_space = TagSpace(sorted(project.labels))
    symbols = tag_space.tags
    documents = []
    for doc_id in doc_ids:
        doc = project.documents[doc_id]
        grid = build_vote_grid(
            doc,
            {layer: project.layer(doc_id, layer) for layer in layers},
            tag_space,
            layers,
        )
        weak = [
            [
                None if int(v) == tag_space.abs_index else symbols[int(v)]
                for v in row
            ]
            for row in grid.obs
        ]
        documents.append(
            {
                "id": doc_id,
                "text": doc.text,
                "tokens": [{"start": t.start, "end": t.end} for t in doc.tokens],
                "weak_annotations": weak,
            }
        )
    return {
        "documents": documents,
        "label_set": sorted(project.known_labels()),
    }


def call_model_server(cfg: ModelServerConfig, request: dict) -> dict:
    headers = {"Content-Type": "application/json"}
    if cfg.auth_header:
        headers["Authorization"] = cfg.auth_header
    try:
        response = httpx.post(
            cfg.url, json=request, headers=headers, timeout=cfg.timeout
        )
    except httpx.TimeoutException as exc:
        raise Timeout(f"model server {cfg.name!r} timed out: {exc}") from exc
    except httpx.HTTPError as exc:
        raise RemoteError(f"model server {cfg.name!r} unreachable: {exc}") from exc
    if response.status_code < 200 or response.status_code >= 300:
        raise RemoteError(
            f"model server {cfg.name!r} returned {response.status_code}",
            status=response.status_code,
            body=response.text[:2000],
        )
    try:
        return response.json()
    except ValueError as exc:
        raise BadResponse("$", f"response is not JSON: {exc}") from exc


def parse_response(
    payload: dict,
    docs_by_id: dict[str, Document],
    server_name: str,
) -> tuple[dict[str, list[SpanAnnotation]], set[str]]:
    """Validate predictions and convert them to annotations.

    Returns (annotations per doc, labels unseen in the request's label set
    handling left to the caller). Any violation raises BadResponse naming
    the offending JSON path; nothing is partially converted.
    """
    if not isinstance(payload, dict):
        raise BadResponse("$", "expected an object")
    predictions = payload.get("predictions")
    if not isinstance(predictions, list):
        raise BadResponse("$.predictions", "expected a list")
    per_doc: dict[str, list[SpanAnnotation]] = {}
    labels_seen: set[str] = set()
    for i, item in enumerate(predictions):
        path = f"$.predictions[{i}]"
        if not isinstance(item, dict):
            raise BadResponse(path, "expected an object")
        doc_id = item.get("id")
        if doc_id not in docs_by_id:
            raise BadResponse(f"{path}.id", f"unknown document {doc_id!r}")
        if doc_id in per_doc:
            raise BadResponse(f"{path}.id", f"duplicate document {doc_id!r}")
        doc = docs_by_id[doc_id]
        anns_json = item.get("annotations")
        if not isinstance(anns_json, list):
            raise BadResponse(f"{path}.annotations", "expected a list")
        anns = []
        for k, raw in enumerate(anns_json):
            apath = f"{path}.annotations[{k}]"
            if not isinstance(raw, dict):
                raise BadResponse(apath, "expected an object")
            label = raw.get("label")
            if not isinstance(label, str) or not label or label.split() != [label]:
                raise BadResponse(f"{apath}.label", f"bad label {label!r}")
            start, end = raw.get("start"), raw.get("end")
            if not isinstance(start, int) or not isinstance(end, int):
                raise BadResponse(apath, "start/end must be integers")
            if not (0 <= start < end <= len(doc.text)):
                raise BadResponse(
                    f"{apath}.end",
                    f"span {start}..{end} out of bounds for document "
                    f"{doc_id!r} of length {len(doc.text)}",
                )
            labels_seen.add(label)
            anns.append(
                SpanAnnotation(
                    f"T{k + 1}",
                    label,
                    start,
                    end,
                    doc.text[start:end],
                    model_provenance(server_name),
                )
            )
        anns.sort(key=lambda a: (a.start, a.end, a.label))
        per_doc[doc_id] = [
            SpanAnnotation(f"T{n}", a.label, a.start, a.end, a.surface, a.provenance)
            for n, a in enumerate(anns, start=1)
        ]
    return per_doc, labels_seen


def bridge_predict(
    cfg: ModelServerConfig,
    project: Project,
    doc_ids: list[str],
    layers: list[str],
) -> tuple[dict[str, list[SpanAnnotation]], set[str]]:
    """Round trip: build request, call the server, validate.

    Pure with respect to the project: storing the returned layers (and
    admitting unknown labels) is the caller's decision.
    """
    request = build_request(project, doc_ids, layers)
    payload = call_model_server(cfg, request)
    docs_by_id = {d: project.documents[d] for d in doc_ids}
    return parse_response(payload, docs_by_id, cfg.name)
