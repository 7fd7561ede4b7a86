"""HTTP annotation service: project browsing, layer editing with optimistic
versioning, weak-source management, denoising jobs, evaluation, the model-
server bridge, and .ann export."""

from __future__ import annotations

import io
import os
import zipfile

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from ..corpus import (
    GOLD_LAYER,
    ann_from_json,
    ann_to_json,
    atomic_write_text,
    serialize_ann,
    validate,
    validate_annotations,
)
from ..denoiser import FitConfig, denoise_corpus, params_to_json
from ..errors import (
    DegenerateLikelihood,
    NoSources,
    OverlapError,
    PatternSyntax,
    UnknownLabel,
    WeaklabError,
)
from ..evaluation import MODE_EXACT, layer_metrics
from ..sources import (
    WeakSource,
    apply_source,
    build_dictionary,
    source_from_json,
    source_to_json,
)
from .bridge import BridgeError, ModelServerConfig, bridge_predict
from .jobs import JobRegistry
from .store import ProjectStore, VersionConflict

ENV_MODEL_URL = "WEAKLAB_MODEL_URL"


class LayerBody(BaseModel):
    version: int
    annotations: list[dict]


class SourceBody(BaseModel):
    id: str
    kind: str
    priority: int = 0
    payload: dict


class DenoiseBody(BaseModel):
    sources: list[str]
    max_iters: int = 50
    rel_tol: float = 1e-4
    epsilon: float = 1e-6
    seed: int = 0


class DictBuildBody(BaseModel):
    id: str
    docs: list[str] | None = None
    case_sensitive: bool = True
    priority: int = 0


class DictApplyBody(BaseModel):
    id: str
    doc: str = "all"


class EvaluateBody(BaseModel):
    pred: str
    gold: str = GOLD_LAYER
    mode: str = MODE_EXACT


class PredictBody(BaseModel):
    docs: list[str] | None = None
    layers: list[str] | None = None
    url: str | None = None
    timeout: float = Field(default=30.0, gt=0)


def _http_error(status: int, error: str, message: str, **extra):
    return HTTPException(status, {"error": error, "message": message, **extra})


def create_app(
    store: ProjectStore,
    model_configs: dict[str, ModelServerConfig] | None = None,
    frontend_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="weaklab", docs_url=None, redoc_url=None)
    jobs = JobRegistry()
    app.state.store = store
    app.state.jobs = jobs

    models = dict(model_configs or {})
    env_url = os.environ.get(ENV_MODEL_URL)
    if env_url and "default" not in models:
        models["default"] = ModelServerConfig("default", env_url)

    project = store.project

    def get_doc(doc_id: str):
        doc = project.documents.get(doc_id)
        if doc is None:
            raise _http_error(404, "UnknownDocument", doc_id)
        return doc

    # --- project browsing ---------------------------------------------------

    @app.get("/projects")
    def list_projects():
        return [
            {
                "name": project.name,
                "labels": sorted(project.labels),
                "model_labels": sorted(project.model_labels),
                "n_docs": len(project.documents),
            }
        ]

    @app.get("/projects/{name}/docs")
    def list_docs(name: str):
        if name != project.name:
            raise _http_error(404, "UnknownProject", name)
        return [
            {"id": doc_id, "layers": project.layers_of(doc_id)}
            for doc_id in sorted(project.documents)
        ]

    @app.get("/docs/{doc_id}")
    def get_document(doc_id: str):
        doc = get_doc(doc_id)
        return {
            "id": doc.id,
            "text": doc.text,
            "tokens": [
                {"start": t.start, "end": t.end, "surface": t.surface}
                for t in doc.tokens
            ],
        }

    # --- annotation layers ----------------------------------------------------

    @app.get("/docs/{doc_id}/annotations/{layer}")
    def get_annotations(doc_id: str, layer: str):
        get_doc(doc_id)
        version, anns = store.get_layer(doc_id, layer)
        return {
            "doc": doc_id,
            "layer": layer,
            "version": version,
            "annotations": [ann_to_json(a) for a in anns],
        }

    @app.put("/docs/{doc_id}/annotations/{layer}")
    def put_annotations(doc_id: str, layer: str, body: LayerBody):
        doc = get_doc(doc_id)
        try:
            anns = [ann_from_json(a) for a in body.annotations]
        except (KeyError, ValueError, TypeError) as exc:
            raise _http_error(400, "MalformedAnnotation", str(exc))
        violations = validate_annotations(
            doc, layer, anns, project.known_labels()
        )
        if violations:
            raise _http_error(
                400,
                "ValidationFailed",
                f"{len(violations)} violation(s)",
                violations=[v.to_json() for v in violations],
            )
        anns = sorted(anns, key=lambda a: (a.start, a.end, a.label))
        try:
            new_version = store.put_layer(doc_id, layer, anns, body.version)
        except VersionConflict as exc:
            raise _http_error(
                409, "VersionConflict", str(exc), expected=exc.expected
            )
        store.flush()
        return {"doc": doc_id, "layer": layer, "version": new_version}

    # --- weak sources -----------------------------------------------------------

    @app.get("/sources")
    def list_sources():
        return [source_to_json(store.sources[sid]) for sid in sorted(store.sources)]

    @app.post("/sources", status_code=201)
    def create_source(body: SourceBody):
        try:
            source = source_from_json(body.model_dump())
        except PatternSyntax as exc:
            raise _http_error(400, "PatternSyntax", str(exc))
        except (KeyError, ValueError, TypeError) as exc:
            raise _http_error(400, "MalformedSource", str(exc))
        labels = {
            getattr(source.payload, "label", None),
            getattr(source.payload, "label_if_cue", None),
            getattr(source.payload, "label_otherwise", None),
        }
        unknown = {
            l for l in labels if l is not None and l not in project.known_labels()
        }
        if unknown:
            raise _http_error(400, "UnknownLabel", ", ".join(sorted(unknown)))
        try:
            store.add_source(source)
        except ValueError as exc:
            raise _http_error(400, "DuplicateSource", str(exc))
        return {"id": source.id}

    @app.delete("/sources/{source_id}")
    def delete_source(source_id: str):
        try:
            store.remove_source(source_id)
        except KeyError:
            raise _http_error(404, "UnknownSource", source_id)
        return {"id": source_id}

    def _apply_source_to_doc(source: WeakSource, doc_id: str) -> dict:
        doc = project.documents[doc_id]
        try:
            spans = apply_source(doc, source, project.known_labels())
        except (UnknownLabel, PatternSyntax) as exc:
            raise _http_error(400, type(exc).__name__, str(exc))
        with store.lock:
            version = store.write_layer(doc_id, source.id, spans)
            store.flush()
        return {
            "doc": doc_id,
            "layer": source.id,
            "version": version,
            "annotations": [ann_to_json(a) for a in spans],
        }

    def _apply_source_job(source: WeakSource):
        def run(cancel_event):
            done = 0
            for doc_id in sorted(project.documents):
                if cancel_event.is_set():
                    break
                _apply_source_to_doc(source, doc_id)
                done += 1
            return {"layer": source.id, "docs": done}

        return jobs.submit(f"apply:{source.id}", run).to_json()

    @app.post("/sources/{source_id}/apply")
    def apply_source_endpoint(source_id: str, doc: str = Query(default="all")):
        source = store.sources.get(source_id)
        if source is None:
            raise _http_error(404, "UnknownSource", source_id)
        if doc == "all":
            return _apply_source_job(source)
        get_doc(doc)
        return _apply_source_to_doc(source, doc)

    # --- dictionary --------------------------------------------------------------

    @app.post("/dictionary/build")
    def dictionary_build(body: DictBuildBody):
        doc_ids = sorted(project.documents) if body.docs is None else body.docs
        for doc_id in doc_ids:
            get_doc(doc_id)
        gold = {d: project.layer(d, GOLD_LAYER) for d in doc_ids}
        dictionary = build_dictionary(
            gold, doc_ids, case_sensitive=body.case_sensitive
        )
        source = WeakSource(body.id, "dictionary", dictionary, body.priority)
        try:
            store.add_source(source)
        except ValueError as exc:
            raise _http_error(400, "DuplicateSource", str(exc))
        return {"id": body.id, "entries": len(dictionary.entries)}

    @app.post("/dictionary/apply")
    def dictionary_apply(body: DictApplyBody):
        source = store.sources.get(body.id)
        if source is None or source.kind != "dictionary":
            raise _http_error(404, "UnknownSource", body.id)
        if body.doc == "all":
            return _apply_source_job(source)
        get_doc(body.doc)
        return _apply_source_to_doc(source, body.doc)

    # --- denoising ---------------------------------------------------------------

    @app.post("/denoise")
    def denoise(body: DenoiseBody):
        if not body.sources:
            raise _http_error(400, "NoSources", "at least one source id required")
        missing = [
            sid
            for sid in body.sources
            if sid not in store.sources
            and not any(
                (d, sid) in project.annotation_sets for d in project.documents
            )
        ]
        if missing:
            raise _http_error(404, "UnknownSource", ", ".join(missing))
        cfg = FitConfig(
            max_iters=body.max_iters,
            rel_tol=body.rel_tol,
            epsilon=body.epsilon,
            seed=body.seed,
        )

        def run(cancel_event):
            with store.lock:
                try:
                    result = denoise_corpus(project, body.sources, cfg)
                except (DegenerateLikelihood, NoSources, OverlapError) as exc:
                    raise WeaklabError(f"{type(exc).__name__}: {exc}") from exc
                for doc_id, spans in sorted(result.spans_by_doc.items()):
                    store.write_layer(doc_id, "denoised", spans)
                atomic_write_text(
                    os.path.join(store.root, "denoiser_params.json"),
                    params_to_json(result.params),
                )
                store.flush()
            return {
                "layer": "denoised",
                "docs": len(result.spans_by_doc),
                "iterations": len(result.trace),
                "log_likelihood": result.trace[-1],
            }

        return jobs.submit("denoise", run).to_json()

    # --- jobs ------------------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = jobs.get(job_id)
        if job is None:
            raise _http_error(404, "UnknownJob", job_id)
        return job.to_json()

    @app.delete("/jobs/{job_id}")
    def job_cancel(job_id: str):
        job = jobs.cancel(job_id)
        if job is None:
            raise _http_error(404, "UnknownJob", job_id)
        return job.to_json()

    # --- evaluation ----------------------------------------------------------------

    @app.post("/evaluate")
    def evaluate(body: EvaluateBody):
        try:
            return layer_metrics(project, body.pred, body.gold, body.mode)
        except (ValueError, OverlapError) as exc:
            raise _http_error(400, type(exc).__name__, str(exc))

    @app.get("/validate")
    def validate_project():
        violations = validate(project)
        return {
            "valid": not violations,
            "violations": [v.to_json() for v in violations],
        }

    # --- model-server bridge ----------------------------------------------------------

    @app.post("/model/{name}/predict")
    def model_predict(name: str, body: PredictBody):
        if body.url is not None:
            cfg = ModelServerConfig(name, body.url, timeout=body.timeout)
        elif name in models:
            cfg = models[name]
        else:
            raise _http_error(404, "UnknownModelServer", name)
        doc_ids = sorted(project.documents) if body.docs is None else body.docs
        for doc_id in doc_ids:
            get_doc(doc_id)
        layers = body.layers if body.layers is not None else sorted(store.sources)

        # Snapshot under the lock, perform remote I/O without it.
        with store.lock:
            request_docs = list(doc_ids)
        try:
            per_doc, labels_seen = bridge_predict(cfg, project, request_docs, layers)
        except BridgeError as exc:
            raise _http_error(
                502,
                type(exc).__name__,
                str(exc),
                **({"path": exc.path} if hasattr(exc, "path") else {}),
            )
        layer = f"model:{name}"
        with store.lock:
            store.add_model_labels(labels_seen - project.known_labels())
            versions = {}
            for doc_id in request_docs:
                versions[doc_id] = store.write_layer(
                    doc_id, layer, per_doc.get(doc_id, [])
                )
            store.flush()
        return {
            "layer": layer,
            "docs": {d: len(per_doc.get(d, [])) for d in request_docs},
            "versions": versions,
        }

    # --- export --------------------------------------------------------------------

    @app.get("/export")
    def export_zip():
        buffer = io.BytesIO()
        with store.lock:
            with zipfile.ZipFile(buffer, "w", zipfile.ZIP_DEFLATED) as zf:

                def add(name: str, text: str):
                    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
                    zf.writestr(info, text)

                for doc_id in sorted(project.documents):
                    add(f"{doc_id}.txt", project.documents[doc_id].text)
                for (doc_id, layer), anns in sorted(project.annotation_sets.items()):
                    name = (
                        f"{doc_id}.ann"
                        if layer == GOLD_LAYER
                        else f"layers/{layer}/{doc_id}.ann"
                    )
                    add(name, serialize_ann(anns))
        return Response(
            content=buffer.getvalue(),
            media_type="application/zip",
            headers={
                "Content-Disposition": f'attachment; filename="{project.name}.zip"'
            },
        )

    if frontend_dir and os.path.isdir(frontend_dir):
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
