"""Batch front door: import, validate, apply sources, denoise, run the
experiments, evaluate, generate synthetic corpora, and serve HTTP.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 remote or
model-server failure. Errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import corpus as corpus_mod
from .corpus import (
    GOLD_LAYER,
    atomic_write_text,
    layer_path,
    load_project,
    save_project,
    serialize_ann,
    validate,
)
from .denoiser import FitConfig, denoise_corpus, params_to_json
from .errors import BridgeError, NoSources, UnknownSource, WeaklabError
from .evaluation import (
    DictSynthSpec,
    ExperimentConfig,
    SynthSource,
    SynthSpec,
    denoise_report_csv,
    denoising_experiment,
    dict_curve_csv,
    dictionary_experiment,
    layer_metrics,
    synth_corpus,
    synth_dictionary_corpus,
)
from .sources import apply_source, load_sources

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_REMOTE = 3


class UsageFailure(WeaklabError):
    pass


def _emit(data, out: str | None = None, csv_text: str | None = None) -> None:
    if out:
        atomic_write_text(out, csv_text if csv_text is not None else _json(data))
    sys.stdout.write(_json(data))


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _error(exc: BaseException) -> None:
    sys.stderr.write(
        json.dumps(
            {"error": type(exc).__name__, "message": str(exc)}, sort_keys=True
        )
        + "\n"
    )


def _parse_ratios(text: str) -> list[float]:
    """Either a comma list ("0.1,0.5") or a start:stop:step sweep."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageFailure(f"bad ratio range {text!r}, want start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise UsageFailure("ratio step must be positive")
        ratios = []
        k = 0
        while True:
            value = round(start + k * step, 10)
            if value > stop + 1e-9:
                break
            ratios.append(value)
            k += 1
        return ratios
    return [float(p) for p in text.split(",") if p]


def _load(root: str):
    if not os.path.isdir(root):
        raise UsageFailure(f"project root {root!r} is not a directory")
    return load_project(root)


def _sources_for(root: str):
    path = os.path.join(root, "sources.json")
    return load_sources(path) if os.path.isfile(path) else {}


# --- subcommands ------------------------------------------------------------


def cmd_import(args) -> int:
    project = load_project(args.dir, byte_offsets=args.byte_offsets)
    save_project(project, args.root)
    skipped = 0
    for entry in sorted(os.listdir(args.dir)):
        if entry.endswith(".ann"):
            doc_id = entry[: -len(".ann")]
            doc = project.documents.get(doc_id)
            if doc is None:
                continue
            with open(os.path.join(args.dir, entry), encoding="utf-8") as handle:
                text = handle.read()
            if args.byte_offsets:
                text = corpus_mod.reinterpret_offsets_as_bytes(text, doc)
            _, n = corpus_mod.parse_ann_counted(text, doc)
            skipped += n
    _emit(
        {
            "imported": args.root,
            "docs": len(project.documents),
            "annotations": sum(
                len(v) for v in project.annotation_sets.values()
            ),
            "labels": sorted(project.labels),
            "skipped_lines": skipped,
        }
    )
    return EXIT_OK


def cmd_validate(args) -> int:
    project = _load(args.root)
    violations = validate(project)
    _emit(
        {
            "valid": not violations,
            "violations": [v.to_json() for v in violations],
        }
    )
    return EXIT_OK if not violations else EXIT_VALIDATION


def cmd_apply(args) -> int:
    project = _load(args.root)
    sources = _sources_for(args.root)
    if args.source not in sources:
        raise UnknownSource(args.source)
    source = sources[args.source]
    if args.doc is not None and args.doc not in project.documents:
        raise UsageFailure(f"unknown document {args.doc!r}")
    doc_ids = [args.doc] if args.doc else sorted(project.documents)
    counts = {}
    for doc_id in doc_ids:
        spans = apply_source(
            project.documents[doc_id], source, project.known_labels()
        )
        atomic_write_text(
            layer_path(args.root, doc_id, source.id), serialize_ann(spans)
        )
        counts[doc_id] = len(spans)
    _emit({"source": source.id, "spans": counts})
    return EXIT_OK


def cmd_denoise(args) -> int:
    project = _load(args.root)
    source_ids = [s for s in args.sources.split(",") if s]
    if not source_ids:
        raise NoSources("denoise needs --sources a,b,c")
    for sid in source_ids:
        if not any((d, sid) in project.annotation_sets for d in project.documents):
            raise UnknownSource(f"no layer {sid!r} found; apply the source first")
    cfg = FitConfig(
        max_iters=args.iters, rel_tol=args.tol, epsilon=args.epsilon, seed=args.seed
    )
    result = denoise_corpus(project, source_ids, cfg)
    for doc_id, spans in sorted(result.spans_by_doc.items()):
        atomic_write_text(
            layer_path(args.root, doc_id, "denoised"), serialize_ann(spans)
        )
    atomic_write_text(
        os.path.join(args.root, "denoiser_params.json"),
        params_to_json(result.params),
    )
    summary = {
        "layer": "denoised",
        "docs": len(result.spans_by_doc),
        "iterations": len(result.trace),
        "log_likelihood": result.trace[-1],
    }
    if args.report:
        report = denoising_experiment(project, source_ids, cfg)
        atomic_write_text(args.report, denoise_report_csv(report))
        summary["report"] = args.report
        summary["recall_before"] = report["recall_before"]
        summary["recall_after"] = report["recall_after"]
    _emit(summary)
    return EXIT_OK


def cmd_dict_exp(args) -> int:
    project = _load(args.root)
    cfg = ExperimentConfig(
        ratios=_parse_ratios(args.ratios),
        trials_per_ratio=args.trials,
        seed=args.seed,
    )
    points = dictionary_experiment(project, cfg)
    csv_text = dict_curve_csv(points)
    data = {
        "ratios": [p.ratio for p in points],
        "mean_recall_unannotated": [p.mean_recall_unannotated for p in points],
        "mean_recall_all": [p.mean_recall_all for p in points],
        "mean_recall_annotated": [p.mean_recall_annotated for p in points],
        "trials_per_ratio": cfg.trials_per_ratio,
        "seed": cfg.seed,
    }
    _emit(data, args.out, csv_text)
    return EXIT_OK


def cmd_eval(args) -> int:
    project = _load(args.root)
    known_layers = {l for (_, l) in project.annotation_sets}
    for layer in (args.pred, args.gold):
        if layer not in known_layers:
            raise UsageFailure(f"layer {layer!r} has no annotations")
    metrics = layer_metrics(project, args.pred, args.gold, args.mode)
    if args.out:
        lines = ["layer,precision,recall,f1"]
        for scope in ("macro", "micro"):
            m = metrics[scope]
            lines.append(
                f"{args.pred}[{scope}],{m['precision']:.6f},{m['recall']:.6f},"
                f"{m['f1']:.6f}"
            )
        _emit(metrics, args.out, "\n".join(lines) + "\n")
    else:
        _emit(metrics)
    return EXIT_OK


def cmd_synth(args) -> int:
    with open(args.spec, encoding="utf-8") as handle:
        raw = json.load(handle)
    kind = raw.pop("kind", "denoising")
    if args.seed is not None:
        raw["seed"] = args.seed
    if kind == "denoising":
        raw["sources"] = [SynthSource(**s) for s in raw.get("sources", [])]
        spec = SynthSpec(**raw)
        corpus = synth_corpus(spec)
        project = corpus.project
    elif kind == "dictionary":
        spec = DictSynthSpec(**raw)
        project = synth_dictionary_corpus(spec)
    else:
        raise UsageFailure(f"unknown synth kind {kind!r}")
    save_project(project, args.root)
    _emit(
        {
            "root": args.root,
            "kind": kind,
            "docs": len(project.documents),
            "labels": sorted(project.labels),
            "layers": project.layer_names(),
        }
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import ProjectStore, create_app

    store = ProjectStore(args.root)
    frontend = args.frontend
    if frontend is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        frontend = candidate if os.path.isdir(candidate) else None
    app = create_app(store, frontend_dir=frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weaklab",
        description="Weak labeling, HMM denoising, and annotation serving.",
    )
    parser.add_argument(
        "--root", default=".", help="project directory (default: cwd)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", help="import a Brat directory into --root")
    p.add_argument("dir")
    p.add_argument(
        "--byte-offsets",
        action="store_true",
        help="reinterpret .ann offsets as UTF-8 byte positions",
    )
    p.set_defaults(fn=cmd_import)

    p = sub.add_parser("validate", help="check every layer against the data model")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("apply", help="apply a registered weak source")
    p.add_argument("--source", required=True)
    p.add_argument("--doc")
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("denoise", help="EM-fit the HMM and write the denoised layer")
    p.add_argument("--sources", required=True, help="comma-separated source ids")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write denoise_report.csv comparing layers")
    p.set_defaults(fn=cmd_denoise)

    p = sub.add_parser("dict-exp", help="dictionary projection experiment")
    p.add_argument(
        "--ratios", default="0.05:0.95:0.05", help="start:stop:step or comma list"
    )
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write dict_curve.csv here")
    p.set_defaults(fn=cmd_dict_exp)

    p = sub.add_parser("eval", help="score one layer against another")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", default=GOLD_LAYER)
    p.add_argument("--mode", choices=["exact", "token"], default="exact")
    p.add_argument("--out", help="write a CSV report here")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic project into --root")
    p.add_argument("--spec", required=True, help="JSON generator spec")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP annotation service")
    p.add_argument("--port", type=int, default=8760)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--frontend", help="directory with the built web UI")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (UsageFailure, UnknownSource) as exc:
        _error(exc)
        return EXIT_USAGE
    except BridgeError as exc:
        _error(exc)
        return EXIT_REMOTE
    except WeaklabError as exc:
        _error(exc)
        return EXIT_VALIDATION
    except (FileNotFoundError, json.JSONDecodeError, KeyError, TypeError) as exc:
        _error(exc)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
