"""Data model and Brat-standoff I/O for annotation projects.

A project is a set of immutable documents plus named annotation layers
(gold, manual, one per weak source, denoised, model outputs). Annotations
are labeled character intervals; offsets always count Unicode code points,
never bytes, so .ann files stay portable across implementations.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
from dataclasses import dataclass, field

from .errors import (
    DuplicateId,
    EmptyCoverage,
    MalformedLine,
    OffsetOutOfBounds,
    SurfaceMismatch,
)

GOLD_LAYER = "gold"
MANUAL_LAYER = "manual"
DENOISED_LAYER = "denoised"

PROV_MANUAL = "manual"
PROV_DENOISER = "denoiser"


def source_provenance(source_id: str) -> str:
    return f"source:{source_id}"


def model_provenance(server_name: str) -> str:
    return f"model:{server_name}"


def model_layer(server_name: str) -> str:
    return f"model:{server_name}"


@dataclass(frozen=True)
class Token:
    start: int
    end: int
    surface: str


@dataclass(frozen=True)
class SpanAnnotation:
    """A labeled character interval, `surface == text[start:end]`."""

    id: str
    label: str
    start: int
    end: int
    surface: str
    provenance: str = PROV_MANUAL


def ann_to_json(ann: SpanAnnotation) -> dict:
    return {
        "id": ann.id,
        "label": ann.label,
        "start": ann.start,
        "end": ann.end,
        "surface": ann.surface,
        "provenance": ann.provenance,
    }


def ann_from_json(data: dict) -> SpanAnnotation:
    return SpanAnnotation(
        id=str(data.get("id", "")),
        label=str(data["label"]),
        start=int(data["start"]),
        end=int(data["end"]),
        surface=str(data["surface"]),
        provenance=str(data.get("provenance", PROV_MANUAL)),
    )


class Document:
    """A named immutable text with a lazily tokenized view."""

    __slots__ = ("id", "text", "_tokens")

    def __init__(self, doc_id: str, text: str):
        if not doc_id:
            raise ValueError("document id must be non-empty")
        self.id = doc_id
        self.text = text
        self._tokens = None

    @property
    def tokens(self) -> list[Token]:
        if self._tokens is None:
            self._tokens = tokenize(self.text)
        return self._tokens

    def __repr__(self):
        return f"Document({self.id!r}, {len(self.text)} chars)"


@dataclass
class Project:
    name: str
    labels: set[str] = field(default_factory=set)
    # Labels admitted from external model servers rather than the project
    # definition; kept separate so the UI can flag them.
    model_labels: set[str] = field(default_factory=set)
    documents: dict[str, Document] = field(default_factory=dict)
    annotation_sets: dict[tuple[str, str], list[SpanAnnotation]] = field(
        default_factory=dict
    )

    def known_labels(self) -> set[str]:
        return self.labels | self.model_labels

    def layer(self, doc_id: str, layer: str) -> list[SpanAnnotation]:
        return self.annotation_sets.get((doc_id, layer), [])

    def set_layer(self, doc_id: str, layer: str, anns: list[SpanAnnotation]) -> None:
        self.annotation_sets[(doc_id, layer)] = list(anns)

    def layers_of(self, doc_id: str) -> list[str]:
        return sorted(l for (d, l) in self.annotation_sets if d == doc_id)

    def layer_names(self) -> list[str]:
        return sorted({l for (_, l) in self.annotation_sets})


def tokenize(text: str) -> list[Token]:
    """Deterministic split: maximal alphanumeric runs are one token, every
    other non-whitespace character is its own token."""
    tokens = []
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        j = i + 1
        if ch.isalnum():
            while j < n and text[j].isalnum():
                j += 1
        tokens.append(Token(i, j, text[i:j]))
        i = j
    return tokens


_TEXTBOUND_ID = re.compile(r"T[1-9][0-9]*")


def parse_ann_counted(
    ann_text: str, doc: Document
) -> tuple[list[SpanAnnotation], int]:
    """Parse Brat text-bound (`T`) lines; return (annotations, skipped).

    Non-`T` standoff lines (relations, events, attributes, comments, ...)
    are skipped and counted, not errors. The result is sorted by
    (start, end); input line order breaks ties.
    """
    anns: list[SpanAnnotation] = []
    seen_ids: set[str] = set()
    skipped = 0
    for lineno, line in enumerate(ann_text.splitlines(), start=1):
        if not line.strip():
            continue
        if not line.startswith("T"):
            skipped += 1
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedLine(
                f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}"
            )
        ann_id, middle, surface = parts
        if not _TEXTBOUND_ID.fullmatch(ann_id):
            raise MalformedLine(f"line {lineno}: bad text-bound id {ann_id!r}")
        fields = middle.split(" ")
        if len(fields) != 3:
            raise MalformedLine(
                f"line {lineno}: expected 'label start end', got {middle!r}"
            )
        label, start_s, end_s = fields
        try:
            start, end = int(start_s), int(end_s)
        except ValueError:
            raise MalformedLine(f"line {lineno}: non-integer offsets in {middle!r}")
        if not (0 <= start < end <= len(doc.text)):
            raise OffsetOutOfBounds(
                f"line {lineno}: span {start}..{end} out of bounds for "
                f"document {doc.id!r} of length {len(doc.text)}"
            )
        if doc.text[start:end] != surface:
            raise SurfaceMismatch(
                f"line {lineno}: surface {surface!r} != text slice "
                f"{doc.text[start:end]!r}"
            )
        if ann_id in seen_ids:
            raise DuplicateId(f"line {lineno}: duplicate id {ann_id}")
        seen_ids.add(ann_id)
        anns.append(SpanAnnotation(ann_id, label, start, end, surface, PROV_MANUAL))
    anns.sort(key=lambda a: (a.start, a.end))
    return anns, skipped


def parse_ann(ann_text: str, doc: Document) -> list[SpanAnnotation]:
    return parse_ann_counted(ann_text, doc)[0]


def serialize_ann(anns: list[SpanAnnotation]) -> str:
    """Render annotations as Brat text-bound lines, sorted by (start, end).

    Existing ids are preserved when they are well-formed and unique;
    otherwise ids are renumbered T1..Tk in output order.
    """
    ordered = sorted(anns, key=lambda a: (a.start, a.end))
    ids = [a.id for a in ordered]
    keep_ids = len(ids) == len(set(ids)) and all(
        _TEXTBOUND_ID.fullmatch(i or "") for i in ids
    )
    lines = []
    for k, ann in enumerate(ordered, start=1):
        ann_id = ann.id if keep_ids else f"T{k}"
        lines.append(f"{ann_id}\t{ann.label} {ann.start} {ann.end}\t{ann.surface}\n")
    return "".join(lines)


def align_span(
    span: SpanAnnotation, tokens: list[Token]
) -> tuple[int, int, bool]:
    """Map a character span to the minimal covering token range [i, j).

    A span whose boundary cuts through a token expands to the whole token
    and the returned flag is True.
    """
    first = last = -1
    for idx, tok in enumerate(tokens):
        if tok.end <= span.start:
            continue
        if tok.start >= span.end:
            break
        if first < 0:
            first = idx
        last = idx
    if first < 0:
        raise EmptyCoverage(
            f"span {span.start}..{span.end} covers no token (whitespace only)"
        )
    adjusted = tokens[first].start < span.start or tokens[last].end > span.end
    return first, last + 1, adjusted


@dataclass(frozen=True)
class Violation:
    doc_id: str
    ann_id: str
    layer: str
    reason: str
    detail: str

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "ann_id": self.ann_id,
            "layer": self.layer,
            "reason": self.reason,
            "detail": self.detail,
        }


def validate_annotations(
    doc: Document,
    layer: str,
    anns: list[SpanAnnotation],
    known_labels: set[str],
) -> list[Violation]:
    violations = []
    seen_ids: set[str] = set()
    for ann in anns:
        if not (0 <= ann.start < ann.end <= len(doc.text)):
            violations.append(
                Violation(
                    doc.id,
                    ann.id,
                    layer,
                    "OffsetOutOfBounds",
                    f"{ann.start}..{ann.end} outside 0..{len(doc.text)}",
                )
            )
            continue
        if doc.text[ann.start : ann.end] != ann.surface:
            violations.append(
                Violation(
                    doc.id,
                    ann.id,
                    layer,
                    "SurfaceMismatch",
                    f"surface {ann.surface!r} != slice "
                    f"{doc.text[ann.start:ann.end]!r}",
                )
            )
        if ann.label not in known_labels:
            violations.append(
                Violation(doc.id, ann.id, layer, "UnknownLabel", ann.label)
            )
        if ann.id in seen_ids:
            violations.append(
                Violation(doc.id, ann.id, layer, "DuplicateId", ann.id)
            )
        seen_ids.add(ann.id)
    return violations


def validate(project: Project) -> list[Violation]:
    """Collect every invariant violation; an empty list means the project
    is safe for all downstream operations."""
    violations: list[Violation] = []
    known = project.known_labels()
    for (doc_id, layer), anns in sorted(project.annotation_sets.items()):
        doc = project.documents.get(doc_id)
        if doc is None:
            violations.append(
                Violation(doc_id, "", layer, "UnknownDocument", doc_id)
            )
            continue
        violations.extend(validate_annotations(doc, layer, anns, known))
    return violations


# --- project directory layout -------------------------------------------
#
# project/<name>.txt           raw UTF-8 document text
# project/<name>.ann           gold layer
# project/layers/<layer>/<name>.ann
# project/labels.json          {"labels": [...], "model_labels": [...]}
# project/sources.json         handled by weaklab.sources


def atomic_write_text(path: str, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never observe
    a partially written file."""
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def byte_to_char_offsets(text: str) -> dict[int, int]:
    """Map UTF-8 byte positions to code-point positions (boundaries only)."""
    mapping = {}
    pos = 0
    for i, ch in enumerate(text):
        mapping[pos] = i
        pos += len(ch.encode("utf-8"))
    mapping[pos] = len(text)
    return mapping


def reinterpret_offsets_as_bytes(ann_text: str, doc: Document) -> str:
    """Rewrite .ann offsets from UTF-8 byte positions to code points.

    Used on import when a corpus was produced by a byte-offset tool; lines
    whose offsets do not land on byte boundaries raise OffsetOutOfBounds.
    """
    mapping = byte_to_char_offsets(doc.text)
    out_lines = []
    for lineno, line in enumerate(ann_text.splitlines(), start=1):
        if not line.startswith("T") or line.count("\t") < 2:
            out_lines.append(line)
            continue
        ann_id, middle, surface = line.split("\t", 2)
        fields = middle.split(" ")
        if len(fields) != 3:
            out_lines.append(line)
            continue
        label, start_s, end_s = fields
        try:
            bstart, bend = int(start_s), int(end_s)
        except ValueError:
            out_lines.append(line)
            continue
        if bstart not in mapping or bend not in mapping:
            raise OffsetOutOfBounds(
                f"line {lineno}: byte offsets {bstart}..{bend} do not fall on "
                "UTF-8 character boundaries"
            )
        out_lines.append(
            f"{ann_id}\t{label} {mapping[bstart]} {mapping[bend]}\t{surface}"
        )
    return "".join(l + "\n" for l in out_lines)


def _doc_names(root: str) -> list[str]:
    names = []
    for entry in sorted(os.listdir(root)):
        if entry.endswith(".txt") and os.path.isfile(os.path.join(root, entry)):
            names.append(entry[: -len(".txt")])
    return names


def layer_path(root: str, doc_id: str, layer: str) -> str:
    if layer == GOLD_LAYER:
        return os.path.join(root, f"{doc_id}.ann")
    return os.path.join(root, "layers", layer, f"{doc_id}.ann")


def load_project(
    root: str, name: str | None = None, byte_offsets: bool = False
) -> Project:
    """Read a project directory into memory.

    Missing labels.json infers the label set from every annotation found,
    which makes plain Brat directories importable without change.
    """
    if not os.path.isdir(root):
        raise FileNotFoundError(f"project root {root!r} is not a directory")
    project = Project(name=name or os.path.basename(os.path.abspath(root)))

    labels_file = os.path.join(root, "labels.json")
    explicit_labels = False
    if os.path.isfile(labels_file):
        with open(labels_file, encoding="utf-8") as handle:
            data = json.load(handle)
        project.labels = set(data.get("labels", []))
        project.model_labels = set(data.get("model_labels", []))
        explicit_labels = True

    def read_layer(doc: Document, layer: str, path: str) -> None:
        with open(path, encoding="utf-8") as handle:
            ann_text = handle.read()
        if byte_offsets:
            ann_text = reinterpret_offsets_as_bytes(ann_text, doc)
        anns, _ = parse_ann_counted(ann_text, doc)
        project.set_layer(doc.id, layer, anns)
        if not explicit_labels:
            project.labels.update(a.label for a in anns)

    for doc_name in _doc_names(root):
        with open(os.path.join(root, f"{doc_name}.txt"), encoding="utf-8") as handle:
            doc = Document(doc_name, handle.read())
        project.documents[doc_name] = doc
        gold = os.path.join(root, f"{doc_name}.ann")
        if os.path.isfile(gold):
            read_layer(doc, GOLD_LAYER, gold)

    layers_dir = os.path.join(root, "layers")
    if os.path.isdir(layers_dir):
        for layer in sorted(os.listdir(layers_dir)):
            layer_dir = os.path.join(layers_dir, layer)
            if not os.path.isdir(layer_dir):
                continue
            for entry in sorted(os.listdir(layer_dir)):
                if not entry.endswith(".ann"):
                    continue
                doc_id = entry[: -len(".ann")]
                doc = project.documents.get(doc_id)
                if doc is None:
                    continue
                read_layer(doc, layer, os.path.join(layer_dir, entry))
    return project


def save_project(project: Project, root: str) -> None:
    """Write the full directory layout (texts, all layers, labels.json)."""
    os.makedirs(root, exist_ok=True)
    for doc_id, doc in sorted(project.documents.items()):
        atomic_write_text(os.path.join(root, f"{doc_id}.txt"), doc.text)
    for (doc_id, layer), anns in sorted(project.annotation_sets.items()):
        atomic_write_text(layer_path(root, doc_id, layer), serialize_ann(anns))
    atomic_write_text(
        os.path.join(root, "labels.json"),
        json.dumps(
            {
                "labels": sorted(project.labels),
                "model_labels": sorted(project.model_labels),
            },
            indent=2,
        )
        + "\n",
    )
