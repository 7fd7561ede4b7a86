"""Weak labeling sources: text match, regex match, declarative rules, and
dictionaries harvested from annotated documents.

Every source turns a document into a list of non-overlapping spans carrying
`source:<id>` provenance. Sources never claim "outside": a position where a
source does not fire is an abstention, handled downstream by the vote grid.
"""

from __future__ import annotations

import json
import re as stdlib_re
from collections import Counter
from dataclasses import dataclass, field

import regex

from .corpus import Document, SpanAnnotation, source_provenance
from .errors import PatternSyntax, UnknownLabel, UnknownSource

KIND_TEXT = "text_match"
KIND_REGEX = "regex_match"
KIND_RULE = "rule"
KIND_DICTIONARY = "dictionary"

ABSTAIN = None  # Rule.label_otherwise value meaning "emit nothing"


@dataclass(frozen=True)
class TextMatch:
    query: str
    label: str
    case_sensitive: bool = True


@dataclass(frozen=True)
class RegexMatch:
    pattern: str
    label: str


@dataclass(frozen=True)
class Rule:
    """Single-token trigger with a cue window deciding between two labels.

    If any token within `window` tokens of the trigger (either side) is a
    positive cue and none is a negative cue, the trigger token gets
    `label_if_cue`, otherwise `label_otherwise` (None = abstain). Cue sets
    hold lowercase surfaces.
    """

    trigger: str
    window: int
    positive_cues: frozenset
    negative_cues: frozenset
    label_if_cue: str
    label_otherwise: str | None = None
    trigger_is_regex: bool = False
    case_sensitive: bool = False

    def __post_init__(self):
        if not self.trigger:
            raise ValueError("rule trigger must be non-empty")
        if self.window < 0:
            raise ValueError("rule window must be >= 0")
        if self.label_if_cue == self.label_otherwise:
            raise ValueError("rule outcomes must differ")


@dataclass
class Dictionary:
    """surface -> (label, support) with a single matching case policy."""

    entries: dict[str, tuple[str, int]] = field(default_factory=dict)
    case_sensitive: bool = True


@dataclass(frozen=True)
class WeakSource:
    id: str
    kind: str
    payload: object
    priority: int = 0


# --- regex subset ---------------------------------------------------------
#
# Supported: literals, character classes, ".", quantifiers * + ? {m,n},
# alternation, plain/non-capturing grouping, anchors. Backreferences,
# lookaround, conditionals and inline extensions are rejected so that
# leftmost-longest semantics stay well-defined.

_CLASS_OK_ESCAPES = set("dDsSwW\\^]$.|?*+()[{}-abfnrtv0 /'\"`~!@#%&=:;<>,_")


def check_pattern(pattern: str) -> None:
    """Reject patterns outside the supported subset with PatternSyntax."""
    i, n = 0, len(pattern)
    in_class = False
    while i < n:
        ch = pattern[i]
        if ch == "\\":
            if i + 1 >= n:
                raise PatternSyntax("dangling backslash")
            nxt = pattern[i + 1]
            if not in_class and nxt.isdigit() and nxt != "0":
                raise PatternSyntax("backreferences are not supported")
            if not in_class and nxt == "g":
                raise PatternSyntax("named backreferences are not supported")
            i += 2
            continue
        if in_class:
            if ch == "]":
                in_class = False
            i += 1
            continue
        if ch == "[":
            in_class = True
            i += 1
            if i < n and pattern[i] == "^":
                i += 1
            if i < n and pattern[i] == "]":
                i += 1
            continue
        if ch == "(" and pattern[i + 1 : i + 2] == "?":
            if pattern[i + 2 : i + 3] == ":":
                i += 3
                continue
            raise PatternSyntax(
                "only plain and non-capturing groups are supported "
                "(no lookaround, conditionals or inline flags)"
            )
        i += 1
    if in_class:
        raise PatternSyntax("unterminated character class")
    try:
        regex.compile(pattern, regex.POSIX)
    except regex.error as exc:
        raise PatternSyntax(str(exc))


def _compile_posix(pattern: str, flags: int = 0):
    check_pattern(pattern)
    return regex.compile(pattern, regex.POSIX | flags)


# --- source application ---------------------------------------------------


def _check_label(label: str, labels) -> None:
    if labels is not None and label not in labels:
        raise UnknownLabel(label)


def _span(doc: Document, k: int, label: str, start: int, end: int, source_id: str):
    return SpanAnnotation(
        f"T{k}", label, start, end, doc.text[start:end], source_provenance(source_id)
    )


def apply_text_match(
    doc: Document,
    query: str,
    label: str,
    case_sensitive: bool = True,
    labels=None,
    source_id: str = "adhoc",
) -> list[SpanAnnotation]:
    """All non-overlapping occurrences of `query`, scanned left to right;
    after a match at [s, e) scanning resumes at e."""
    if not query:
        raise ValueError("query must be non-empty")
    _check_label(label, labels)
    flags = 0 if case_sensitive else stdlib_re.IGNORECASE
    spans = []
    for m in stdlib_re.finditer(stdlib_re.escape(query), doc.text, flags):
        spans.append(_span(doc, len(spans) + 1, label, m.start(), m.end(), source_id))
    return spans


def apply_regex(
    doc: Document,
    pattern: str,
    label: str,
    labels=None,
    source_id: str = "adhoc",
) -> list[SpanAnnotation]:
    """Leftmost-longest non-overlapping matches of `pattern`.

    Empty matches are skipped: a span needs at least one character.
    """
    rx = _compile_posix(pattern)
    _check_label(label, labels)
    spans = []
    for m in rx.finditer(doc.text):
        if m.start() == m.end():
            continue
        spans.append(_span(doc, len(spans) + 1, label, m.start(), m.end(), source_id))
    return spans


def apply_rule(
    doc: Document,
    rule: Rule,
    labels=None,
    source_id: str = "adhoc",
) -> list[SpanAnnotation]:
    """Apply a trigger+cue-window rule; spans cover the trigger token."""
    _check_label(rule.label_if_cue, labels)
    if rule.label_otherwise is not None:
        _check_label(rule.label_otherwise, labels)
    tokens = doc.tokens
    lowered = [t.surface.lower() for t in tokens]

    if rule.trigger_is_regex:
        flags = 0 if rule.case_sensitive else regex.IGNORECASE
        rx = _compile_posix(rule.trigger, flags)

        def hits(idx):
            return rx.fullmatch(tokens[idx].surface) is not None

    elif rule.case_sensitive:

        def hits(idx):
            return tokens[idx].surface == rule.trigger

    else:
        trigger = rule.trigger.lower()

        def hits(idx):
            return lowered[idx] == trigger

    spans = []
    for idx, tok in enumerate(tokens):
        if not hits(idx):
            continue
        lo = max(0, idx - rule.window)
        hi = min(len(tokens), idx + rule.window + 1)
        context = lowered[lo:idx] + lowered[idx + 1 : hi]
        cued = any(c in rule.positive_cues for c in context) and not any(
            c in rule.negative_cues for c in context
        )
        outcome = rule.label_if_cue if cued else rule.label_otherwise
        if outcome is None:
            continue
        spans.append(_span(doc, len(spans) + 1, outcome, tok.start, tok.end, source_id))
    return spans


def build_dictionary(
    gold: dict[str, list[SpanAnnotation]],
    docs,
    policy: str = "most_frequent",
    case_sensitive: bool = True,
) -> Dictionary:
    """Harvest (surface, label) pairs from the gold layer of `docs`.

    A surface seen with several labels keeps the most frequent one, ties
    going to the lexicographically smaller label; support records how often
    the kept pair occurred.
    """
    if policy != "most_frequent":
        raise ValueError(f"unknown conflict policy {policy!r}")
    missing = [d for d in docs if d not in gold]
    if missing:
        raise KeyError(f"docs without gold annotations: {missing}")
    counts: Counter = Counter()
    for doc_id in docs:
        for ann in gold[doc_id]:
            surface = ann.surface if case_sensitive else ann.surface.lower()
            counts[(surface, ann.label)] += 1
    by_surface: dict[str, list[tuple[int, str]]] = {}
    for (surface, label), c in counts.items():
        by_surface.setdefault(surface, []).append((c, label))
    entries = {}
    for surface, options in by_surface.items():
        options.sort(key=lambda pair: (-pair[0], pair[1]))
        support, label = options[0]
        entries[surface] = (label, support)
    return Dictionary(entries, case_sensitive)


def _token_boundaries(doc: Document) -> tuple[set, set]:
    starts = {t.start for t in doc.tokens}
    ends = {t.end for t in doc.tokens}
    return starts, ends


def dictionary_candidates(
    doc: Document, dictionary: Dictionary
) -> list[tuple[int, int, str, int, str]]:
    """Token-aligned occurrences of every entry: (start, end, label,
    support, surface) tuples, unresolved."""
    starts, ends = _token_boundaries(doc)
    flags = 0 if dictionary.case_sensitive else stdlib_re.IGNORECASE
    candidates = []
    for surface, (label, support) in dictionary.entries.items():
        if not surface:
            continue
        for m in stdlib_re.finditer(stdlib_re.escape(surface), doc.text, flags):
            if m.start() in starts and m.end() in ends:
                candidates.append((m.start(), m.end(), label, support, surface))
    return candidates


def select_dictionary_matches(
    candidates: list[tuple[int, int, str, int, str]]
) -> list[tuple[int, int, str]]:
    """Greedy overlap resolution: longer surfaces first, then higher
    support, then smaller start offset."""
    order = sorted(candidates, key=lambda c: (-(c[1] - c[0]), -c[3], c[0], c[2]))
    kept: list[tuple[int, int, str]] = []
    for start, end, label, _, _ in order:
        if all(end <= s or start >= e for s, e, _ in kept):
            kept.append((start, end, label))
    kept.sort()
    return kept


def apply_dictionary(
    doc: Document,
    dictionary: Dictionary,
    source_id: str = "adhoc",
) -> list[SpanAnnotation]:
    """Project dictionary entries onto a document.

    Matches must be token-aligned (both boundaries on token boundaries), so
    an entry never fires inside a larger token.
    """
    matches = select_dictionary_matches(dictionary_candidates(doc, dictionary))
    return [
        _span(doc, k, label, start, end, source_id)
        for k, (start, end, label) in enumerate(matches, start=1)
    ]


def resolve_overlaps(candidates) -> list[SpanAnnotation]:
    """Pick a non-overlapping subset of (SpanAnnotation, priority) pairs.

    Greedy in (priority desc, length desc, start asc, label asc) order; the
    key is total so the result does not depend on input order. A rejected
    candidate always overlaps some kept span (the selection is maximal).
    """
    order = sorted(
        candidates,
        key=lambda c: (
            -c[1],
            -(c[0].end - c[0].start),
            c[0].start,
            c[0].label,
            c[0].end,
            c[0].id,
            c[0].provenance,
        ),
    )
    kept: list[SpanAnnotation] = []
    for ann, _ in order:
        if all(ann.end <= k.start or ann.start >= k.end for k in kept):
            kept.append(ann)
    kept.sort(key=lambda a: (a.start, a.end, a.label))
    return kept


# --- (de)serialization: sources.json --------------------------------------


def source_to_json(source: WeakSource) -> dict:
    payload = source.payload
    if source.kind == KIND_TEXT:
        body = {
            "query": payload.query,
            "label": payload.label,
            "case_sensitive": payload.case_sensitive,
        }
    elif source.kind == KIND_REGEX:
        body = {"pattern": payload.pattern, "label": payload.label}
    elif source.kind == KIND_RULE:
        body = {
            "trigger": payload.trigger,
            "trigger_is_regex": payload.trigger_is_regex,
            "window": payload.window,
            "positive_cues": sorted(payload.positive_cues),
            "negative_cues": sorted(payload.negative_cues),
            "label_if_cue": payload.label_if_cue,
            "label_otherwise": payload.label_otherwise,
            "case_sensitive": payload.case_sensitive,
        }
    elif source.kind == KIND_DICTIONARY:
        body = {
            "entries": [
                {"surface": s, "label": label, "support": support}
                for s, (label, support) in sorted(payload.entries.items())
            ],
            "case_sensitive": payload.case_sensitive,
        }
    else:
        raise ValueError(f"unknown source kind {source.kind!r}")
    return {
        "id": source.id,
        "kind": source.kind,
        "priority": source.priority,
        "payload": body,
    }


def source_from_json(data: dict) -> WeakSource:
    kind = data["kind"]
    body = data["payload"]
    if kind == KIND_TEXT:
        if not body.get("query"):
            raise ValueError("text_match query must be non-empty")
        payload = TextMatch(
            body["query"], body["label"], bool(body.get("case_sensitive", True))
        )
    elif kind == KIND_REGEX:
        check_pattern(body["pattern"])
        payload = RegexMatch(body["pattern"], body["label"])
    elif kind == KIND_RULE:
        payload = Rule(
            trigger=body["trigger"],
            window=int(body["window"]),
            positive_cues=frozenset(c.lower() for c in body.get("positive_cues", [])),
            negative_cues=frozenset(c.lower() for c in body.get("negative_cues", [])),
            label_if_cue=body["label_if_cue"],
            label_otherwise=body.get("label_otherwise"),
            trigger_is_regex=bool(body.get("trigger_is_regex", False)),
            case_sensitive=bool(body.get("case_sensitive", False)),
        )
        if payload.trigger_is_regex:
            check_pattern(payload.trigger)
    elif kind == KIND_DICTIONARY:
        entries = {}
        for item in body.get("entries", []):
            support = int(item.get("support", 1))
            if support < 1:
                raise ValueError("dictionary support must be >= 1")
            entries[item["surface"]] = (item["label"], support)
        payload = Dictionary(entries, bool(body.get("case_sensitive", True)))
    else:
        raise ValueError(f"unknown source kind {kind!r}")
    return WeakSource(data["id"], kind, payload, int(data.get("priority", 0)))


def load_sources(path: str) -> dict[str, WeakSource]:
    with open(path, encoding="utf-8") as handle:
        items = json.load(handle)
    sources = {}
    for item in items:
        source = source_from_json(item)
        if source.id in sources:
            raise ValueError(f"duplicate source id {source.id!r}")
        sources[source.id] = source
    return sources


def dump_sources(sources: dict[str, WeakSource]) -> str:
    items = [source_to_json(sources[sid]) for sid in sorted(sources)]
    return json.dumps(items, indent=2, sort_keys=True) + "\n"


def apply_source(
    doc: Document, source: WeakSource, labels=None
) -> list[SpanAnnotation]:
    """Dispatch a registered source onto one document."""
    payload = source.payload
    if source.kind == KIND_TEXT:
        return apply_text_match(
            doc,
            payload.query,
            payload.label,
            payload.case_sensitive,
            labels,
            source.id,
        )
    if source.kind == KIND_REGEX:
        return apply_regex(doc, payload.pattern, payload.label, labels, source.id)
    if source.kind == KIND_RULE:
        return apply_rule(doc, payload, labels, source.id)
    if source.kind == KIND_DICTIONARY:
        if labels is not None:
            for label, _ in payload.entries.values():
                _check_label(label, labels)
        return apply_dictionary(doc, payload, source.id)
    raise UnknownSource(f"unknown source kind {source.kind!r}")
