"""Span metrics, the dictionary-projection experiment, the denoising-gain
experiment, and desk-scale synthetic corpora to run them on."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import (
    DENOISED_LAYER,
    GOLD_LAYER,
    Document,
    Project,
    SpanAnnotation,
    source_provenance,
)
from .denoiser import FitConfig, denoise_corpus, majority_vote
from .errors import InsufficientDocs, OverlapError
from .sources import (
    build_dictionary,
    dictionary_candidates,
    resolve_overlaps,
    select_dictionary_matches,
)
from .tags import TagSpace, VoteGrid, build_vote_grid, decode_bio, encode_bio

MODE_EXACT = "exact"
MODE_TOKEN = "token"


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int
    mode: str

    @property
    def precision(self) -> float:
        return 1.0 if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float:
        return 1.0 if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        if self.mode != other.mode:
            raise ValueError("cannot add counts of different modes")
        return MatchCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.mode
        )


def _check_disjoint(anns: list[SpanAnnotation], which: str) -> None:
    ordered = sorted(anns, key=lambda a: (a.start, a.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.start < prev.end:
            raise OverlapError(
                f"{which} spans overlap: {prev.start}..{prev.end} and "
                f"{cur.start}..{cur.end}"
            )


def score_spans(
    pred: list[SpanAnnotation],
    gold: list[SpanAnnotation],
    mode: str = MODE_EXACT,
    tokens=None,
) -> MatchCounts:
    """Count matches between two non-overlapping span lists.

    Exact mode matches (label, start, end) triples; token mode counts
    agreement over non-O BIO tags and needs the document's tokens.
    """
    _check_disjoint(pred, "pred")
    _check_disjoint(gold, "gold")
    if mode == MODE_EXACT:
        pred_set = {(a.label, a.start, a.end) for a in pred}
        gold_set = {(a.label, a.start, a.end) for a in gold}
        tp = len(pred_set & gold_set)
        return MatchCounts(tp, len(pred_set) - tp, len(gold_set) - tp, mode)
    if mode == MODE_TOKEN:
        if tokens is None:
            raise ValueError("token mode needs the document tokens")
        labels = sorted({a.label for a in pred} | {a.label for a in gold})
        space = TagSpace(labels)
        p = encode_bio(pred, tokens, space)
        g = encode_bio(gold, tokens, space)
        tp = int(np.sum((p == g) & (g != 0)))
        fp = int(np.sum((p != 0) & (p != g)))
        fn = int(np.sum((g != 0) & (p != g)))
        return MatchCounts(tp, fp, fn, mode)
    raise ValueError(f"unknown mode {mode!r}")


def layer_metrics(
    project: Project,
    pred_layer: str,
    gold_layer: str = GOLD_LAYER,
    mode: str = MODE_EXACT,
) -> dict:
    """Per-document scores plus macro (mean over documents) and micro
    (pooled counts) aggregates."""
    per_doc = {}
    pooled = MatchCounts(0, 0, 0, mode)
    p_vals, r_vals, f_vals = [], [], []
    for doc_id in sorted(project.documents):
        doc = project.documents[doc_id]
        counts = score_spans(
            project.layer(doc_id, pred_layer),
            project.layer(doc_id, gold_layer),
            mode,
            doc.tokens,
        )
        pooled = pooled + counts
        per_doc[doc_id] = {
            "precision": counts.precision,
            "recall": counts.recall,
            "f1": counts.f1,
            "tp": counts.tp,
            "fp": counts.fp,
            "fn": counts.fn,
        }
        p_vals.append(counts.precision)
        r_vals.append(counts.recall)
        f_vals.append(counts.f1)
    n = max(len(per_doc), 1)
    return {
        "mode": mode,
        "pred_layer": pred_layer,
        "gold_layer": gold_layer,
        "per_doc": per_doc,
        "macro": {
            "precision": sum(p_vals) / n,
            "recall": sum(r_vals) / n,
            "f1": sum(f_vals) / n,
        },
        "micro": {
            "precision": pooled.precision,
            "recall": pooled.recall,
            "f1": pooled.f1,
            "tp": pooled.tp,
            "fp": pooled.fp,
            "fn": pooled.fn,
        },
    }


def token_accuracy(
    project: Project, pred_layer: str, gold_layer: str = GOLD_LAYER
) -> float:
    """Fraction of tokens whose BIO tag matches gold (O included)."""
    labels = sorted(project.labels)
    space = TagSpace(labels)
    agree = total = 0
    for doc_id in sorted(project.documents):
        doc = project.documents[doc_id]
        p = encode_bio(project.layer(doc_id, pred_layer), doc.tokens, space)
        g = encode_bio(project.layer(doc_id, gold_layer), doc.tokens, space)
        agree += int(np.sum(p == g))
        total += len(doc.tokens)
    return agree / total if total else 1.0


# --- dictionary experiment -------------------------------------------------


@dataclass
class ExperimentConfig:
    ratios: list[float]
    trials_per_ratio: int = 1000
    seed: int = 0

    def __post_init__(self):
        if sorted(self.ratios) != list(self.ratios):
            raise ValueError("ratios must be sorted ascending")
        if any(not (0 < r <= 1) for r in self.ratios):
            raise ValueError("ratios must lie in (0, 1]")
        if self.trials_per_ratio < 1:
            raise ValueError("trials_per_ratio must be >= 1")


@dataclass(frozen=True)
class DictCurvePoint:
    ratio: float
    mean_recall_annotated: float
    mean_recall_unannotated: float | None
    mean_recall_all: float
    stddev_unannotated: float | None
    trials: int


def _trial_recall(counts: list[tuple[int, int]]) -> float:
    tp = sum(c[0] for c in counts)
    fn = sum(c[1] for c in counts)
    return 1.0 if tp + fn == 0 else tp / (tp + fn)


def dictionary_experiment(
    project: Project, cfg: ExperimentConfig
) -> list[DictCurvePoint]:
    """Sample annotated subsets, project their dictionary onto the rest,
    and report mean exact-span recall per ratio.

    Trial t uses the document permutation drawn from seed + t and every
    ratio takes a prefix of it, so samples nest across ratios (common
    random numbers) and serial, parallel, and per-ratio executions agree.
    Candidate occurrences are precomputed once per document; per-trial
    work is pure selection, equivalent to apply_dictionary
    (property-tested).
    """
    doc_ids = sorted(project.documents)
    n = len(doc_ids)
    if n == 0:
        raise InsufficientDocs("project has no documents")
    gold = {d: project.layer(d, GOLD_LAYER) for d in doc_ids}

    # All surfaces any trial dictionary could contain occur in some gold
    # layer, so occurrences can be indexed up front.
    full_dict = build_dictionary(gold, doc_ids)
    occurrences = {
        d: dictionary_candidates(project.documents[d], full_dict) for d in doc_ids
    }
    gold_triples = {
        d: {(a.label, a.start, a.end) for a in gold[d]} for d in doc_ids
    }
    permutations = [
        np.random.default_rng(cfg.seed + trial).permutation(n)
        for trial in range(cfg.trials_per_ratio)
    ]

    points = []
    for ratio in cfg.ratios:
        if ratio * n < 1:
            raise InsufficientDocs(
                f"ratio {ratio} of {n} documents leaves no sample"
            )
        k = math.ceil(ratio * n)
        rec_ann, rec_un, rec_all = [], [], []
        for trial in range(cfg.trials_per_ratio):
            annotated = {doc_ids[i] for i in permutations[trial][:k]}
            trial_dict = build_dictionary(gold, sorted(annotated))
            surfaces = trial_dict.entries
            counts_ann, counts_un = [], []
            for d in doc_ids:
                cands = [
                    (s, e, surfaces[surf][0], surfaces[surf][1], surf)
                    for (s, e, _, _, surf) in occurrences[d]
                    if surf in surfaces
                ]
                matched = select_dictionary_matches(cands)
                triples = gold_triples[d]
                tp = sum(1 for s, e, lab in matched if (lab, s, e) in triples)
                fn = len(triples) - tp
                (counts_ann if d in annotated else counts_un).append((tp, fn))
            rec_ann.append(_trial_recall(counts_ann))
            rec_all.append(_trial_recall(counts_ann + counts_un))
            if counts_un:
                rec_un.append(_trial_recall(counts_un))
        mean_un = float(np.mean(rec_un)) if rec_un else None
        std_un = float(np.std(rec_un)) if rec_un else None
        points.append(
            DictCurvePoint(
                ratio,
                float(np.mean(rec_ann)),
                mean_un,
                float(np.mean(rec_all)),
                std_un,
                cfg.trials_per_ratio,
            )
        )
    return points


def dict_curve_csv(points: list[DictCurvePoint]) -> str:
    lines = ["ratio,mean_recall_unannotated,mean_recall_all,stddev"]
    for p in points:
        un = "" if p.mean_recall_unannotated is None else f"{p.mean_recall_unannotated:.6f}"
        sd = "" if p.stddev_unannotated is None else f"{p.stddev_unannotated:.6f}"
        lines.append(f"{p.ratio:.6f},{un},{p.mean_recall_all:.6f},{sd}")
    return "\n".join(lines) + "\n"


# --- denoising experiment --------------------------------------------------


def denoising_experiment(
    project: Project,
    source_ids: list[str],
    cfg: FitConfig | None = None,
    priorities: dict[str, int] | None = None,
    mode: str = MODE_EXACT,
) -> dict:
    """Score weak layers before and after denoising against gold.

    "before" resolves all source outputs into one layer; "after" is the
    denoised layer; the majority-vote baseline and each individual source
    are reported too. Recall/precision/F1 are macro means over documents;
    token_accuracy pools tokens corpus-wide.
    """
    priorities = priorities or {}
    tag_space = TagSpace(sorted(project.labels))
    doc_ids = sorted(project.documents)

    for doc_id in doc_ids:
        doc = project.documents[doc_id]
        candidates = []
        for sid in source_ids:
            pr = priorities.get(sid, 0)
            candidates.extend((ann, pr) for ann in project.layer(doc_id, sid))
        project.set_layer(doc_id, "combined", resolve_overlaps(candidates))
        grid = build_vote_grid(
            doc,
            {sid: project.layer(doc_id, sid) for sid in source_ids},
            tag_space,
            source_ids,
        )
        mv_tags = majority_vote(grid)
        project.set_layer(
            doc_id,
            "majority_vote",
            decode_bio(mv_tags, doc.tokens, doc.text, tag_space, "majority-vote"),
        )

    result = denoise_corpus(project, source_ids, cfg)

    layers = {
        "before": "combined",
        "after": DENOISED_LAYER,
        "majority_vote": "majority_vote",
    }
    report = {"mode": mode, "layers": {}, "per_source": {}, "trace_len": len(result.trace)}
    for name, layer in layers.items():
        metrics = layer_metrics(project, layer, GOLD_LAYER, mode)
        report["layers"][name] = {
            **metrics["macro"],
            "token_accuracy": token_accuracy(project, layer),
        }
    for sid in source_ids:
        metrics = layer_metrics(project, sid, GOLD_LAYER, mode)
        report["per_source"][sid] = {
            **metrics["macro"],
            "token_accuracy": token_accuracy(project, sid),
        }
    report["recall_before"] = report["layers"]["before"]["recall"]
    report["recall_after"] = report["layers"]["after"]["recall"]
    report["recall_majority_vote"] = report["layers"]["majority_vote"]["recall"]
    return report


def denoise_report_csv(report: dict) -> str:
    lines = ["layer,precision,recall,f1"]
    rows = [(name, vals) for name, vals in report["layers"].items()]
    rows += [(f"source:{sid}", vals) for sid, vals in report["per_source"].items()]
    for name, vals in rows:
        lines.append(
            f"{name},{vals['precision']:.6f},{vals['recall']:.6f},{vals['f1']:.6f}"
        )
    return "\n".join(lines) + "\n"


# --- synthetic corpora -----------------------------------------------------


@dataclass
class SynthSource:
    id: str
    accuracy: float
    abstain: float

    def __post_init__(self):
        if not (0 <= self.accuracy <= 1 and 0 <= self.abstain <= 1):
            raise ValueError("accuracy and abstain must lie in [0, 1]")


@dataclass
class SynthSpec:
    n_docs: int
    tokens_per_doc: int
    labels: list[str]
    sources: list[SynthSource] = field(default_factory=list)
    span_density: float = 0.15
    continue_prob: float = 0.5
    min_span_len: int = 1  # 1 or 2; 2 forces B -> I
    filler_vocab: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.min_span_len not in (1, 2):
            raise ValueError("min_span_len must be 1 or 2")


@dataclass
class SynthCorpus:
    project: Project
    tag_space: TagSpace
    gold_tags: dict[str, np.ndarray]
    raw_obs: dict[str, np.ndarray]  # pre-encoding draws; O means "said O"
    source_ids: list[str]


def _generator_chain(
    tag_space: TagSpace,
    span_density: float,
    continue_prob: float,
    min_span_len: int = 1,
):
    """Ground-truth BIO chain: enter a span from O with span_density mass,
    extend it with continue_prob, and always return to O between spans, so
    adjacent spans never touch."""
    K = tag_space.K
    n_labels = len(tag_space.labels)
    pi = np.zeros(K)
    pi[0] = 1.0 - span_density
    trans = np.zeros((K, K))
    for label in tag_space.labels:
        pi[tag_space.b_index(label)] = span_density / n_labels
    trans[0, 0] = 1.0 - span_density
    for label in tag_space.labels:
        trans[0, tag_space.b_index(label)] = span_density / n_labels
    for label in tag_space.labels:
        b, i = tag_space.b_index(label), tag_space.i_index(label)
        if min_span_len >= 2:
            trans[b, i] = 1.0
        else:
            trans[b, i] = continue_prob
            trans[b, 0] = 1.0 - continue_prob
        trans[i, i] = continue_prob
        trans[i, 0] = 1.0 - continue_prob
    return pi, trans


def _sample_tags(rng, pi, trans, length: int) -> np.ndarray:
    K = len(pi)
    tags = np.empty(length, dtype=np.int32)
    tags[0] = rng.choice(K, p=pi)
    for t in range(1, length):
        tags[t] = rng.choice(K, p=trans[tags[t - 1]])
    return tags


def _doc_from_surfaces(doc_id: str, surfaces: list[str]) -> Document:
    return Document(doc_id, " ".join(surfaces))


def _spans_from_tags(doc: Document, tags, tag_space: TagSpace, provenance: str):
    return decode_bio(tags, doc.tokens, doc.text, tag_space, provenance)


def synth_corpus(spec: SynthSpec, seed: int | None = None) -> SynthCorpus:
    """Gold layer drawn from a ground-truth BIO chain plus one noisy layer
    per synthetic source.

    Each source looks at each token's gold tag, abstains with its abstain
    rate, otherwise reports the gold tag with probability `accuracy` and a
    uniformly chosen wrong non-O tag otherwise. Observation sequences are
    stored as span layers, so BIO-invalid draws are repaired on decode; the
    raw draws are kept on the result for calibration checks.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    tag_space = TagSpace(list(spec.labels))
    K = tag_space.K
    pi, trans = _generator_chain(
        tag_space, spec.span_density, spec.continue_prob, spec.min_span_len
    )

    project = Project(name="synth", labels=set(spec.labels))
    gold_tags: dict[str, np.ndarray] = {}
    raw_obs: dict[str, np.ndarray] = {}
    source_ids = [s.id for s in spec.sources]

    non_o = np.arange(1, K)
    for d in range(spec.n_docs):
        doc_id = f"doc{d:04d}"
        tags = _sample_tags(rng, pi, trans, spec.tokens_per_doc)
        surfaces = [
            f"w{rng.integers(spec.filler_vocab):03d}"
            for _ in range(spec.tokens_per_doc)
        ]
        doc = _doc_from_surfaces(doc_id, surfaces)
        project.documents[doc_id] = doc
        gold_tags[doc_id] = tags
        project.set_layer(
            doc_id, GOLD_LAYER, _spans_from_tags(doc, tags, tag_space, "synth")
        )

        obs = np.empty((spec.tokens_per_doc, len(spec.sources)), dtype=np.int32)
        for j, src in enumerate(spec.sources):
            for t in range(spec.tokens_per_doc):
                if rng.random() < src.abstain:
                    obs[t, j] = tag_space.abs_index
                elif rng.random() < src.accuracy:
                    obs[t, j] = tags[t]
                else:
                    wrong = non_o[non_o != tags[t]]
                    obs[t, j] = rng.choice(wrong)
            # O and ABS both mean "no span here" once stored as a layer.
            col = obs[:, j].copy()
            col[col == tag_space.abs_index] = 0
            project.set_layer(
                doc_id,
                src.id,
                _spans_from_tags(doc, col, tag_space, source_provenance(src.id)),
            )
        raw_obs[doc_id] = obs
    return SynthCorpus(project, tag_space, gold_tags, raw_obs, source_ids)


def raw_vote_grids(corpus: SynthCorpus) -> list:
    """Vote grids carrying the generator's raw per-token draws.

    Unlike grids rebuilt from span layers, these preserve explicit O votes
    and BIO-invalid draws, which is exactly the observation model the
    synthetic sources were defined with.
    """
    return [
        VoteGrid(
            doc_id,
            corpus.raw_obs[doc_id].astype(np.int16),
            list(corpus.source_ids),
            corpus.tag_space,
        )
        for doc_id in sorted(corpus.project.documents)
    ]


def layer_vote_grids(corpus: SynthCorpus) -> list:
    """Vote grids rebuilt from the stored span layers (the production path)."""
    return [
        build_vote_grid(
            corpus.project.documents[doc_id],
            {
                sid: corpus.project.layer(doc_id, sid)
                for sid in corpus.source_ids
            },
            corpus.tag_space,
            corpus.source_ids,
        )
        for doc_id in sorted(corpus.project.documents)
    ]


def empirical_confusions(corpus: SynthCorpus, grids) -> dict[str, np.ndarray]:
    """Per-source observation frequencies conditioned on the gold tags.

    This is the realized confusion of the generator on this corpus: the
    matrix an oracle with access to gold would estimate from `grids`.
    """
    K = corpus.tag_space.K
    counts = {sid: np.zeros((K, K + 1)) for sid in corpus.source_ids}
    for grid in grids:
        gold = corpus.gold_tags[grid.doc_id]
        for j, sid in enumerate(corpus.source_ids):
            np.add.at(counts[sid], (gold, grid.obs[:, j]), 1.0)
    out = {}
    for sid, mat in counts.items():
        totals = mat.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            out[sid] = np.where(totals > 0, mat / totals, 0.0)
    return out


def grid_token_accuracies(corpus: SynthCorpus, grids) -> dict[str, float]:
    """Token accuracy of each source's votes against gold (abstain = O)."""
    correct = {sid: 0 for sid in corpus.source_ids}
    total = 0
    for grid in grids:
        gold = corpus.gold_tags[grid.doc_id]
        total += len(gold)
        for j, sid in enumerate(corpus.source_ids):
            col = grid.obs[:, j].copy()
            col[col == corpus.tag_space.abs_index] = 0
            correct[sid] += int(np.sum(col == gold))
    return {sid: c / total for sid, c in correct.items()}


def gold_tag_counts(corpus: SynthCorpus) -> np.ndarray:
    counts = np.zeros(corpus.tag_space.K)
    for tags in corpus.gold_tags.values():
        counts += np.bincount(tags, minlength=corpus.tag_space.K)
    return counts


@dataclass
class DictSynthSpec:
    n_docs: int = 60
    tokens_per_doc: int = 100
    labels: list[str] = field(default_factory=lambda: ["Material", "Condition", "Unit"])
    entity_vocab: int = 120
    zipf_exponent: float = 1.3
    span_density: float = 0.25
    filler_vocab: int = 200
    seed: int = 0


def synth_dictionary_corpus(spec: DictSynthSpec, seed: int | None = None) -> Project:
    """Gold-only corpus whose entity surfaces follow a Zipf law.

    Every entity surface maps to exactly one label, so a dictionary built
    from any subset is conflict-free and self-application recall is 1.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    vocab = [f"ent{k:03d}" for k in range(spec.entity_vocab)]
    vocab_labels = [
        spec.labels[k % len(spec.labels)] for k in range(spec.entity_vocab)
    ]
    weights = 1.0 / np.arange(1, spec.entity_vocab + 1) ** spec.zipf_exponent
    weights /= weights.sum()

    project = Project(name="dict-synth", labels=set(spec.labels))
    for d in range(spec.n_docs):
        doc_id = f"doc{d:04d}"
        surfaces = []
        entity_at = {}
        for t in range(spec.tokens_per_doc):
            if rng.random() < spec.span_density:
                k = int(rng.choice(spec.entity_vocab, p=weights))
                entity_at[t] = k
                surfaces.append(vocab[k])
            else:
                surfaces.append(f"w{rng.integers(spec.filler_vocab):03d}")
        doc = _doc_from_surfaces(doc_id, surfaces)
        project.documents[doc_id] = doc
        anns = []
        for t, k in sorted(entity_at.items()):
            tok = doc.tokens[t]
            anns.append(
                SpanAnnotation(
                    f"T{len(anns) + 1}",
                    vocab_labels[k],
                    tok.start,
                    tok.end,
                    tok.surface,
                    "synth",
                )
            )
        project.set_layer(doc_id, GOLD_LAYER, anns)
    return project
