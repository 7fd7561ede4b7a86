"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own code paths: HMM
quantities come from exhaustive enumeration, regex matching from a
brute-force longest-at-each-position scan over stdlib `re.fullmatch`.
"""

import re as stdlib_re

import numpy as np

from weaklab.corpus import Document, Project, SpanAnnotation
from weaklab.denoiser import HmmParams
from weaklab.tags import TagSpace, VoteGrid

WORDS = [
    "TiO2",
    "powder",
    "heated",
    "spring",
    "constant",
    "degC",
    "45",
    "solution",
    "µm",
    "naïve",
    "京",
    "mixed",
    "acid",
    "x",
]
PUNCT = ["%", ",", ".", "(", ")", "-"]


def random_text(rng, n_words=12, newlines=True) -> str:
    parts = []
    for _ in range(int(n_words)):
        parts.append(str(rng.choice(WORDS)))
        roll = rng.random()
        if roll < 0.15:
            parts.append(str(rng.choice(PUNCT)))
        if newlines and rng.random() < 0.1:
            parts.append("\n")
        else:
            parts.append(" ")
    return "".join(parts).strip()


def random_ann_set(rng, doc: Document, labels, max_spans=6):
    """Random valid, non-overlapping annotations that never cross a
    newline (the Brat line format cannot carry one)."""
    text = doc.text
    anns = []
    taken = []
    attempts = 0
    target = int(rng.integers(0, max_spans + 1))
    while len(anns) < target and attempts < 50:
        attempts += 1
        if len(text) < 2:
            break
        start = int(rng.integers(0, len(text) - 1))
        end = int(rng.integers(start + 1, min(len(text), start + 12) + 1))
        surface = text[start:end]
        if "\n" in surface or "\t" in surface or surface.isspace():
            continue
        if any(not (end <= s or start >= e) for s, e in taken):
            continue
        taken.append((start, end))
        anns.append((start, end, str(rng.choice(list(labels)))))
    anns.sort()
    return [
        SpanAnnotation(f"T{k}", label, s, e, text[s:e], "manual")
        for k, (s, e, label) in enumerate(anns, start=1)
    ]


def make_doc(text: str, doc_id: str = "d1") -> Document:
    return Document(doc_id, text)


def tiny_project() -> Project:
    project = Project(name="tiny", labels={"Material", "Condition-Unit"})
    doc = Document("doc1", "TiO2 powder was heated to 500 degC in air .")
    project.documents["doc1"] = doc
    project.set_layer(
        "doc1",
        "gold",
        [
            SpanAnnotation("T1", "Material", 0, 4, "TiO2", "manual"),
            SpanAnnotation("T2", "Condition-Unit", 30, 34, "degC", "manual"),
        ],
    )
    return project


# --- HMM oracles -----------------------------------------------------------


def brute_force_emissions(emissions, obs):
    """B[t, y] via explicit per-factor loops (no vectorized shortcut)."""
    T, J = obs.shape
    K = emissions[0].shape[0]
    B = np.ones((T, K))
    for t in range(T):
        for y in range(K):
            for j in range(J):
                B[t, y] *= emissions[j][y, obs[t, j]]
    return B


def brute_force_hmm(pi, trans, emissions, obs):
    """All K^T hidden sequences, enumerated.

    Returns (marginals T x K, log_likelihood, best_path_log_score).
    """
    T, _ = obs.shape
    K = len(pi)
    B = brute_force_emissions(emissions, obs)
    seqs = np.stack(
        np.meshgrid(*([np.arange(K)] * T), indexing="ij"), axis=-1
    ).reshape(-1, T)
    probs = pi[seqs[:, 0]] * B[0, seqs[:, 0]]
    for t in range(1, T):
        probs = probs * trans[seqs[:, t - 1], seqs[:, t]] * B[t, seqs[:, t]]
    total = probs.sum()
    marginals = np.stack(
        [
            np.bincount(seqs[:, t], weights=probs, minlength=K)
            for t in range(T)
        ]
    )
    marginals /= total
    return marginals, float(np.log(total)), float(np.log(probs.max()))


def random_hmm_params(rng, n_labels, n_sources) -> HmmParams:
    tag_space = TagSpace([f"L{i}" for i in range(n_labels)])
    K = tag_space.K
    mask = tag_space.transition_mask()
    pi = (rng.random(K) + 0.05) * tag_space.start_mask()
    pi /= pi.sum()
    trans = (rng.random((K, K)) + 0.05) * mask
    trans /= trans.sum(axis=1, keepdims=True)
    emissions = []
    for _ in range(n_sources):
        emis = rng.random((K, K + 1)) + 0.05
        emis /= emis.sum(axis=1, keepdims=True)
        emissions.append(emis)
    return HmmParams(
        tag_space, [f"s{j}" for j in range(n_sources)], pi, trans, emissions, mask
    )


def random_grid(rng, params: HmmParams, n_tokens, abstain=0.3) -> VoteGrid:
    K = params.tag_space.K
    J = len(params.source_ids)
    obs = rng.integers(0, K, size=(n_tokens, J))
    obs = np.where(rng.random((n_tokens, J)) < abstain, K, obs)
    return VoteGrid("synthetic", obs.astype(np.int16), list(params.source_ids), params.tag_space)


# --- regex oracle ----------------------------------------------------------


def reference_leftmost_longest(pattern: str, text: str):
    """Longest match at each position, scanning left to right, via stdlib
    fullmatch on slices. Only valid for context-free patterns (no anchors,
    no lookaround, no backreferences, no \\b)."""
    rx = stdlib_re.compile(pattern)
    spans = []
    pos = 0
    n = len(text)
    while pos < n:
        best_end = -1
        for end in range(n, pos, -1):
            if rx.fullmatch(text[pos:end]):
                best_end = end
                break
        if best_end > pos:
            spans.append((pos, best_end))
            pos = best_end
        else:
            pos += 1
    return spans


def random_pattern(rng, depth=0) -> str:
    """Random pattern inside the supported, context-free regex subset."""
    choices = ["literal", "class", "dot"]
    if depth < 2:
        choices += ["concat", "alt", "group"]
    kind = rng.choice(choices)
    if kind == "literal":
        return str(rng.choice(list("abcxyz012 %")))
    if kind == "dot":
        return "."
    if kind == "class":
        body = "".join(
            rng.choice(list("abcxyz012"), size=int(rng.integers(1, 4)), replace=False)
        )
        neg = "^" if rng.random() < 0.2 else ""
        return f"[{neg}{body}]"
    if kind == "concat":
        return "".join(
            _quantified(rng, depth) for _ in range(int(rng.integers(2, 4)))
        )
    if kind == "alt":
        return "|".join(
            random_pattern(rng, depth + 1) for _ in range(int(rng.integers(2, 4)))
        )
    return "(" + random_pattern(rng, depth + 1) + ")"


def _quantified(rng, depth) -> str:
    atom = random_pattern(rng, depth + 1)
    if len(atom) > 1 and not (
        atom.startswith("(") or atom.startswith("[")
    ):
        atom = "(" + atom + ")"
    roll = rng.random()
    if roll < 0.5:
        return atom
    if roll < 0.65:
        return atom + "*"
    if roll < 0.8:
        return atom + "+"
    if roll < 0.9:
        return atom + "?"
    return atom + "{1,2}"


def random_subject(rng, n=14) -> str:
    return "".join(rng.choice(list("abcxyz012 %")) for _ in range(int(n)))
