"""BIO tag space, span <-> tag-sequence bridges, and per-source vote grids.

The hidden-state alphabet is Y = [O, B-l1, I-l1, B-l2, ...]; observations
add one extra symbol ABS ("the source said nothing here"), which is distinct
from O ("the source claims this token is outside any span").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import PROV_DENOISER, Document, SpanAnnotation, Token, align_span
from .errors import OverlapError, UnknownLabel

ABS = "ABS"
O_INDEX = 0


class TagSpace:
    """Index bookkeeping over BIO tags for an ordered label list.

    O sits at index 0; each label contributes B-l immediately followed by
    I-l. The abstain symbol is not a hidden tag: it gets the extra index
    `abs_index == K` in observation space.
    """

    def __init__(self, labels):
        self.labels = list(labels)
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate labels")
        self.tags = ["O"]
        for label in self.labels:
            self.tags.append(f"B-{label}")
            self.tags.append(f"I-{label}")
        self.index = {t: i for i, t in enumerate(self.tags)}
        self.K = len(self.tags)
        self.abs_index = self.K

    def b_index(self, label: str) -> int:
        try:
            return self.index[f"B-{label}"]
        except KeyError:
            raise UnknownLabel(label)

    def i_index(self, label: str) -> int:
        try:
            return self.index[f"I-{label}"]
        except KeyError:
            raise UnknownLabel(label)

    def label_of(self, tag_index: int) -> str | None:
        """Label of a B-/I- tag index, None for O."""
        if tag_index == O_INDEX:
            return None
        return self.labels[(tag_index - 1) // 2]

    def is_b(self, tag_index: int) -> bool:
        return tag_index > 0 and (tag_index - 1) % 2 == 0

    def is_i(self, tag_index: int) -> bool:
        return tag_index > 0 and (tag_index - 1) % 2 == 1

    def observation_symbols(self) -> list[str]:
        return self.tags + [ABS]

    def transition_mask(self) -> np.ndarray:
        """Boolean K x K matrix of structurally valid BIO transitions.

        I-l may only follow B-l or I-l; everything else is free.
        """
        mask = np.ones((self.K, self.K), dtype=bool)
        for j in range(self.K):
            if not self.is_i(j):
                continue
            b_j = j - 1
            for i in range(self.K):
                mask[i, j] = i in (b_j, j)
        return mask

    def start_mask(self) -> np.ndarray:
        """Valid sequence-initial tags: O and any B-l (never I-l)."""
        mask = np.ones(self.K, dtype=bool)
        for i in range(self.K):
            if self.is_i(i):
                mask[i] = False
        return mask

    def __eq__(self, other):
        return isinstance(other, TagSpace) and self.labels == other.labels

    def __repr__(self):
        return f"TagSpace({self.labels!r})"


def encode_bio(
    spans: list[SpanAnnotation], tokens: list[Token], tag_space: TagSpace
) -> np.ndarray:
    """Encode non-overlapping spans as a tag-index sequence over `tokens`.

    Spans are aligned to token boundaries first; a span cutting through a
    token claims the whole token. Two spans claiming the same token raise
    OverlapError.
    """
    seq = np.zeros(len(tokens), dtype=np.int32)
    claimed = np.zeros(len(tokens), dtype=bool)
    for span in sorted(spans, key=lambda a: (a.start, a.end, a.label)):
        i, j, _ = align_span(span, tokens)
        if claimed[i:j].any():
            raise OverlapError(
                f"span {span.start}..{span.end} ({span.label}) claims an "
                "already-claimed token"
            )
        claimed[i:j] = True
        seq[i] = tag_space.b_index(span.label)
        seq[i + 1 : j] = tag_space.i_index(span.label)
    return seq


def repair_bio(tags, tag_space: TagSpace) -> np.ndarray:
    """Repair I-l tags that lack a compatible predecessor to B-l."""
    out = np.asarray(tags, dtype=np.int32).copy()
    prev = O_INDEX
    for t in range(len(out)):
        y = int(out[t])
        if tag_space.is_i(y) and prev not in (y - 1, y):
            out[t] = y - 1
        prev = int(out[t])
    return out


def decode_bio(
    tags,
    tokens: list[Token],
    text: str,
    tag_space: TagSpace,
    provenance: str = PROV_DENOISER,
) -> list[SpanAnnotation]:
    """Decode a tag sequence into spans; repair makes this total.

    Runs of B-l (I-l)* become one span from the first token's start to the
    last token's end.
    """
    if len(tags) != len(tokens):
        raise ValueError(f"{len(tags)} tags for {len(tokens)} tokens")
    seq = repair_bio(tags, tag_space)
    spans: list[SpanAnnotation] = []
    t = 0
    n = len(seq)
    while t < n:
        y = int(seq[t])
        if not tag_space.is_b(y):
            t += 1
            continue
        start_tok = t
        t += 1
        while t < n and int(seq[t]) == y + 1:
            t += 1
        start = tokens[start_tok].start
        end = tokens[t - 1].end
        spans.append(
            SpanAnnotation(
                f"T{len(spans) + 1}",
                tag_space.label_of(y),
                start,
                end,
                text[start:end],
                provenance,
            )
        )
    return spans


@dataclass
class VoteGrid:
    """Token x source observation matrix for one document.

    obs[t, j] is a tag index or `tag_space.abs_index`; O never appears as
    an observation because a non-firing source makes no negative claim.
    """

    doc_id: str
    obs: np.ndarray
    source_ids: list[str]
    tag_space: TagSpace

    @property
    def n_tokens(self) -> int:
        return self.obs.shape[0]

    @property
    def n_sources(self) -> int:
        return self.obs.shape[1]


def build_vote_grid(
    doc: Document,
    per_source: dict[str, list[SpanAnnotation]],
    tag_space: TagSpace,
    source_ids=None,
) -> VoteGrid:
    """Turn per-source span layers into a vote grid.

    Each source's spans must be pairwise non-overlapping in characters.
    After expansion to whole tokens, a later span that would claim an
    already-claimed token is dropped (only sub-token-boundary collisions
    can cause this).
    """
    if source_ids is None:
        source_ids = sorted(per_source)
    tokens = doc.tokens
    n = len(tokens)
    obs = np.full((n, len(source_ids)), tag_space.abs_index, dtype=np.int16)
    for j, sid in enumerate(source_ids):
        spans = sorted(per_source.get(sid, []), key=lambda a: (a.start, a.end))
        prev_end = -1
        claimed = np.zeros(n, dtype=bool)
        for span in spans:
            if span.start < prev_end:
                raise OverlapError(
                    f"source {sid!r} has overlapping spans on doc {doc.id!r}"
                )
            prev_end = span.end
            i, k, _ = align_span(span, tokens)
            if claimed[i:k].any():
                continue
            claimed[i:k] = True
            obs[i, j] = tag_space.b_index(span.label)
            obs[i + 1 : k, j] = tag_space.i_index(span.label)
    return VoteGrid(doc.id, obs, list(source_ids), tag_space)
