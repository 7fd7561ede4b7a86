"""Multi-source HMM label aggregation.

Hidden states are BIO tags; each weak source gets its own emission
(confusion) matrix over observed tags plus the abstain symbol, and sources
are conditionally independent given the true tag. Training is Baum-Welch
over unlabeled vote grids; decoding is Viterbi under a BIO-masked
transition matrix, so the output always decodes into well-formed spans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..corpus import DENOISED_LAYER, PROV_DENOISER, Project, SpanAnnotation
from ..errors import DegenerateLikelihood, NoSources
from ..tags import O_INDEX, TagSpace, VoteGrid, build_vote_grid, decode_bio, repair_bio
from . import kernels


@dataclass
class FitConfig:
    max_iters: int = 50
    rel_tol: float = 1e-4
    epsilon: float = 1e-6
    seed: int = 0
    diag_mass: float = 0.8
    self_loop_boost: float = 2.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol <= 0 or self.epsilon <= 0:
            raise ValueError("rel_tol and epsilon must be positive")


@dataclass
class HmmParams:
    """pi over tags, BIO-masked transitions, one emission matrix per source.

    Emission matrices are K x (K+1): the last column is the abstain symbol.
    pi carries structural zeros on I- tags so decoded sequences never start
    mid-span.
    """

    tag_space: TagSpace
    source_ids: list[str]
    pi: np.ndarray
    trans: np.ndarray
    emissions: list[np.ndarray]
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mask is None:
            self.mask = self.tag_space.transition_mask()


def validate_params(params: HmmParams, atol: float = 1e-9) -> None:
    K = params.tag_space.K
    if params.pi.shape != (K,) or params.trans.shape != (K, K):
        raise ValueError("parameter shapes do not match the tag space")
    if abs(params.pi.sum() - 1.0) > atol:
        raise ValueError("pi does not sum to 1")
    if np.any(params.pi < 0) or np.any(params.trans < 0):
        raise ValueError("negative probabilities")
    if np.any(np.abs(params.trans.sum(axis=1) - 1.0) > atol):
        raise ValueError("transition rows do not sum to 1")
    if np.any(params.trans[~params.mask] != 0.0):
        raise ValueError("masked transition entries must be exactly 0")
    for j, emis in enumerate(params.emissions):
        if emis.shape != (K, K + 1):
            raise ValueError(f"emission matrix {j} has shape {emis.shape}")
        if np.any(emis < 0):
            raise ValueError("negative probabilities")
        if np.any(np.abs(emis.sum(axis=1) - 1.0) > atol):
            raise ValueError(f"emission rows of source {j} do not sum to 1")


def init_params(
    tag_space: TagSpace, source_ids: list[str], cfg: FitConfig
) -> HmmParams:
    """Deterministic initialization biased toward trustworthy sources.

    Emissions put `diag_mass` on o == y and split the rest uniformly over
    the other observation symbols (including abstain); transitions are
    uniform over valid successors with the self-loop weight boosted.
    """
    K = tag_space.K
    mask = tag_space.transition_mask()
    start = tag_space.start_mask()

    pi = start.astype(float)
    pi /= pi.sum()

    trans = mask.astype(float)
    trans[np.arange(K), np.arange(K)] *= cfg.self_loop_boost
    trans /= trans.sum(axis=1, keepdims=True)

    off = (1.0 - cfg.diag_mass) / K  # K other symbols: K-1 tags + abstain
    emissions = []
    for _ in source_ids:
        emis = np.full((K, K + 1), off)
        emis[np.arange(K), np.arange(K)] = cfg.diag_mass
        emis /= emis.sum(axis=1, keepdims=True)
        emissions.append(emis)
    return HmmParams(tag_space, list(source_ids), pi, trans, emissions, mask)


def emission_scores(params: HmmParams, grid: VoteGrid) -> np.ndarray:
    """B[t, y] = prod over sources of E_j[y, obs[t, j]]."""
    T = grid.n_tokens
    B = np.ones((T, params.tag_space.K))
    for j, emis in enumerate(params.emissions):
        B *= emis[:, grid.obs[:, j]].T
    return B


def forward_backward(
    params: HmmParams, grid: VoteGrid
) -> tuple[np.ndarray, float]:
    """Posterior tag marginals per token and the sequence log-likelihood."""
    if grid.n_tokens == 0:
        return np.zeros((0, params.tag_space.K)), 0.0
    B = emission_scores(params, grid)
    alpha, c = kernels.forward(params.pi, params.trans, B)
    beta = kernels.backward(params.trans, B, c)
    posteriors = alpha * beta
    posteriors /= posteriors.sum(axis=1, keepdims=True)
    return posteriors, float(np.log(c).sum())


def _e_step(params: HmmParams, grid: VoteGrid):
    """Expected counts for one document: (start, transitions, emissions, ll)."""
    K = params.tag_space.K
    n_symbols = K + 1
    B = emission_scores(params, grid)
    alpha, c = kernels.forward(params.pi, params.trans, B)
    beta = kernels.backward(params.trans, B, c)
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    xi = kernels.transition_counts(alpha, beta, params.trans, B, c)
    emis_counts = np.zeros((len(params.source_ids), K, n_symbols))
    for j in range(len(params.source_ids)):
        obs_j = grid.obs[:, j]
        for symbol in range(n_symbols):
            rows = gamma[obs_j == symbol]
            if len(rows):
                emis_counts[j, :, symbol] = rows.sum(axis=0)
    return gamma[0], xi, emis_counts, float(np.log(c).sum())


def _m_step(
    tag_space: TagSpace,
    source_ids: list[str],
    mask: np.ndarray,
    start_counts: np.ndarray,
    trans_counts: np.ndarray,
    emis_counts: np.ndarray,
    epsilon: float,
) -> HmmParams:
    start_mask = tag_space.start_mask()
    pi = np.where(start_mask, start_counts + epsilon, 0.0)
    pi /= pi.sum()

    trans = np.where(mask, trans_counts + epsilon, 0.0)
    trans /= trans.sum(axis=1, keepdims=True)

    emissions = []
    for j in range(len(source_ids)):
        emis = emis_counts[j] + epsilon
        emis /= emis.sum(axis=1, keepdims=True)
        emissions.append(emis)
    return HmmParams(tag_space, list(source_ids), pi, trans, emissions, mask)


def em_fit(
    grids: list[VoteGrid],
    tag_space: TagSpace,
    cfg: FitConfig | None = None,
    source_ids: list[str] | None = None,
) -> tuple[HmmParams, list[float]]:
    """Baum-Welch over a corpus of vote grids.

    Returns the fitted parameters together with the log-likelihood trace;
    the returned parameters are the ones the final trace entry was computed
    under, so max_iters=1 returns the initialization scored once.
    """
    cfg = cfg or FitConfig()
    if not grids:
        raise ValueError("em_fit needs at least one vote grid")
    if source_ids is None:
        source_ids = grids[0].source_ids
    if not source_ids:
        raise NoSources("em_fit needs at least one source")
    for grid in grids:
        if grid.source_ids != list(source_ids):
            raise ValueError(f"grid {grid.doc_id!r} has mismatched sources")

    # Deterministic reduction order regardless of caller ordering.
    grids = sorted(grids, key=lambda g: g.doc_id)
    K = tag_space.K
    params = init_params(tag_space, source_ids, cfg)
    trace: list[float] = []
    for iteration in range(cfg.max_iters):
        start_counts = np.zeros(K)
        trans_counts = np.zeros((K, K))
        emis_counts = np.zeros((len(source_ids), K, K + 1))
        total_ll = 0.0
        for grid in grids:
            if grid.n_tokens == 0:
                continue
            try:
                first, xi, emis, ll = _e_step(params, grid)
            except DegenerateLikelihood as exc:
                raise DegenerateLikelihood(f"doc {grid.doc_id!r}: {exc}") from exc
            start_counts += first
            trans_counts += xi
            emis_counts += emis
            total_ll += ll
        trace.append(total_ll)
        if iteration > 0:
            prev = trace[-2]
            rel = abs(trace[-1] - prev) / max(abs(prev), 1e-12)
            if rel < cfg.rel_tol:
                break
        if iteration == cfg.max_iters - 1:
            break
        params = _m_step(
            tag_space,
            source_ids,
            params.mask,
            start_counts,
            trans_counts,
            emis_counts,
            cfg.epsilon,
        )
    return params, trace


def viterbi(params: HmmParams, grid: VoteGrid) -> np.ndarray:
    """Most probable tag sequence; BIO-valid by construction of the mask."""
    if grid.n_tokens == 0:
        return np.zeros(0, dtype=np.int32)
    B = emission_scores(params, grid)
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.pi)
        log_trans = np.log(params.trans)
        log_B = np.log(B)
    try:
        path, _ = kernels.viterbi_path(log_pi, log_trans, log_B)
    except DegenerateLikelihood as exc:
        raise DegenerateLikelihood(f"doc {grid.doc_id!r}: {exc}") from exc
    return path


def viterbi_score(params: HmmParams, grid: VoteGrid) -> float:
    """Log joint probability of the Viterbi path (used by tests)."""
    B = emission_scores(params, grid)
    with np.errstate(divide="ignore"):
        _, score = kernels.viterbi_path(
            np.log(params.pi), np.log(params.trans), np.log(B)
        )
    return score


def sequence_log_score(params: HmmParams, grid: VoteGrid, path) -> float:
    """Log joint probability of an arbitrary tag sequence."""
    B = emission_scores(params, grid)
    with np.errstate(divide="ignore"):
        score = np.log(params.pi[path[0]]) + np.log(B[0, path[0]])
        for t in range(1, len(path)):
            score += np.log(params.trans[path[t - 1], path[t]])
            score += np.log(B[t, path[t]])
    return float(score)


def majority_vote(grid: VoteGrid) -> np.ndarray:
    """Per-token plurality over non-abstain votes, repaired to valid BIO.

    All-abstain tokens fall back to O; ties prefer a non-O tag, then the
    lower tag index.
    """
    tag_space = grid.tag_space
    K = tag_space.K
    tags = np.zeros(grid.n_tokens, dtype=np.int32)
    for t in range(grid.n_tokens):
        row = grid.obs[t]
        votes = row[row != tag_space.abs_index]
        if len(votes) == 0:
            tags[t] = O_INDEX
            continue
        counts = np.bincount(votes, minlength=K)
        best = counts.max()
        winners = np.flatnonzero(counts == best)
        non_o = winners[winners != O_INDEX]
        tags[t] = int(non_o[0]) if len(non_o) else O_INDEX
    return repair_bio(tags, tag_space)


@dataclass
class DenoiseResult:
    spans_by_doc: dict[str, list[SpanAnnotation]]
    params: HmmParams
    trace: list[float]


def denoise_corpus(
    project: Project, source_ids: list[str], cfg: FitConfig | None = None
) -> DenoiseResult:
    """Fit the HMM on every document's vote grid and write the `denoised`
    layer from the Viterbi decode."""
    if not source_ids:
        raise NoSources("denoise_corpus needs at least one source id")
    tag_space = TagSpace(sorted(project.labels))
    doc_ids = sorted(project.documents)
    grids = []
    for doc_id in doc_ids:
        doc = project.documents[doc_id]
        per_source = {sid: project.layer(doc_id, sid) for sid in source_ids}
        grids.append(build_vote_grid(doc, per_source, tag_space, source_ids))
    params, trace = em_fit(grids, tag_space, cfg, list(source_ids))
    spans_by_doc = {}
    for doc_id, grid in zip(doc_ids, grids):
        doc = project.documents[doc_id]
        path = viterbi(params, grid)
        spans = decode_bio(path, doc.tokens, doc.text, tag_space, PROV_DENOISER)
        project.set_layer(doc_id, DENOISED_LAYER, spans)
        spans_by_doc[doc_id] = spans
    return DenoiseResult(spans_by_doc, params, trace)


def params_to_json(params: HmmParams) -> str:
    data = {
        "labels": params.tag_space.labels,
        "tags": params.tag_space.tags,
        "observation_symbols": params.tag_space.observation_symbols(),
        "source_ids": params.source_ids,
        "pi": params.pi.tolist(),
        "transition": params.trans.tolist(),
        "emissions": {
            sid: emis.tolist()
            for sid, emis in zip(params.source_ids, params.emissions)
        },
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def params_from_json(text: str) -> HmmParams:
    data = json.loads(text)
    tag_space = TagSpace(data["labels"])
    source_ids = data["source_ids"]
    return HmmParams(
        tag_space,
        source_ids,
        np.array(data["pi"]),
        np.array(data["transition"]),
        [np.array(data["emissions"][sid]) for sid in source_ids],
    )
