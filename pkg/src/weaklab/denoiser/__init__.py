"""EM-trained multi-source HMM over BIO vote grids."""

from .hmm import (
    DenoiseResult,
    FitConfig,
    HmmParams,
    denoise_corpus,
    em_fit,
    forward_backward,
    init_params,
    majority_vote,
    params_from_json,
    params_to_json,
    sequence_log_score,
    validate_params,
    viterbi,
    viterbi_score,
)
from .kernels import BACKEND as KERNEL_BACKEND

__all__ = [
    "DenoiseResult",
    "FitConfig",
    "HmmParams",
    "KERNEL_BACKEND",
    "denoise_corpus",
    "em_fit",
    "forward_backward",
    "init_params",
    "majority_vote",
    "params_from_json",
    "params_to_json",
    "sequence_log_score",
    "validate_params",
    "viterbi",
    "viterbi_score",
]
