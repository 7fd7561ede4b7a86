"""Pure numpy fallback for the HMM inner loops.

Mirrors the compiled extension in `_kernels_c.pyx`; the active backend is
chosen in `kernels`. All routines use per-step scaling so sequences up to
10^5 tokens stay in float range.
"""

import numpy as np

from ..errors import DegenerateLikelihood


def forward(pi, trans, emit):
    """Scaled forward pass.

    Returns (alpha, c) where alpha[t] is the normalized filtering
    distribution and c[t] the per-step normalizer; log-likelihood is
    sum(log c).
    """
    T, K = emit.shape
    alpha = np.empty((T, K))
    c = np.empty(T)
    a = pi * emit[0]
    c[0] = a.sum()
    if c[0] <= 0.0:
        raise DegenerateLikelihood("zero emission mass at step 0")
    alpha[0] = a / c[0]
    for t in range(1, T):
        a = (alpha[t - 1] @ trans) * emit[t]
        c[t] = a.sum()
        if c[t] <= 0.0:
            raise DegenerateLikelihood(f"zero emission mass at step {t}")
        alpha[t] = a / c[t]
    return alpha, c


def backward(trans, emit, c):
    """Scaled backward pass matching `forward`'s normalizers."""
    T, K = emit.shape
    beta = np.empty((T, K))
    beta[T - 1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = (trans @ (emit[t + 1] * beta[t + 1])) / c[t + 1]
    return beta


def transition_counts(alpha, beta, trans, emit, c):
    """Expected transition counts, summed over steps."""
    T, K = emit.shape
    acc = np.zeros((K, K))
    for t in range(T - 1):
        w = (emit[t + 1] * beta[t + 1]) / c[t + 1]
        acc += np.outer(alpha[t], w)
    return acc * trans


def viterbi_path(log_pi, log_trans, log_emit):
    """Most likely tag sequence in log space; ties break toward the lower
    tag index. Returns (path, log_score)."""
    T, K = log_emit.shape
    delta = log_pi + log_emit[0]
    back = np.zeros((T, K), dtype=np.int32)
    cols = np.arange(K)
    for t in range(1, T):
        scores = delta[:, None] + log_trans
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], cols] + log_emit[t]
    last = int(np.argmax(delta))
    best = float(delta[last])
    if not np.isfinite(best):
        raise DegenerateLikelihood("no admissible tag sequence")
    path = np.empty(T, dtype=np.int32)
    path[T - 1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, best
