# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled HMM inner loops; API-identical to `_kernels_py`."""

import numpy as np

cimport numpy as cnp

from ..errors import DegenerateLikelihood

cnp.import_array()


def forward(pi, trans, emit):
    cdef double[::1] pi_v = np.ascontiguousarray(pi, dtype=np.float64)
    cdef double[:, ::1] trans_v = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[:, ::1] emit_v = np.ascontiguousarray(emit, dtype=np.float64)
    cdef Py_ssize_t T = emit_v.shape[0]
    cdef Py_ssize_t K = emit_v.shape[1]
    alpha_arr = np.empty((T, K), dtype=np.float64)
    c_arr = np.empty(T, dtype=np.float64)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[::1] c = c_arr
    cdef Py_ssize_t t, i, j
    cdef double total, s

    total = 0.0
    for j in range(K):
        alpha[0, j] = pi_v[j] * emit_v[0, j]
        total += alpha[0, j]
    if total <= 0.0:
        raise DegenerateLikelihood("zero emission mass at step 0")
    c[0] = total
    for j in range(K):
        alpha[0, j] /= total

    for t in range(1, T):
        total = 0.0
        for j in range(K):
            s = 0.0
            for i in range(K):
                s += alpha[t - 1, i] * trans_v[i, j]
            s *= emit_v[t, j]
            alpha[t, j] = s
            total += s
        if total <= 0.0:
            raise DegenerateLikelihood(f"zero emission mass at step {t}")
        c[t] = total
        for j in range(K):
            alpha[t, j] /= total
    return alpha_arr, c_arr


def backward(trans, emit, c):
    cdef double[:, ::1] trans_v = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[:, ::1] emit_v = np.ascontiguousarray(emit, dtype=np.float64)
    cdef double[::1] c_v = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t T = emit_v.shape[0]
    cdef Py_ssize_t K = emit_v.shape[1]
    beta_arr = np.empty((T, K), dtype=np.float64)
    cdef double[:, ::1] beta = beta_arr
    cdef Py_ssize_t t, i, j
    cdef double s

    for j in range(K):
        beta[T - 1, j] = 1.0
    for t in range(T - 2, -1, -1):
        for i in range(K):
            s = 0.0
            for j in range(K):
                s += trans_v[i, j] * emit_v[t + 1, j] * beta[t + 1, j]
            beta[t, i] = s / c_v[t + 1]
    return beta_arr


def transition_counts(alpha, beta, trans, emit, c):
    cdef double[:, ::1] alpha_v = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double[:, ::1] beta_v = np.ascontiguousarray(beta, dtype=np.float64)
    cdef double[:, ::1] trans_v = np.ascontiguousarray(trans, dtype=np.float64)
    cdef double[:, ::1] emit_v = np.ascontiguousarray(emit, dtype=np.float64)
    cdef double[::1] c_v = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t T = emit_v.shape[0]
    cdef Py_ssize_t K = emit_v.shape[1]
    acc_arr = np.zeros((K, K), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef Py_ssize_t t, i, j
    cdef double w

    for t in range(T - 1):
        for j in range(K):
            w = emit_v[t + 1, j] * beta_v[t + 1, j] / c_v[t + 1]
            for i in range(K):
                acc[i, j] += alpha_v[t, i] * w
    for i in range(K):
        for j in range(K):
            acc[i, j] *= trans_v[i, j]
    return acc_arr


def viterbi_path(log_pi, log_trans, log_emit):
    cdef double[::1] pi_v = np.ascontiguousarray(log_pi, dtype=np.float64)
    cdef double[:, ::1] trans_v = np.ascontiguousarray(log_trans, dtype=np.float64)
    cdef double[:, ::1] emit_v = np.ascontiguousarray(log_emit, dtype=np.float64)
    cdef Py_ssize_t T = emit_v.shape[0]
    cdef Py_ssize_t K = emit_v.shape[1]
    delta_arr = np.empty(K, dtype=np.float64)
    prev_arr = np.empty(K, dtype=np.float64)
    back_arr = np.zeros((T, K), dtype=np.int32)
    cdef double[::1] delta = delta_arr
    cdef double[::1] prev = prev_arr
    cdef int[:, ::1] back = back_arr
    cdef Py_ssize_t t, i, j, argbest
    cdef double best, score

    for j in range(K):
        delta[j] = pi_v[j] + emit_v[0, j]
    for t in range(1, T):
        for j in range(K):
            prev[j] = delta[j]
        for j in range(K):
            best = prev[0] + trans_v[0, j]
            argbest = 0
            for i in range(1, K):
                score = prev[i] + trans_v[i, j]
                if score > best:
                    best = score
                    argbest = i
            back[t, j] = <int> argbest
            delta[j] = best + emit_v[t, j]

    best = delta[0]
    argbest = 0
    for j in range(1, K):
        if delta[j] > best:
            best = delta[j]
            argbest = j
    if not np.isfinite(best):
        raise DegenerateLikelihood("no admissible tag sequence")
    path_arr = np.empty(T, dtype=np.int32)
    cdef int[::1] path = path_arr
    path[T - 1] = <int> argbest
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path_arr, float(best)
