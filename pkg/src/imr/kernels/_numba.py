"""Numba-compiled versions of the kernels in ``_numpy``; same signatures, same results."""

import numpy as np
from numba import njit


@njit(cache=True)
def group_sums(ids, values, n_groups):
    out = np.zeros(n_groups)
    for i in range(ids.shape[0]):
        out[ids[i]] += values[i]
    return out


@njit(cache=True)
def group_moments(ids, values, weights, n_groups):
    count = np.zeros(n_groups)
    total = np.zeros(n_groups)
    for i in range(ids.shape[0]):
        count[ids[i]] += weights[i]
        total[ids[i]] += weights[i] * values[i]
    mean = np.zeros(n_groups)
    for g in range(n_groups):
        if count[g] > 0:
            mean[g] = total[g] / count[g]
    ss = np.zeros(n_groups)
    for i in range(ids.shape[0]):
        d = values[i] - mean[ids[i]]
        ss[ids[i]] += weights[i] * d * d
    return count, mean, ss


@njit(cache=True)
def sample_children(nodes, uniforms, offsets, cumprobs, children):
    out = np.empty(nodes.shape[0], dtype=np.int64)
    for i in range(nodes.shape[0]):
        n = nodes[i]
        start = offsets[n]
        stop = offsets[n + 1]
        j = start
        while j < stop - 1 and uniforms[i] >= cumprobs[j]:
            j += 1
        out[i] = children[j]
    return out

