"""Pure-numpy implementations of the hot loops."""

import numpy as np


def group_sums(ids, values, n_groups):
    return np.bincount(ids, weights=values, minlength=n_groups).astype(np.float64)


def group_moments(ids, values, weights, n_groups):
    """Weighted count, mean and centred sum of squares per group (two-pass)."""
    count = np.bincount(ids, weights=weights, minlength=n_groups).astype(np.float64)
    total = np.bincount(ids, weights=weights * values, minlength=n_groups)
    mean = np.zeros(n_groups)
    hit = count > 0
    mean[hit] = total[hit] / count[hit]
    dev = values - mean[ids]
    ss = np.bincount(ids, weights=weights * dev * dev, minlength=n_groups).astype(np.float64)
    return count, mean, ss


def sample_children(nodes, uniforms, offsets, cumprobs, children):
    """Pick one child per path: the first child whose cumulative probability exceeds u."""
    degree = offsets[1:] - offsets[:-1]
    width = int(degree.max()) if degree.size else 0
    out = np.empty(nodes.shape[0], dtype=np.int64)
    if nodes.size == 0:
        return out
    col = np.arange(width)
    start = offsets[nodes]
    deg = degree[nodes]
    idx = start[:, None] + np.minimum(col[None, :], np.maximum(deg[:, None] - 1, 0))
    padded = np.where(col[None, :] < deg[:, None], cumprobs[idx], np.inf)
    pos = np.sum(uniforms[:, None] >= padded, axis=1)
    pos = np.minimum(pos, deg - 1)
    out[:] = children[start + pos]
    return out

