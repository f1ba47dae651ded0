"""Columnar view of a set of paths, shared by the exact and Monte Carlo layers.

Rows are paths; columns ``0..N`` are grid steps.  ``weights`` are path
probabilities for the exact engine and visit counts for simulated samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NULL_MARK, InformationState, PathRecord, ScenarioModel, path_event_key

NEVER = np.iinfo(np.int64).max // 4


@dataclass
class PathTable:
    model: ScenarioModel
    paths: list
    weights: np.ndarray
    innov_step: np.ndarray  # (P, K), NEVER if not innovated
    del_step: np.ndarray  # (P, K), NEVER if not deleted
    mark_codes: np.ndarray  # (P, K), -1 for the null mark
    state_ids: np.ndarray  # (P, N+1), right state at each step
    event_ids: np.ndarray  # (P, N+1), 0 = no event, column 0 always 0
    node_ids: np.ndarray  # (P, N+1), history prefix ids
    states: list  # id -> state key ((index, mark), ...)
    events: list  # id -> (I, e); events[0] is None
    node_keys: list

    @property
    def n_paths(self):
        return len(self.paths)

    @property
    def n_steps(self):
        return self.model.n_steps

    def state(self, sid) -> InformationState:
        key = self.states[sid]
        return InformationState(tuple(i for i, _ in key), tuple(m for _, m in key))

    def left_state_ids(self, k):
        if k < 1:
            raise ValueError("left state requires k >= 1")
        return self.state_ids[:, k - 1]

    @classmethod
    def from_paths(cls, model: ScenarioModel, paths, weights=None) -> "PathTable":
        P, K, N = len(paths), model.max_pieces, model.n_steps
        if weights is None:
            weights = np.array([p.probability for p in paths], dtype=float)
        weights = np.asarray(weights, dtype=float)
        mark_index = {m: c for c, m in enumerate(model.marks)}
        innov = np.full((P, K), NEVER, dtype=np.int64)
        dele = np.full((P, K), NEVER, dtype=np.int64)
        codes = np.full((P, K), -1, dtype=np.int64)
        grid_index = {t: k for k, t in enumerate(model.grid)}
        for r, path in enumerate(paths):
            for i, (a, b) in enumerate(path.times):
                if a != np.inf:
                    innov[r, i] = grid_index[a]
                if b != np.inf:
                    dele[r, i] = grid_index[b]
                m = path.marks[i]
                if m != NULL_MARK:
                    codes[r, i] = mark_index[m]

        state_map, states = {}, []
        event_map, events = {None: 0}, [None]
        node_map, node_keys = {}, []
        state_ids = np.empty((P, N + 1), dtype=np.int64)
        event_ids = np.zeros((P, N + 1), dtype=np.int64)
        node_ids = np.empty((P, N + 1), dtype=np.int64)
        for r, path in enumerate(paths):
            for k in range(N + 1):
                active = (innov[r] <= k) & (k < dele[r])
                key = tuple((2 * i + 1, path.marks[i]) for i in np.flatnonzero(active))
                sid = state_map.get(key)
                if sid is None:
                    sid = state_map[key] = len(states)
                    states.append(key)
                state_ids[r, k] = sid
                hist = path.events[:k]
                nid = node_map.get(hist)
                if nid is None:
                    nid = node_map[hist] = len(node_keys)
                    node_keys.append(hist)
                node_ids[r, k] = nid
                if k >= 1:
                    ek = path_event_key(path, k)
                    eid = event_map.get(ek)
                    if eid is None:
                        eid = event_map[ek] = len(events)
                        events.append(ek)
                    event_ids[r, k] = eid
        return cls(model, list(paths), weights, innov, dele, codes, state_ids, event_ids,
                   node_ids, states, events, node_keys)

    def path_index(self, path) -> int:
        if isinstance(path, (int, np.integer)):
            return int(path)
        if not hasattr(self, "_index"):
            self._index = {p.events: r for r, p in enumerate(self.paths)}
        return self._index[path.events]


def path_values(table: PathTable, xi) -> np.ndarray:
    """Evaluate a path functional on every row; arrays pass through."""
    if callable(xi):
        return np.array([float(xi(p)) for p in table.paths])
    arr = np.asarray(xi, dtype=float)
    if arr.shape != (table.n_paths,):
        raise ValueError(f"expected {table.n_paths} values, got shape {arr.shape}")
    return arr


def process_values(table: PathTable, X) -> np.ndarray:
    """Evaluate a time-indexed functional ``X(path, k)`` into a (P, N+1) array."""
    N = table.n_steps
    if callable(X):
        return np.array([[float(X(p, k)) for k in range(N + 1)] for p in table.paths])
    arr = np.asarray(X, dtype=float)
    if arr.shape != (table.n_paths, N + 1):
        raise ValueError(f"expected shape {(table.n_paths, N + 1)}, got {arr.shape}")
    return arr
