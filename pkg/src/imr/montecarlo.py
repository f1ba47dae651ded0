"""Seeded simulation, empirical projections and partition-sum diagnostics.

Random numbers come from counter-based Philox streams.  Paths are processed
in fixed-size chunks and chunk ``c`` uses the stream keyed by ``seed`` with
counter block ``c``, so the uniforms of path ``p`` depend only on
``(seed, p)`` and never on how the work is split.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .engine import ExactEngine, engine_for
from .model import ScenarioModel, _advance, _make_path, _NodeState, _validate_outcomes, fmt_float
from .table import PathTable, path_values

CHUNK = 1024


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    n_paths: int
    targets: tuple = ()
    chunk_size: int = CHUNK

    def __post_init__(self):
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be at least 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def path_uniforms(seed: int, n_paths: int, n_steps: int, chunk_size: int = CHUNK) -> np.ndarray:
    """(n_paths, n_steps) uniforms; row ``p`` is a function of ``(seed, p)`` only."""
    out = np.empty((n_paths, n_steps))
    for c, start in enumerate(range(0, n_paths, chunk_size)):
        stop = min(start + chunk_size, n_paths)
        gen = np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, c, 0]))
        out[start:stop] = gen.random((stop - start, n_steps))
    return out


class PathSample(Sequence):
    """Simulated paths stored as distinct leaves with visit counts.

    Indexing returns the ``PathRecord`` of the ``i``-th simulated path.
    """

    def __init__(self, model, leaves, counts, leaf_of_path, config):
        self.model = model
        self.leaves = leaves
        self.counts = counts
        self.leaf_of_path = leaf_of_path
        self.config = config

    def __len__(self):
        return len(self.leaf_of_path)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self.leaves[j] for j in self.leaf_of_path[i]]
        return self.leaves[self.leaf_of_path[i]]

    def frequencies(self) -> dict:
        n = len(self)
        return {leaf.events: c / n for leaf, c in zip(self.leaves, self.counts)}

    def engine(self) -> ExactEngine:
        """Engine over the empirical law (weights are visit counts)."""
        eng = getattr(self, "_engine", None)
        if eng is None:
            eng = self._engine = ExactEngine(self.model, self.leaves, weights=self.counts)
        return eng


def simulate_paths(model: ScenarioModel, config: SimulationConfig) -> PathSample:
    """I.i.d. draws from the tree law, expanding only visited nodes."""
    N = model.n_steps
    n = int(config.n_paths)
    U = path_uniforms(config.seed, n, N, config.chunk_size)
    histories = [()]
    states = [_NodeState({}, {})]
    current = np.zeros(n, dtype=np.int64)
    for k in range(N):
        level_nodes, local = np.unique(current, return_inverse=True)
        offsets = [0]
        cum, children = [], []
        for node in level_nodes:
            h, st = histories[node], states[node]
            outs = model.outcomes(h)
            _validate_outcomes(model, h, outs, st)
            outs = [(ev, p) for ev, p in outs if p > 0.0]
            acc = 0.0
            for j, (ev, p) in enumerate(outs):
                acc += p
                cum.append(1.0 if j == len(outs) - 1 else acc)
                children.append(len(histories))
                histories.append(h + (ev,))
                states.append(_advance(st, ev, k + 1))
            offsets.append(len(cum))
        current = kernels.sample_children(
            local.astype(np.int64), U[:, k].copy(), np.asarray(offsets, dtype=np.int64),
            np.asarray(cum, dtype=float), np.asarray(children, dtype=np.int64),
        )
    leaf_ids, leaf_of_path, counts = np.unique(current, return_inverse=True, return_counts=True)
    leaves = [_make_path(model, histories[i], float(c) / n) for i, c in zip(leaf_ids, counts)]
    return PathSample(model, leaves, counts.astype(float), leaf_of_path.astype(np.int64), config)


# ---------------------------------------------------------------- estimates


@dataclass
class EstimateRow:
    step: int
    t: float
    state_key: tuple
    estimate: float
    stderr: float
    n_cell: int

    @property
    def absent(self):
        return self.n_cell == 0


def state_label(key) -> str:
    return "{" + ",".join(f"{i}:{m}" for i, m in key) + "}"


def estimate_projection(model, config: SimulationConfig, xi, sample: PathSample = None,
                        known_states=None) -> list:
    """Empirical ratio estimates of ``E[xi | G_t]`` per ``(t, state)``.

    ``known_states`` maps a step to state keys that should be reported even
    if unvisited; those rows carry ``n_cell = 0`` and a NaN estimate.
    """
    if sample is None:
        sample = simulate_paths(model, config)
    eng = sample.engine()
    t = eng.table
    vals = path_values(t, xi)
    ref = vals[0]  # centring keeps constants exact
    S = len(t.states)
    rows = []
    for k in range(model.n_steps + 1):
        ids = t.state_ids[:, k]
        count, mean, ss = kernels.group_moments(ids, vals - ref, eng.w, S)
        mean = mean + ref
        seen = set()
        for sid in np.flatnonzero(count > 0):
            n = int(round(count[sid]))
            var = ss[sid] / (n - 1) if n > 1 else 0.0
            rows.append(EstimateRow(k, model.grid[k], t.states[sid], float(mean[sid]),
                                    math.sqrt(var / n), n))
            seen.add(t.states[sid])
        for key in (known_states or {}).get(k, ()):
            if key not in seen:
                rows.append(EstimateRow(k, model.grid[k], key, float("nan"), float("nan"), 0))
    return rows


def exact_states(model) -> dict:
    eng = engine_for(model)
    return {k: sorted({eng.table.states[s] for s in eng.table.state_ids[:, k]})
            for k in range(model.n_steps + 1)}


def write_estimates_csv(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "state_key", "estimate", "stderr", "n_cell", "status"])
        for r in rows:
            if r.absent:
                wr.writerow([fmt_float(r.t), state_label(r.state_key), "", "", 0, "absent"])
            else:
                wr.writerow([fmt_float(r.t), state_label(r.state_key), fmt_float(r.estimate), fmt_float(r.stderr),
                             r.n_cell, "visited"])


# -------------------------------------------------------------- diagnostics


@dataclass
class LevelSum:
    level: int
    partition: tuple  # grid steps
    mesh: float
    sums: np.ndarray  # per path, cumulative to the final partition point


@dataclass
class RefinementDiagnostic:
    side: str
    levels: list = field(default_factory=list)

    @property
    def finest(self) -> LevelSum:
        return self.levels[-1]

    def rows(self, weights):
        w = np.asarray(weights, float) / np.sum(weights)
        for lv in self.levels:
            yield {"side": self.side, "level": lv.level, "mesh": lv.mesh,
                   "sum": float(np.dot(w, lv.sums)), "max_abs": float(np.max(np.abs(lv.sums)))}


def dyadic_partitions(n_steps: int, levels: int) -> list:
    """Nested partitions; level ``l`` keeps every ``2**(levels-l)``-th step plus the endpoint."""
    cap = max(1, math.ceil(math.log2(n_steps)) + 1) if n_steps > 1 else 1
    if levels > cap:
        warnings.warn(f"levels capped at {cap} for a grid of {n_steps} steps", stacklevel=3)
        levels = cap
    if levels < 1:
        raise ValueError("levels must be at least 1")
    parts = []
    for lv in range(1, levels + 1):
        stride = 2 ** (levels - lv)
        pts = list(range(0, n_steps + 1, stride))
        if pts[-1] != n_steps:
            pts.append(n_steps)
        parts.append(tuple(pts))
    return parts


def partition_sum_diagnostic(model, process, side: str, levels: int, upto: int = None) -> RefinementDiagnostic:
    """Sums of conditional increments over nested partitions.

    ``model`` may be a model, an exact engine or a ``PathSample`` engine;
    ``process`` is a (P, N+1) array on that engine's rows.  Forward sums
    condition at left endpoints, backward sums at right endpoints.  With
    ``upto`` the partitions cover ``[0, t_upto]`` only.
    """
    if side not in ("forward", "backward"):
        raise ValueError(f"side must be 'forward' or 'backward', got {side!r}")
    eng = model.engine() if isinstance(model, PathSample) else engine_for(model)
    X = eng.process(process)
    N = eng.n_steps if upto is None else int(upto)
    grid = eng.model.grid
    diag = RefinementDiagnostic(side)
    for lv, pts in enumerate(dyadic_partitions(N, levels), start=1):
        total = np.zeros(eng.n_paths)
        for a, b in zip(pts, pts[1:]):
            inc = X[:, b] - X[:, a]
            if side == "forward":
                total += eng.conditional_on_steps(inc, a, "right")
            else:
                total += eng.conditional_on_steps(inc, b, "right")
        mesh = max((grid[b] - grid[a] for a, b in zip(pts, pts[1:])), default=0.0)
        diag.levels.append(LevelSum(lv, pts, mesh, total))
    return diag


def write_diagnostics_csv(path, diagnostics, weights):
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["side", "level", "mesh", "sum", "max_abs"])
        wr.writeheader()
        for d in diagnostics:
            for row in d.rows(weights):
                wr.writerow({k: (fmt_float(v) if isinstance(v, float) else v) for k, v in row.items()})
