"""Location prediction when measurements auto-delete after a retention limit.

Measurements are taken every ``stride`` steps; each one innovates a new
piece whose mark is the current location and is erased ``delta`` steps
later.  Movement has momentum (the chance of moving depends on whether the
previous measurement step moved), so erased measurements carry predictive
value.  The target is ``X_t = 1{Y_{t+h} in A}``, capped at the horizon.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..engine import engine_for
from ..model import Deletion, Innovation, ModelError, ScenarioModel, fmt_float
from ..representation import RepresentationResult, verify_representation_process


@dataclass(frozen=True)
class LocationSpec:
    """Retention ``delta`` and lag ``h`` in grid steps; target area ``A``."""

    delta: int
    h: int
    A: tuple

    def __post_init__(self):
        if int(self.delta) != self.delta or self.delta <= 0:
            raise ModelError("retention limit is a positive whole number of steps", detail=str(self.delta))
        if int(self.h) != self.h or self.h <= 0:
            raise ModelError("prediction lag is a positive whole number of steps", detail=str(self.h))


def location_model(n_steps=6, delta=1, locations=("L", "R"), start="L", stride=1,
                   p_move_after_move=0.75, p_move_after_stay=0.25, dt=1.0, name=None) -> ScenarioModel:
    """Random walk with momentum, measured every ``stride`` steps.

    Measurement ``j`` is piece ``j``, innovated at step ``j * stride`` and
    deleted at step ``j * stride + delta`` (if inside the grid).
    """
    if int(delta) != delta or delta <= 0:
        raise ModelError("retention limit is a positive whole number of steps", detail=str(delta))
    grid = tuple(dt * k for k in range(n_steps + 1))
    K = n_steps // stride

    def law(history):
        k = len(history) + 1
        y, moved, last_y = start, False, start
        for ev in history:
            for e in ev:
                if isinstance(e, Innovation):
                    moved = e.mark != last_y
                    last_y = y = e.mark
        ev = set()
        j_del = (k - delta) // stride if (k - delta) % stride == 0 else 0
        if j_del >= 1:
            ev.add(Deletion(j_del))
        if k % stride:
            return [(frozenset(ev), 1.0)]
        j = k // stride
        p_move = p_move_after_move if moved else p_move_after_stay
        others = [s for s in locations if s != y]
        outs = [(frozenset(ev | {Innovation(j, y)}), 1.0 - p_move)]
        outs += [(frozenset(ev | {Innovation(j, s)}), p_move / len(others)) for s in others]
        return outs

    return ScenarioModel(grid, tuple(locations), K, law, name=name or f"location-d{delta}",
                         meta={"start": start, "delta": delta, "stride": stride})


def location_path(path, start) -> list:
    """``Y_{t_k}`` for every step: last measured location, ``start`` before any."""
    ys, y = [start], start
    for ev in path.events:
        for e in ev:
            if isinstance(e, Innovation):
                y = e.mark
        ys.append(y)
    return ys


@dataclass
class LocationResult:
    predictor: np.ndarray  # P(Y_{t+h} in A | G_t), (P, N+1)
    target: np.ndarray  # X_t
    ledger: RepresentationResult
    weights: np.ndarray

    @property
    def max_residual(self) -> float:
        return self.ledger.max_residual

    def component(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.ledger.reports])

    @property
    def ib_magnitude(self) -> float:
        """Expected total absolute IB increment."""
        ib = self.component("ib_integral")
        return float(np.dot(self.weights, np.abs(np.diff(ib, axis=1)).sum(axis=1)))

    def write_csv(self, out_dir, grid):
        with open(f"{out_dir}/location_predictor.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path_id", "t", "predictor", "target", "drift", "if_integral", "ib_integral",
                         "residual"])
            for r, rep in enumerate(self.ledger.reports):
                res = rep.residual
                for k, t in enumerate(grid):
                    wr.writerow([r, fmt_float(t), fmt_float(self.predictor[r, k]), fmt_float(self.target[r, k]),
                                 fmt_float(rep.drift[k]), fmt_float(rep.if_integral[k]),
                                 fmt_float(rep.ib_integral[k]), fmt_float(res[k])])


def location_target(model, spec: LocationSpec) -> np.ndarray:
    eng = engine_for(model)
    N = eng.n_steps
    start = model.meta.get("start", model.marks[0])
    X = np.empty((eng.n_paths, N + 1))
    for r, p in enumerate(eng.paths):
        ys = location_path(p, start)
        X[r] = [1.0 if ys[min(k + spec.h, N)] in spec.A else 0.0 for k in range(N + 1)]
    return X


def location_predictor(model, spec: LocationSpec) -> LocationResult:
    """Predictor trajectory with drift, innovation and deletion components."""
    eng = engine_for(model)
    X = location_target(eng.model, spec)
    pred = eng.process_projection_matrix(X)
    ledger = verify_representation_process(eng, X, "IF")
    return LocationResult(pred, X, ledger, eng.w)


def retention_sweep(deltas, spec: LocationSpec, **model_kw) -> list:
    """``(delta, IB magnitude, max residual)`` for each retention limit."""
    out = []
    for d in deltas:
        m = location_model(delta=d, **model_kw)
        r = location_predictor(m, LocationSpec(d, spec.h, spec.A))
        out.append((d, r.ib_magnitude, r.max_residual))
    return out


def retention_nesting(model_small, model_large) -> bool:
    """Check that every short-retention state is a union of long-retention states.

    Paths of the two models are matched by their measurement sequence.
    """
    def strip(path):
        return tuple(frozenset(e for e in ev if isinstance(e, Innovation)) for ev in path.events)

    es, el = engine_for(model_small), engine_for(model_large)
    row_l = {strip(p): r for r, p in enumerate(el.paths)}
    for k in range(es.n_steps + 1):
        seen = {}
        for r, p in enumerate(es.paths):
            big = el.table.state_ids[row_l[strip(p)], k]
            small = es.table.state_ids[r, k]
            if seen.setdefault(big, small) != small:
                return False
    return True
