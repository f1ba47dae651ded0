"""Exact conditional expectations on an enumerated scenario tree.

Every conditional law built from regular conditional distributions reduces
to an elementary ratio over matching paths.  Zero-probability conditioning
returns 0 (the ``0/0 := 0`` convention) and is recorded in ``flags``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import InformationState, ScenarioModel, enumerate_paths
from .table import PathTable, path_values, process_values


# ---------------------------------------------------------------- vocabulary


class ConditioningEvent:
    """Predicate over paths; combine with ``&`` (conjunction only)."""

    def mask(self, table: PathTable) -> np.ndarray:
        raise NotImplementedError

    def __and__(self, other):
        left = self.parts if isinstance(self, And) else (self,)
        right = other.parts if isinstance(other, And) else (other,)
        return And(left + right)

    def key(self):
        return (type(self).__name__,) + tuple(vars(self).values())


@dataclass(frozen=True)
class Everything(ConditioningEvent):
    def mask(self, table):
        return np.ones(table.n_paths, dtype=bool)


@dataclass(frozen=True)
class And(ConditioningEvent):
    parts: tuple

    def mask(self, table):
        m = np.ones(table.n_paths, dtype=bool)
        for p in self.parts:
            m &= p.mask(table)
        return m


@dataclass(frozen=True)
class MarksEqual(ConditioningEvent):
    """``Z_i = z_i`` for each listed index; the null mark matches never-innovated pieces."""

    indices: tuple
    marks: tuple

    def mask(self, table):
        m = np.ones(table.n_paths, dtype=bool)
        code = {mk: c for c, mk in enumerate(table.model.marks)}
        code[""] = -1  # null mark of never-innovated pieces
        for i, z in zip(self.indices, self.marks):
            piece = (i + 1) // 2
            m &= table.mark_codes[:, piece - 1] == code.get(z, -2)
        return m


@dataclass(frozen=True)
class JointEventIs(ConditioningEvent):
    """``R_I = (t_step, e)``: exactly the times indexed by ``I`` equal ``t_step``."""

    step: int
    index_set: tuple
    marks: tuple

    def mask(self, table):
        k = self.step
        times = _index_steps(table)
        at_k = times == k
        m = at_k.sum(axis=1) == len(self.index_set)
        for i in self.index_set:
            m &= at_k[:, i - 1]
        if self.index_set:
            m &= MarksEqual(self.index_set, self.marks).mask(table)
        return m


@dataclass(frozen=True)
class ActiveSetIs(ConditioningEvent):
    """``A^M_t`` (side ``right``) or ``A^M_{t-}`` (side ``left``) at grid step ``step``."""

    step: int
    active_set: tuple
    side: str = "right"

    def mask(self, table):
        k = self.step
        inn, dele = table.innov_step, table.del_step
        if self.side == "right":
            on = (inn <= k) & (k < dele)
        elif self.side == "left":
            if k < 1:
                raise ValueError("left state requires step >= 1")
            on = (inn < k) & (k <= dele)
        else:
            raise ValueError(f"unknown side {self.side!r}")
        want = np.zeros(on.shape[1], dtype=bool)
        for i in self.active_set:
            want[(i + 1) // 2 - 1] = True
        return np.all(on == want, axis=1)


@dataclass(frozen=True)
class JumpIndicator(ConditioningEvent):
    """``Delta_t = value`` where ``Delta_t`` counts joint events at ``t``."""

    step: int
    value: int

    def mask(self, table):
        jumped = (_index_steps(table) == self.step).any(axis=1)
        return jumped == bool(self.value)


def _index_steps(table: PathTable) -> np.ndarray:
    """(P, 2K) matrix of step indices of ``T_1, T_2, ..., T_{2K}``."""
    cached = getattr(table, "_index_steps", None)
    if cached is None:
        P, K = table.innov_step.shape
        cached = np.empty((P, 2 * K), dtype=np.int64)
        cached[:, 0::2] = table.innov_step
        cached[:, 1::2] = table.del_step
        table._index_steps = cached
    return cached


def state_event(step: int, state: InformationState, side: str = "right") -> ConditioningEvent:
    """``A^M_t`` together with ``Z_M = z``."""
    return ActiveSetIs(step, state.active_set, side) & MarksEqual(state.active_set, state.active_marks)


# ------------------------------------------------------------------- results


@dataclass
class ProjectionPath:
    """Per-path projection values; ``left[0]`` is NaN (no left limit at 0)."""

    values: np.ndarray
    left: np.ndarray
    states: list


@dataclass
class ZeroDenominator:
    context: str
    detail: str


# -------------------------------------------------------------------- engine


class ExactEngine:
    """Enumeration oracle for one model.

    Parameters
    ----------
    model : ScenarioModel
    paths, weights : optional
        A subset of paths with weights (visit counts for simulated samples);
        defaults to the full enumeration with path probabilities.
    """

    def __init__(self, model: ScenarioModel, paths=None, weights=None):
        self.model = model
        self.paths = enumerate_paths(model) if paths is None else list(paths)
        self.table = PathTable.from_paths(model, self.paths, weights)
        self.w = self.table.weights
        self.flags: list = []
        self._masks: dict = {}
        self._cache: dict = {}

    # -- basics
    @property
    def n_paths(self):
        return len(self.paths)

    @property
    def n_steps(self):
        return self.model.n_steps

    def values(self, xi) -> np.ndarray:
        return path_values(self.table, xi)

    def process(self, X) -> np.ndarray:
        return process_values(self.table, X)

    def path_index(self, path) -> int:
        return self.table.path_index(path)

    def mask(self, event: ConditioningEvent) -> np.ndarray:
        if isinstance(event, And):
            m = np.ones(self.n_paths, dtype=bool)
            for p in event.parts:
                m &= self.mask(p)
            return m
        key = event.key()
        m = self._masks.get(key)
        if m is None:
            m = self._masks[key] = event.mask(self.table)
        return m

    def flag(self, context, detail=""):
        self.flags.append(ZeroDenominator(context, detail))

    def probability(self, event: ConditioningEvent) -> float:
        return float(self.w[self.mask(event)].sum())

    def ratio(self, num: float, den: float, context="ratio") -> float:
        if den == 0.0:
            if num != 0.0:
                raise ArithmeticError(f"{context}: nonzero numerator over zero mass")
            self.flag(context)
            return 0.0
        return num / den

    # -- conditional expectations
    def conditional_expectation(self, xi, event: ConditioningEvent = None) -> float:
        """``E[xi | event]`` as a ratio of path sums; 0 on null events."""
        vals = self.values(xi)
        m = self.mask(event) if event is not None else np.ones(self.n_paths, dtype=bool)
        w = self.w[m]
        den = float(w.sum())
        if den == 0.0:
            self.flag("conditional_expectation", repr(event))
            return 0.0
        return _weighted_mean(w, vals[m], den)

    def E_cond(self, values: np.ndarray, mask: np.ndarray, context="E") -> float:
        """Raw-array version of ``conditional_expectation``."""
        w = self.w[mask]
        den = float(w.sum())
        if den == 0.0:
            self.flag(context)
            return 0.0
        return _weighted_mean(w, values[mask], den)

    def E_M(self, values: np.ndarray, indices, marks) -> float:
        """``E_M[.]``: expectation given ``Z_M = z`` for the listed indices."""
        return self.E_cond(values, self.mask(MarksEqual(tuple(indices), tuple(marks))), "E_M")

    def indicator(self, step, active_set, side="right") -> np.ndarray:
        return self.mask(ActiveSetIs(step, tuple(active_set), side)).astype(float)

    # -- projections
    def partition_projection(self, xi) -> np.ndarray:
        """``E[xi | G_{t_k}]`` for every path and step by grouping on the state partition."""
        vals = self.values(xi)
        out = np.empty((self.n_paths, self.n_steps + 1))
        for k in range(self.n_steps + 1):
            out[:, k] = self._group_mean(self.table.state_ids[:, k], vals, len(self.table.states))
        return out

    def _group_mean(self, ids, vals, n_groups):
        """Per-row weighted mean of ``vals`` over the row's group.

        Values are centred on a reference value first so that a constant
        passes through exactly.
        """
        ref = vals[0] if vals.size else 0.0
        num = kernels.group_sums(ids, self.w * (vals - ref), n_groups)
        den = kernels.group_sums(ids, self.w.copy(), n_groups)
        return ref + num[ids] / den[ids]

    def _ratio_value(self, vals, k, sid, side):
        """``E_M[xi I^M] / E_M[I^M]`` for the state ``sid`` seen at step ``k`` (side)."""
        st = self.table.state(sid)
        ind = self.indicator(k, st.active_set, side)
        num = self.E_M(ind * vals, st.active_set, st.active_marks)
        den = self.E_M(ind, st.active_set, st.active_marks)
        return self.ratio(num, den, "optional_projection")

    def ratio_projection(self, xi) -> tuple:
        """Right and left projections through the ratio formula.

        Returns two (P, N+1) arrays; the left array has NaN in column 0.
        """
        vals = self.values(xi)
        right = np.empty((self.n_paths, self.n_steps + 1))
        left = np.full((self.n_paths, self.n_steps + 1), np.nan)
        for k in range(self.n_steps + 1):
            ids = self.table.state_ids[:, k]
            for sid in np.unique(ids):
                right[ids == sid, k] = self._ratio_value(vals, k, sid, "right")
            if k >= 1:
                lids = self.table.state_ids[:, k - 1]
                for sid in np.unique(lids):
                    left[lids == sid, k] = self._ratio_value(vals, k, sid, "left")
        return right, left

    def optional_projection(self, xi) -> list:
        """Per-path ``ProjectionPath`` of ``E[xi | G_t]`` and ``E[xi | G_t^-]``."""
        right, left = self.ratio_projection(xi)
        return [
            ProjectionPath(right[r], left[r], [self.table.state(s) for s in self.table.state_ids[r]])
            for r in range(self.n_paths)
        ]

    def projection_process(self, X) -> list:
        """Optional projection of a process; the left value at ``t_k`` projects ``X_{t_k-}``.

        On the grid ``X_{t_k-} = X_{t_{k-1}}``.
        """
        Xv = self.process(X)
        N = self.n_steps
        right = np.empty_like(Xv)
        left = np.full_like(Xv, np.nan)
        for k in range(N + 1):
            ids = self.table.state_ids[:, k]
            for sid in np.unique(ids):
                right[ids == sid, k] = self._ratio_value(Xv[:, k], k, sid, "right")
            if k >= 1:
                lids = self.table.state_ids[:, k - 1]
                for sid in np.unique(lids):
                    left[lids == sid, k] = self._ratio_value(Xv[:, k - 1], k, sid, "left")
        return [
            ProjectionPath(right[r], left[r], [self.table.state(s) for s in self.table.state_ids[r]])
            for r in range(self.n_paths)
        ]

    def process_projection_matrix(self, X) -> np.ndarray:
        """(P, N+1) array of ``E[X_k | G_k]`` via the state partition."""
        Xv = self.process(X)
        out = np.empty_like(Xv)
        for k in range(self.n_steps + 1):
            out[:, k] = self._group_mean(self.table.state_ids[:, k], Xv[:, k], len(self.table.states))
        return out

    def history_projection(self, xi) -> np.ndarray:
        """``E[xi | F_{t_k}]``: conditioning on the full event history."""
        vals = self.values(xi)
        out = np.empty((self.n_paths, self.n_steps + 1))
        for k in range(self.n_steps + 1):
            out[:, k] = self._group_mean(self.table.node_ids[:, k], vals, len(self.table.node_keys))
        return out

    def conditional_on_steps(self, values: np.ndarray, k: int, side="right") -> np.ndarray:
        """``E[values | G_{t_k}]`` (or ``G_{t_k}^-``) per path via grouping."""
        ids = self.table.state_ids[:, k if side == "right" else k - 1]
        return self._group_mean(ids, np.asarray(values, dtype=float), len(self.table.states))

    def bounded_fraction_diagnostic(self) -> np.ndarray:
        """Per-path ``sup_t I^M_t / E_M[I^M_t]`` with the path's own ``M``."""
        out = np.zeros(self.n_paths)
        for k in range(self.n_steps + 1):
            ids = self.table.state_ids[:, k]
            for sid in np.unique(ids):
                st = self.table.state(sid)
                ind = self.indicator(k, st.active_set)
                den = self.E_M(ind, st.active_set, st.active_marks)
                val = self.ratio(1.0, den, "bounded_fraction") if den > 0 else 0.0
                rows = ids == sid
                out[rows] = np.maximum(out[rows], val)
        return out


def _weighted_mean(w, vals, den) -> float:
    ref = vals[0]
    return float(ref + np.dot(w, vals - ref) / den)


_ENGINES = weakref.WeakKeyDictionary()


def engine_for(model_or_engine) -> ExactEngine:
    """Shared engine per model object (cached weakly)."""
    if isinstance(model_or_engine, ExactEngine):
        return model_or_engine
    eng = _ENGINES.get(model_or_engine)
    if eng is None:
        eng = _ENGINES[model_or_engine] = ExactEngine(model_or_engine)
    return eng


# Thin functional wrappers mirroring the operation names.


def conditional_expectation(model, xi, event=None) -> float:
    return engine_for(model).conditional_expectation(xi, event)


def optional_projection(model, xi) -> list:
    return engine_for(model).optional_projection(xi)


def projection_process(model, X) -> list:
    return engine_for(model).projection_process(X)


def bounded_fraction_diagnostic(model) -> np.ndarray:
    return engine_for(model).bounded_fraction_diagnostic()
