"""Two-sided martingale representation of projections under deletions.

For a terminal variable ``xi``::

    E[xi | G_t] - E[xi | G_0] = sum_I int G_I(u-, u, e) (mu_I - nu_I)(du, de)
                              + sum_I int G_I(u, u, e) (rho_I - mu_I)(du, de)

with ``G_I(s, u, e) = sum_M I^M_s (r1 - r2)`` where ``r1`` conditions on
``Z_{M_I}`` and ``R_I = (u, e)`` and ``r2`` on ``Z_M`` and the active set
being ``M`` on both sides of ``u`` (nothing happened).  For processes a drift
term enters and the integrand uses ``X_{u-}`` (IB drift) or ``X_u`` (IF drift).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    ActiveSetIs,
    ExactEngine,
    JointEventIs,
    JumpIndicator,
    MarksEqual,
    engine_for,
)
from .measures import candidate_events, compute_nu, compute_rho, generic_compensator, reduced_marks
from .model import MeasureAtoms, counting_measure_atoms, fmt_float

REPORT_FIELDS = ["path_id", "t", "lhs", "drift", "if_integral", "ib_integral", "residual"]


@dataclass
class RepresentationIntegrand:
    """``forward[(k, I, e)] = G_I(u-, u, e)`` and ``backward[(k, I, e)] = G_I(u, u, e)``."""

    forward: dict = field(default_factory=dict)
    backward: dict = field(default_factory=dict)


@dataclass
class RepresentationReport:
    """Per-time decomposition ledger of one path."""

    path_id: int
    times: np.ndarray
    lhs: np.ndarray
    drift: np.ndarray
    if_integral: np.ndarray
    ib_integral: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.lhs - self.drift - self.if_integral - self.ib_integral

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    def rows(self):
        res = self.residual
        for k, t in enumerate(self.times):
            yield {
                "path_id": self.path_id, "t": t, "lhs": self.lhs[k], "drift": self.drift[k],
                "if_integral": self.if_integral[k], "ib_integral": self.ib_integral[k],
                "residual": res[k],
            }


@dataclass
class RepresentationResult:
    reports: list
    integrands: list

    @property
    def max_residual(self) -> float:
        return max((r.max_residual for r in self.reports), default=0.0)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=REPORT_FIELDS)
            wr.writeheader()
            for rep in self.reports:
                for row in rep.rows():
                    wr.writerow({k: (fmt_float(v) if isinstance(v, float) else v) for k, v in row.items()})


# --------------------------------------------------------------- integrands


class _IntegrandBuilder:
    """Integrand values per (step, state, event), shared across paths.

    ``xi_cols[:, k]`` is the variable represented over step ``k``.
    ``route='literal'`` uses the factorized conditioning; ``'interpretation'``
    conditions on the observed state together with the change or remain
    scenario.
    """

    def __init__(self, eng: ExactEngine, xi_cols: np.ndarray, route: str = "literal"):
        if route not in ("literal", "interpretation"):
            raise ValueError(f"unknown route {route!r}")
        self.eng = eng
        self.xi = xi_cols
        self.route = route
        self._cache = {}

    def _literal_change(self, k, sid, eid, side):
        eng = self.eng
        st = eng.table.state(sid)
        I, e = eng.table.events[eid]
        MI, zMI = reduced_marks(st.key, I)
        # E[I xi | .] / E[I | .] for a 0/1 indicator I is the mean over {I = 1}
        given = eng.mask(MarksEqual(MI, zMI) & JointEventIs(k, I, e) & ActiveSetIs(k, st.active_set, side))
        return eng.E_cond(self.xi[:, k], given, "integrand change")

    def _literal_remain(self, k, sid):
        eng = self.eng
        st = eng.table.state(sid)
        M = st.active_set
        given = eng.mask(MarksEqual(M, st.active_marks) & ActiveSetIs(k, M, "left") & ActiveSetIs(k, M, "right"))
        return eng.E_cond(self.xi[:, k], given, "integrand remain")

    def _observed(self, k, sid, side):
        st = self.eng.table.state(sid)
        return ActiveSetIs(k, st.active_set, side) & MarksEqual(st.active_set, st.active_marks)

    def _interp_change(self, k, sid, eid, side):
        I, e = self.eng.table.events[eid]
        given = self.eng.mask(self._observed(k, sid, side) & JointEventIs(k, I, e))
        return self.eng.E_cond(self.xi[:, k], given, "interpretation change")

    def _interp_remain(self, k, sid, side):
        given = self.eng.mask(self._observed(k, sid, side) & JumpIndicator(k, 0))
        return self.eng.E_cond(self.xi[:, k], given, "interpretation remain")

    def value(self, k, sid, eid, side) -> float:
        key = (k, sid, eid, side)
        v = self._cache.get(key)
        if v is None:
            if self.route == "literal":
                rem = self._cache.get(("remain", k, sid, side))
                if rem is None:
                    rem = self._cache[("remain", k, sid, side)] = self._literal_remain(k, sid)
                v = self._literal_change(k, sid, eid, side) - rem
            else:
                v = self._interp_change(k, sid, eid, side) - self._interp_remain(k, sid, side)
            self._cache[key] = v
        return v

    def path_integrand(self, r: int) -> RepresentationIntegrand:
        t = self.eng.table
        out = RepresentationIntegrand()
        for k in range(1, self.eng.n_steps + 1):
            sl = int(t.state_ids[r, k - 1])
            for eid in candidate_events(self.eng, k, sl, "left"):
                I, e = t.events[eid]
                out.forward[(k, I, e)] = self.value(k, sl, eid, "left")
            sr = int(t.state_ids[r, k])
            for eid in candidate_events(self.eng, k, sr, "right"):
                I, e = t.events[eid]
                out.backward[(k, I, e)] = self.value(k, sr, eid, "right")
        return out


def _xi_columns(eng: ExactEngine, xi) -> np.ndarray:
    vals = eng.values(xi)
    return np.repeat(vals[:, None], eng.n_steps + 1, axis=1)


def integrand_xi(model, path, xi) -> RepresentationIntegrand:
    """Representation integrand of ``xi`` along ``path`` (factorized conditioning)."""
    eng = engine_for(model)
    return _IntegrandBuilder(eng, _xi_columns(eng, xi), "literal").path_integrand(eng.path_index(path))


def integrand_interpretation(model, path, X, step_variable=None) -> RepresentationIntegrand:
    """Change-scenario minus remain-scenario form of the integrand.

    ``G_I(t-, t, e) = E[X_{t-} | G_{t-}, R_I = (t, e)] - E[X_{t-} | G_{t-}, Delta_t = 0]``
    and likewise with ``G_t``.  ``X`` is either a terminal variable or, with
    ``step_variable`` given as a (P, N+1) array, the per-step variable.
    """
    eng = engine_for(model)
    cols = _xi_columns(eng, X) if step_variable is None else np.asarray(step_variable, float)
    return _IntegrandBuilder(eng, cols, "interpretation").path_integrand(eng.path_index(path))


def stochastic_integral(integrand: dict, plus: MeasureAtoms, minus: MeasureAtoms, t_step: int) -> float:
    """``sum over atoms in (0, t] of value * (plus mass - minus mass)``.

    Raises
    ------
    KeyError
        If an atom of either measure has no integrand value.
    """
    diff = {}
    for a in plus:
        if 1 <= a.step <= t_step:
            diff[a.key] = diff.get(a.key, 0.0) + a.mass
    for a in minus:
        if 1 <= a.step <= t_step:
            diff[a.key] = diff.get(a.key, 0.0) - a.mass
    total = 0.0
    for key in sorted(diff):
        if key not in integrand:
            raise KeyError(f"integrand undefined at atom {key}")
        total += integrand[key] * diff[key]
    return total


# ------------------------------------------------------------ verification


def decompose_steps(model, xi_cols, lhs, drift, route="literal") -> RepresentationResult:
    """Ledger of ``lhs = drift + IF-integral + IB-integral`` on every path.

    ``xi_cols[:, k]`` is represented over step ``k``; ``lhs`` and ``drift``
    are cumulative (P, N+1) arrays starting at 0.
    """
    eng = engine_for(model)
    builder = _IntegrandBuilder(eng, np.asarray(xi_cols, float), route)
    grid = np.asarray(eng.model.grid)
    N = eng.n_steps
    reports, integrands = [], []
    for r in range(eng.n_paths):
        nu = compute_nu(eng, r)
        rho = compute_rho(eng, r)
        mu = counting_measure_atoms(eng.paths[r])
        g = builder.path_integrand(r)
        fi = np.array([stochastic_integral(g.forward, mu, nu, k) for k in range(N + 1)])
        bi = np.array([stochastic_integral(g.backward, rho, mu, k) for k in range(N + 1)])
        reports.append(RepresentationReport(r, grid, lhs[r], drift[r], fi, bi))
        integrands.append(g)
    return RepresentationResult(reports, integrands)


def verify_representation_xi(model, xi, route="literal") -> RepresentationResult:
    """Decompose ``E[xi | G_t] - E[xi | G_0]`` along every path."""
    eng = engine_for(model)
    proj = eng.partition_projection(xi)
    lhs = proj - proj[:, :1]
    return decompose_steps(eng, _xi_columns(eng, xi), lhs, np.zeros_like(lhs), route)


def verify_representation_process(model, X, drift_side="IB", drift=None, route="literal") -> RepresentationResult:
    """Decompose the optional projection of ``X`` with an IB or IF drift.

    Parameters
    ----------
    X : callable ``X(path, k)`` or (P, N+1) array
    drift_side : {'IB', 'IF'}
    drift : (P, N+1) array, optional
        Cumulative compensator; computed from conditional increments when
        omitted.
    """
    eng = engine_for(model)
    Xv = eng.process(X)
    if drift_side not in ("IB", "IF"):
        raise ValueError(f"drift_side must be 'IB' or 'IF', got {drift_side!r}")
    if drift is None:
        drift = generic_compensator(eng, Xv, drift_side)
    drift = np.asarray(drift, dtype=float)
    if drift.shape != Xv.shape:
        raise ValueError(f"drift has shape {drift.shape}, expected {Xv.shape}")
    if not np.all(np.isfinite(drift)):
        raise ValueError("drift is not finite")
    drift = drift - drift[:, :1]
    proj = eng.process_projection_matrix(Xv)
    lhs = proj - proj[:, :1]
    cols = np.empty_like(Xv)
    if drift_side == "IB":
        cols[:, 1:] = Xv[:, :-1]
        cols[:, 0] = Xv[:, 0]
    else:
        cols[:] = Xv
    return decompose_steps(eng, cols, lhs, drift, route)


@dataclass
class TelescopingRow:
    active_set: tuple
    marks: tuple
    step: int
    lhs: float
    rhs: float

    @property
    def diff(self):
        return abs(self.lhs - self.rhs)


def lemma_telescoping_check(model, xi) -> list:
    """``E_M[I^M_t xi] - E_M[I^M_0 xi]`` against its jump-by-jump expansion.

    The right side is ``sum_I sum_{u <= t, e} E_{M,R_I=(u,e)}[(I^M_u - I^M_{u-}) xi]
    P_M^{R_I}({(u, e)})``.  One row per observed ``(M, z)`` and step.
    """
    eng = engine_for(model)
    vals = eng.values(xi)
    t = eng.table
    rows = []
    for sid, key in enumerate(t.states):
        M = tuple(i for i, _ in key)
        z = tuple(m for _, m in key)
        given_M = eng.mask(MarksEqual(M, z))
        base = eng.E_cond(eng.indicator(0, M) * vals, given_M, "telescoping")
        acc = 0.0
        for k in range(eng.n_steps + 1):
            if k >= 1:
                jump = (eng.indicator(k, M, "right") - eng.indicator(k, M, "left")) * vals
                for eid in range(1, len(t.events)):
                    if not (t.event_ids[:, k] == eid).any():
                        continue
                    I, e = t.events[eid]
                    MI, zMI = reduced_marks(key, I)
                    given_r = eng.mask(MarksEqual(MI, zMI) & JointEventIs(k, I, e))
                    p_r = eng.E_cond(eng.mask(JointEventIs(k, I, e)).astype(float), given_M, "telescoping")
                    if p_r == 0.0:
                        continue
                    acc += eng.E_cond(jump, given_r, "telescoping") * p_r
            lhs = eng.E_cond(eng.indicator(k, M) * vals, given_M, "telescoping") - base
            rows.append(TelescopingRow(M, z, k, lhs, acc))
    return rows
