"""Infinitesimal forward/backward compensators and their integrands.

All measures live on the grid, so each one is a finite atom list per path.
The forward compensator ``nu`` at ``(u, I, e)`` is

    I^M_{u-} P_{M,R_I=(u,e)}(A^M_{u-}) / P_M(A^M_{u-}) P_M^{R_I}({(u,e)})

with ``M`` the path's active set just before ``u``; the backward compensator
``rho`` is the same expression with ``u`` in place of ``u-``.  Conditioning on
``R_I`` uses the reduced index set ``M_I = M \\ (I u (I-1))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .engine import ExactEngine, JointEventIs, MarksEqual, engine_for
from .model import (
    Atom,
    Innovation,
    MeasureAtoms,
    ModelError,
    counting_measure_atoms,
)

__all__ = [
    "MeasureAtoms",
    "IntegrandTable",
    "TimeMeasure",
    "compute_mu",
    "compute_nu",
    "compute_rho",
    "compute_lambda",
    "if_ib_compensate",
    "sojourn_compensator",
    "generic_compensator",
    "write_atoms_csv",
]


def reduced_marks(state_key, I):
    """``(M_I, z_{M_I})``: drop pieces innovated or deleted inside ``I``."""
    drop = set(I) | {i - 1 for i in I}
    kept = [(i, m) for i, m in state_key if i not in drop]
    return tuple(i for i, _ in kept), tuple(m for _, m in kept)


def candidate_events(eng: ExactEngine, k: int, sid: int, side: str) -> list:
    """Event ids at step ``k`` seen on positive-weight paths sharing the state."""
    t = eng.table
    col = t.state_ids[:, k - 1] if side == "left" else t.state_ids[:, k]
    rows = (col == sid) & (eng.w > 0)
    ids = np.unique(t.event_ids[rows, k])
    return [int(e) for e in ids if e != 0]


def _compensator_mass(eng: ExactEngine, k: int, sid: int, eid: int, side: str) -> float:
    key = ("mass", side, k, sid, eid)
    hit = eng._cache.get(key)
    if hit is not None:
        return hit
    t = eng.table
    st = t.state(sid)
    I, e = t.events[eid]
    ind = eng.indicator(k, st.active_set, side)
    MI, zMI = reduced_marks(st.key, I)
    given_r = eng.mask(MarksEqual(MI, zMI) & JointEventIs(k, I, e))
    given_M = eng.mask(MarksEqual(st.active_set, st.active_marks))
    p_cond = eng.E_cond(ind, given_r, f"P_M,R_I(A) {side}")
    # P_M^{R_I}({r}) / P_M(A) share the normaliser P(Z_M = z); cancel it so
    # that identical events give a ratio of exactly one.
    w = eng.w
    r_mass = float(w[given_M & eng.mask(JointEventIs(k, I, e))].sum())
    a_mass = float(w[given_M & (ind > 0)].sum())
    mass = p_cond * eng.ratio(r_mass, a_mass, f"compensator {side}")
    eng._cache[key] = mass
    return mass


def _compensator_atoms(model, path, side: str, kind: str) -> MeasureAtoms:
    eng = engine_for(model)
    r = eng.path_index(path)
    t = eng.table
    atoms = []
    n_flags = len(eng.flags)
    for k in range(1, eng.n_steps + 1):
        sid = int(t.state_ids[r, k - 1] if side == "left" else t.state_ids[r, k])
        for eid in candidate_events(eng, k, sid, side):
            m = _compensator_mass(eng, k, sid, eid, side)
            if m > 0.0:
                I, e = t.events[eid]
                atoms.append(Atom(eng.model.grid[k], I, e, m, k))
    flags = tuple(f.context for f in eng.flags[n_flags:])
    return MeasureAtoms(kind, tuple(atoms), flags)


def compute_mu(model, path) -> MeasureAtoms:
    eng = engine_for(model)
    return counting_measure_atoms(eng.paths[eng.path_index(path)])


def compute_nu(model, path) -> MeasureAtoms:
    """Infinitesimal forward compensator atoms along one path."""
    return _compensator_atoms(model, path, "left", "nu")


def compute_rho(model, path) -> MeasureAtoms:
    """Infinitesimal backward compensator atoms along one path."""
    return _compensator_atoms(model, path, "right", "rho")


def compute_lambda(model, path) -> MeasureAtoms:
    """Classical compensator: one-step probabilities given the full history.

    Read straight from the transition law at each node the path visits.
    """
    eng = engine_for(model)
    p = eng.paths[eng.path_index(path)]
    atoms = []
    marks = {}
    for k in range(1, eng.n_steps + 1):
        history = p.events[: k - 1]
        for ev, prob in eng.model.outcomes(history):
            if prob <= 0.0 or not ev:
                continue
            idx, mk = [], []
            for el in sorted(ev, key=lambda x: x.index):
                idx.append(el.index)
                mk.append(el.mark if isinstance(el, Innovation) else marks[el.piece])
            atoms.append(Atom(eng.model.grid[k], tuple(idx), tuple(mk), prob, k))
        for el in p.events[k - 1]:
            if isinstance(el, Innovation):
                marks[el.piece] = el.mark
    return MeasureAtoms("lambda", tuple(atoms))


# ------------------------------------------- compensators of jump processes


@dataclass
class IntegrandTable:
    """Values keyed by ``(step, I, e)``; ``side`` is ``forward`` or ``backward``."""

    values: dict
    side: str = "forward"

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def __contains__(self, key):
        return key in self.values

    def __len__(self):
        return len(self.values)


def _field_values(eng: ExactEngine, F, k, I, e) -> np.ndarray:
    """Values of the integrand field ``F_I(u, e)`` on every path."""
    if isinstance(F, IntegrandTable):
        key = (k, I, e)
        if key not in F.values:
            raise KeyError(f"integrand missing key {key}")
        return np.full(eng.n_paths, float(F.values[key]))
    return np.array([float(F(p, k, I, e)) for p in eng.paths])


def _integrand_ratio(eng, F, k, sid, eid, side):
    t = eng.table
    st = t.state(sid)
    I, e = t.events[eid]
    ind = eng.indicator(k, st.active_set, side)
    MI, zMI = reduced_marks(st.key, I)
    given_r = eng.mask(MarksEqual(MI, zMI) & JointEventIs(k, I, e))
    vals = _field_values(eng, F, k, I, e)
    num = eng.E_cond(ind * vals, given_r, "integrand")
    den = eng.E_cond(ind, given_r, "integrand")
    return eng.ratio(num, den, f"integrand {side}")


@dataclass
class CompensatedPair:
    """``G`` with ``nu`` (forward) and ``H`` with ``rho`` (backward) along one path."""

    nu: MeasureAtoms
    G: IntegrandTable
    rho: MeasureAtoms
    H: IntegrandTable
    mu: MeasureAtoms
    F_mu: dict

    def forward_atoms(self) -> MeasureAtoms:
        """Atoms of ``G . nu`` (zero masses dropped)."""
        return _product_atoms(self.G, self.nu)

    def backward_atoms(self) -> MeasureAtoms:
        """Atoms of ``H . rho`` (zero masses dropped)."""
        return _product_atoms(self.H, self.rho)


def _product_atoms(values, measure) -> MeasureAtoms:
    atoms = []
    for a in measure:
        m = values[a.key] * a.mass
        if m != 0.0:
            atoms.append(Atom(a.time, a.index_set, a.marks, m, a.step))
    return MeasureAtoms("generic", tuple(atoms))


def _check_field_keys(eng, F):
    if not isinstance(F, IntegrandTable):
        return
    for eid, ev in enumerate(eng.table.events):
        if ev is None:
            continue
        for k in np.flatnonzero((eng.table.event_ids == eid).any(axis=0)):
            key = (int(k), ev[0], ev[1])
            if key not in F.values:
                raise KeyError(f"integrand missing key {key}")


def if_ib_compensate(model, path, F) -> CompensatedPair:
    """IF- and IB-compensators of the jump process ``sum_I F_I . mu_I``.

    ``F`` is an ``IntegrandTable`` (deterministic field) or a callable
    ``F(path, step, I, e)`` (random field).  The forward integrand is
    ``G_I(u,e) = E_{M,R_I=(u,e)}[I^M_{u-} F] / E_{M,R_I=(u,e)}[I^M_{u-}]`` on
    the path's ``M`` at ``u-``; the backward ``H`` uses ``u``.
    """
    eng = engine_for(model)
    _check_field_keys(eng, F)
    r = eng.path_index(path)
    p = eng.paths[r]
    nu = compute_nu(eng, r)
    rho = compute_rho(eng, r)
    mu = counting_measure_atoms(p)
    t = eng.table
    G, H = {}, {}
    eid_of = {ev: i for i, ev in enumerate(t.events)}
    for a in nu:
        sid = int(t.state_ids[r, a.step - 1])
        G[a.key] = _integrand_ratio(eng, F, a.step, sid, eid_of[(a.index_set, a.marks)], "left")
    for a in rho:
        sid = int(t.state_ids[r, a.step])
        H[a.key] = _integrand_ratio(eng, F, a.step, sid, eid_of[(a.index_set, a.marks)], "right")
    F_mu = {}
    for a in mu:
        vals = _field_values(eng, F, a.step, a.index_set, a.marks)
        F_mu[a.key] = float(vals[r])
    return CompensatedPair(nu, IntegrandTable(G, "forward"), rho, IntegrandTable(H, "backward"), mu, F_mu)


# ------------------------------------------------------- sojourn payments


@dataclass(frozen=True)
class TimeMeasure:
    """Lebesgue measure on the grid (optional) plus Dirac masses at grid steps."""

    lebesgue: bool = True
    diracs: tuple = ()  # ((time, mass), ...)

    def weights(self, grid) -> np.ndarray:
        """Mass attached to each grid step: ``(t_{k-1}, t_k]`` length plus Diracs at ``t_k``."""
        w = np.zeros(len(grid))
        if self.lebesgue:
            w[1:] = np.diff(np.asarray(grid, dtype=float))
        for t, m in self.diracs:
            if t not in grid:
                raise ModelError("Dirac times lie on the grid", detail=f"t = {t}")
            w[list(grid).index(t)] += float(m)
        return w


@dataclass
class SojournLedger:
    """Sojourn process in its two grid forms with their compensators.

    ``X_ib`` accumulates ``h`` at the state after each step; ``X_if`` at the
    state before it.  ``drift_ib`` and ``drift_if`` are the compensators, all
    arrays of shape (P, N+1) with cumulative values.
    """

    X_ib: np.ndarray
    drift_ib: np.ndarray
    X_if: np.ndarray
    drift_if: np.ndarray
    weights: np.ndarray

    def for_path(self, r):
        return {
            "X_ib": self.X_ib[r], "drift_ib": self.drift_ib[r],
            "X_if": self.X_if[r], "drift_if": self.drift_if[r],
        }


def sojourn_compensator(model, h, gamma: TimeMeasure = TimeMeasure()) -> SojournLedger:
    """Compensators of ``X_t = sum_M int I^M_s h(M, s) gamma(ds)``.

    ``h(path, M, k)`` returns the payment rate when the active index tuple is
    ``M`` at grid step ``k``.  The IB drift is ``sum E[h(M_s, s) | G_s] gamma``
    and the IF drift ``sum E[h(M_{s-}, s) | G_{s-}] gamma``.
    """
    eng = engine_for(model)
    t = eng.table
    N = eng.n_steps
    w = gamma.weights(eng.model.grid)
    P = eng.n_paths
    h_right = np.empty((P, N + 1))
    h_left = np.zeros((P, N + 1))
    for r, p in enumerate(eng.paths):
        for k in range(N + 1):
            M = t.states[t.state_ids[r, k]]
            h_right[r, k] = h(p, tuple(i for i, _ in M), k)
            if k >= 1:
                Ml = t.states[t.state_ids[r, k - 1]]
                h_left[r, k] = h(p, tuple(i for i, _ in Ml), k)
    inc_ib = h_right * w
    inc_if = h_left * w
    inc_if[:, 0] = inc_ib[:, 0]
    drift_ib = np.zeros((P, N + 1))
    drift_if = np.zeros((P, N + 1))
    for k in range(1, N + 1):
        drift_ib[:, k] = eng.conditional_on_steps(h_right[:, k], k, "right") * w[k]
        drift_if[:, k] = eng.conditional_on_steps(h_left[:, k], k, "left") * w[k]
    X_ib = np.cumsum(inc_ib, axis=1)
    X_if = np.cumsum(inc_if, axis=1)
    return SojournLedger(X_ib, np.cumsum(drift_ib, axis=1), X_if, np.cumsum(drift_if, axis=1), w)


def generic_compensator(model, X, side: str) -> np.ndarray:
    """Grid compensator of a process: cumulative ``E[dX_k | G_k]`` (IB) or ``E[dX_k | G_{k-1}]`` (IF)."""
    eng = engine_for(model)
    Xv = eng.process(X)
    out = np.zeros_like(Xv)
    for k in range(1, eng.n_steps + 1):
        dX = Xv[:, k] - Xv[:, k - 1]
        if side in ("IB", "backward"):
            out[:, k] = eng.conditional_on_steps(dX, k, "right")
        elif side in ("IF", "forward"):
            out[:, k] = eng.conditional_on_steps(dX, k, "left")
        else:
            raise ValueError(f"unknown side {side!r}")
    return np.cumsum(out, axis=1)


def write_atoms_csv(path, measures):
    """Write atom lists with columns time, index_set, marks, mass, kind (plus path_id)."""
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["path_id", "time", "index_set", "marks", "mass", "kind"])
        wr.writeheader()
        for pid, m in measures:
            for row in m.rows():
                wr.writerow({"path_id": pid, **row})
