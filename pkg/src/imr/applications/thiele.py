"""Prospective reserves when health records are erased.

Piece 1 is the death time; its mark encodes the death step, so the death
time stays observable forever.  Pieces 2, 3, ... are health records: each
carries the measured health state and the step it was taken, and is erased
a fixed number of steps later.  Death hazards depend on the true (latest
measured) health state, so deleting a record loses information about future
payments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from ..engine import engine_for
from ..measures import generic_compensator
from ..model import Deletion, Innovation, ModelError, ScenarioModel, fmt_float
from ..representation import RepresentationResult, decompose_steps

Rate = Union[float, Callable[[float], float]]


def _fn(x: Rate) -> Callable[[float], float]:
    return x if callable(x) else (lambda t, c=float(x): c)


@dataclass(frozen=True)
class InsuranceContract:
    """Survival rate ``a``, death benefit ``b``, interest intensity ``phi``, term ``T``."""

    a: Rate = 0.0
    b: Rate = 0.0
    phi: Rate = 0.0
    T: float = None


def death_mark(k: int) -> str:
    return f"d{k}"


def health_mark(state: str, k: int) -> str:
    return f"{state}@{k}"


def thiele_model(grid, hazard=None, check_prob=0.5, health_states=("g", "p"),
                 switch_prob=0.4, retention=2, initial="g", name="thiele") -> ScenarioModel:
    """Insured life with health checks that are deleted after ``retention`` steps.

    Parameters
    ----------
    grid : sequence of float
    hazard : dict, optional
        Death probability per step for each health state.
    check_prob : float
        Probability of a health check at a step (0 disables health pieces).
    switch_prob : float
        Probability that a check finds the other health state.
    retention : int or None
        Steps a health record stays; ``None`` keeps records forever.
    """
    grid = tuple(float(t) for t in grid)
    N = len(grid) - 1
    hazard = hazard or {"g": 0.05, "p": 0.25}
    others = {s: [o for o in health_states if o != s] for s in health_states}
    n_health = N if check_prob > 0 else 0
    K = 1 + n_health

    def law(history):
        k = len(history) + 1
        dead = False
        health = initial
        records = []  # (piece, step)
        deleted = set()
        for j, ev in enumerate(history, start=1):
            for e in ev:
                if isinstance(e, Innovation):
                    if e.piece == 1:
                        dead = True
                    else:
                        health = e.mark.split("@")[0]
                        records.append((e.piece, j))
                else:
                    deleted.add(e.piece)
        expire = frozenset(
            Deletion(p) for p, j in records
            if retention is not None and j + retention == k and p not in deleted
        )
        if dead:
            return [(expire, 1.0)]
        q = hazard[health]
        nxt = 2 + len(records)
        outs = [(expire | {Innovation(1, death_mark(k))}, q)]
        rest = 1.0 - q
        if check_prob > 0 and nxt <= K:
            stay = rest * check_prob * (1 - switch_prob)
            outs.append((expire | {Innovation(nxt, health_mark(health, k))}, stay))
            each = rest * check_prob * switch_prob / len(others[health])
            for o in others[health]:
                outs.append((expire | {Innovation(nxt, health_mark(o, k))}, each))
        outs.append((expire, 0.0))
        total = sum(p for _, p in outs[:-1])
        outs[-1] = (expire, 1.0 - total)
        return [(ev, p) for ev, p in outs if p > 0]

    marks = [death_mark(k) for k in range(1, N + 1)]
    if check_prob > 0:
        marks += [health_mark(s, k) for k in range(1, N + 1) for s in health_states]
    return ScenarioModel(grid, tuple(marks), K, law, name=name,
                         meta={"retention": retention, "initial": initial})


def death_step(path):
    s = path.innovation_step(1)
    return None if s is None else s


def _trapezoid(f, a, b):
    return 0.5 * (f(a) + f(b)) * (b - a)


@dataclass
class ThieleResult:
    reserve: np.ndarray  # X^G, (P, N+1)
    liability: np.ndarray  # X, (P, N+1)
    benefits: np.ndarray  # cumulative B, (P, N+1)
    discount: np.ndarray  # D_k per step, (N+1,)
    ledger: RepresentationResult
    drift: np.ndarray
    sum_at_risk: list
    benefits_self_compensating: bool

    @property
    def max_residual(self) -> float:
        return self.ledger.max_residual

    @property
    def terminal_reserve(self) -> np.ndarray:
        return self.reserve[:, -1]

    def write_csv(self, out_dir):
        self.ledger.write_csv(f"{out_dir}/thiele_ledger.csv")
        with open(f"{out_dir}/thiele_reserve.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path_id", "step", "reserve", "liability", "benefits"])
            for r in range(self.reserve.shape[0]):
                for k in range(self.reserve.shape[1]):
                    wr.writerow([r, k, fmt_float(self.reserve[r, k]), fmt_float(self.liability[r, k]),
                                 fmt_float(self.benefits[r, k])])
        with open(f"{out_dir}/thiele_sum_at_risk.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path_id", "step", "index_set", "marks", "side", "value"])
            for row in self.sum_at_risk:
                wr.writerow(row)


def thiele_reserve(model, contract: InsuranceContract) -> ThieleResult:
    """Reserve, stochastic Thiele ledger and sums at risk.

    With discount factors ``D_k = exp(-int phi)`` over each step, the
    liability satisfies ``X_{k-1} = D_k (dB_k + X_k)`` and ``X = 0`` from the
    term onwards.  The ledger checks, per path and step,

        dX^G_k = -dB_k + (1/D_k - 1) X^G_{k-1} + IF_k + IB_k

    where the martingale integrands represent ``X_{k-1} / D_k``.
    """
    eng = engine_for(model)
    grid = eng.model.grid
    T = grid[-1] if contract.T is None else float(contract.T)
    if T not in grid:
        raise ModelError("contract term lies on the grid", detail=f"T = {T}")
    kT = grid.index(T)
    a, b, phi = _fn(contract.a), _fn(contract.b), _fn(contract.phi)
    N = eng.n_steps
    P = eng.n_paths

    D = np.ones(N + 1)
    surv = np.zeros(N + 1)
    for k in range(1, N + 1):
        D[k] = np.exp(-_trapezoid(phi, grid[k - 1], grid[k]))
        surv[k] = _trapezoid(a, grid[k - 1], grid[k])

    dB = np.zeros((P, N + 1))
    for r, p in enumerate(eng.paths):
        ds = death_step(p)
        for k in range(1, kT + 1):
            alive = ds is None or ds > k - 1
            dB[r, k] = (surv[k] if alive else 0.0) + (b(grid[k]) if ds == k else 0.0)
    X = np.zeros((P, N + 1))
    for k in range(N, 0, -1):
        X[:, k - 1] = D[k] * (dB[:, k] + X[:, k]) if k <= kT else 0.0
    B = np.cumsum(dB, axis=1)

    reserve = eng.process_projection_matrix(X)
    inc = np.zeros((P, N + 1))
    inc[:, 1:] = -dB[:, 1:] + (1.0 / D[1:] - 1.0) * reserve[:, :-1]
    drift = np.cumsum(inc, axis=1)
    xi = np.empty_like(X)
    xi[:, 0] = X[:, 0]
    xi[:, 1:] = X[:, :-1] / D[1:]
    ledger = decompose_steps(eng, xi, reserve - reserve[:, :1], drift)

    sar = []
    for r, g in enumerate(ledger.integrands):
        for (k, I, e), v in sorted(g.forward.items()):
            sar.append([r, k, " ".join(map(str, I)), " ".join(e), "forward", fmt_float(v)])
        for (k, I, e), v in sorted(g.backward.items()):
            sar.append([r, k, " ".join(map(str, I)), " ".join(e), "backward", fmt_float(v)])
    self_comp = bool(np.max(np.abs(generic_compensator(eng, B, "IB") - B)) <= 1e-12)
    return ThieleResult(reserve, X, B, D, ledger, drift, sar, self_comp)
