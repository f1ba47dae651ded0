"""Cost of pretending a jump process is Markovian.

The state process ``Y`` is encoded as a chain of pieces: the ``n``-th jump
innovates piece ``n + 1`` with the new state as mark and deletes piece
``n`` at the same time.  The admissible information is then exactly the
current state and the jump count, and the full history gives the classical
filtration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..engine import engine_for
from ..model import Deletion, Innovation, ScenarioModel, fmt_float
from ..representation import RepresentationResult, verify_representation_xi


@dataclass(frozen=True)
class MarkovApproxSpec:
    """Target ``f(Y_T, N_T)`` for a jump chain built by ``jump_chain_model``."""

    f: Callable[[str, int], float]


def jump_chain_model(grid, states=("x", "y", "z"), initial=None, jump_prob=None,
                     kind="markov", name=None) -> ScenarioModel:
    """Jump chain whose first state is revealed at ``t_1``.

    ``jump_prob(k, y, d)`` is the probability of leaving state ``y`` at step
    ``k`` after ``d`` steps in it.  ``kind='markov'`` defaults to a hazard
    depending on ``(k, y)`` only; ``kind='duration'`` to one that depends on
    the duration ``d``.  Targets of a jump are uniform over the other states.
    """
    grid = tuple(float(t) for t in grid)
    N = len(grid) - 1
    states = tuple(states)
    if initial is None:
        initial = {s: 1.0 / len(states) for s in states}
    if jump_prob is None:
        if kind == "markov":
            base = {s: 0.2 + 0.5 * i / max(1, len(states) - 1) for i, s in enumerate(states)}
            jump_prob = lambda k, y, d: min(0.9, base[y] * (1.0 + 0.1 * k))  # noqa: E731
        elif kind == "duration":
            jump_prob = lambda k, y, d: 0.1 if d <= 1 else 0.7  # noqa: E731
        else:
            raise ValueError(f"unknown kind {kind!r}")

    def law(history):
        k = len(history) + 1
        if k == 1:
            return [(frozenset({Innovation(1, s)}), float(p)) for s, p in initial.items() if p > 0]
        piece, y, since = 1, None, 1
        for j, ev in enumerate(history, start=1):
            for e in ev:
                if isinstance(e, Innovation):
                    piece, y, since = e.piece, e.mark, j
        p = float(jump_prob(k, y, k - since))
        others = [s for s in states if s != y]
        outs = [(frozenset({Innovation(piece + 1, s), Deletion(piece)}), p / len(others)) for s in others]
        outs.append((frozenset(), 1.0 - p))
        return [(ev, q) for ev, q in outs if q > 0]

    return ScenarioModel(grid, states, N, law, name=name or f"jump-chain-{kind}",
                         meta={"kind": kind})


def chain_state(path, k):
    """``(Y_{t_k}, N_{t_k})`` read from the event history (``Y`` is None before ``t_1``)."""
    y, n = None, -1
    for ev in path.events[:k]:
        for e in ev:
            if isinstance(e, Innovation):
                y, n = e.mark, n + 1
    return y, max(n, 0)


@dataclass
class MarkovGapResult:
    full: np.ndarray  # E[f | F_t], (P, N+1)
    state: np.ndarray  # E[f | Y_t, N_t]
    admissible: np.ndarray  # E[f | G_t]
    representation: RepresentationResult

    @property
    def gap(self) -> np.ndarray:
        return self.full - self.admissible

    @property
    def max_gap(self) -> float:
        return float(np.max(np.abs(self.gap)))

    @property
    def state_vs_admissible(self) -> float:
        return float(np.max(np.abs(self.state - self.admissible)))

    def fuzziness(self):
        """Per-path ``|IB increment|`` series and their running sum."""
        ib = np.array([r.ib_integral for r in self.representation.reports])
        inc = np.abs(np.diff(ib, axis=1, prepend=0.0))
        return inc, np.cumsum(inc, axis=1)

    def write_csv(self, out_dir, grid):
        inc, run = self.fuzziness()
        with open(f"{out_dir}/markov_gap.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["path_id", "t", "full_history", "state_only", "admissible", "gap",
                         "ib_increment_abs", "ib_running"])
            for r in range(self.full.shape[0]):
                for k, t in enumerate(grid):
                    wr.writerow([r, fmt_float(t), fmt_float(self.full[r, k]), fmt_float(self.state[r, k]),
                                 fmt_float(self.admissible[r, k]), fmt_float(self.gap[r, k]),
                                 fmt_float(inc[r, k]), fmt_float(run[r, k])])
        self.representation.write_csv(f"{out_dir}/markov_representation.csv")


def markov_gap(model, spec: MarkovApproxSpec) -> MarkovGapResult:
    """Compare full-history and state-only predictions of ``f(Y_T, N_T)``."""
    eng = engine_for(model)
    N = eng.n_steps
    xi = np.array([spec.f(*chain_state(p, N)) for p in eng.paths])
    full = eng.history_projection(xi)
    admissible = eng.partition_projection(xi)
    state = np.empty_like(full)
    for k in range(N + 1):
        keys = [chain_state(p, k) for p in eng.paths]
        num, den = {}, {}
        for key, w, v in zip(keys, eng.w, xi):
            num[key] = num.get(key, 0.0) + w * v
            den[key] = den.get(key, 0.0) + w
        state[:, k] = [num[key] / den[key] for key in keys]
    rep = verify_representation_xi(eng, xi)
    return MarkovGapResult(full, state, admissible, rep)
