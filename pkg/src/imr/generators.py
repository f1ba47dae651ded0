"""Random scenario models and payoffs for property checks."""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .model import EMPTY, Deletion, Innovation, ScenarioModel, format_history


def _node_outcomes(rng, K, marks, innovated, active, max_branch, p_empty):
    """Random distribution over composite events at one node."""
    elementary = []
    for piece in range(1, K + 1):
        if piece not in innovated:
            elementary.extend(Innovation(piece, m) for m in marks)
        elif piece in active:
            elementary.append(Deletion(piece))
    n_out = int(rng.integers(1, max_branch + 1))
    events = []
    tries = 0
    while len(events) < n_out and tries < 50:
        tries += 1
        if not elementary or (EMPTY not in events and rng.random() < p_empty):
            ev = EMPTY
        else:
            size = 1 if rng.random() < 0.7 or len(elementary) < 2 else 2
            picks = rng.choice(len(elementary), size=size, replace=False)
            chosen = [elementary[i] for i in picks]
            if len({e.piece for e in chosen}) < len(chosen):
                continue
            ev = frozenset(chosen)
        if ev not in events:
            events.append(ev)
    probs = rng.dirichlet(np.ones(len(events))) + 0.05
    probs = probs / probs.sum()
    probs[-1] = 1.0 - probs[:-1].sum()
    return [(ev, float(p)) for ev, p in zip(events, probs)]


def random_model(seed, max_pieces=3, n_steps=4, n_marks=2, max_branch=3, p_empty=0.35,
                 deletions=True) -> ScenarioModel:
    """Random tree with innovations, deletions and simultaneous events.

    Branching is at most ``max_branch`` so the tree has at most
    ``max_branch ** n_steps`` paths.
    """
    rng = np.random.default_rng(seed)
    marks = tuple("abcdefgh"[:n_marks])
    grid = tuple(np.round(np.cumsum(np.r_[0.0, rng.uniform(0.5, 1.5, n_steps)]), 6))
    law = {}
    stack = [((), frozenset(), frozenset())]
    while stack:
        history, innovated, active = stack.pop()
        if len(history) == n_steps:
            continue
        outs = _node_outcomes(rng, max_pieces, marks, innovated, active if deletions else (),
                              max_branch, p_empty)
        law[history] = outs
        for ev, _ in outs:
            inn = {e.piece for e in ev if isinstance(e, Innovation)}
            dele = {e.piece for e in ev if isinstance(e, Deletion)}
            stack.append((history + (ev,), innovated | inn, (active | inn) - dele))
    return ScenarioModel(grid, marks, max_pieces, law, name=f"random-{seed}")


def full_information_model(seed, max_pieces=3, n_steps=4, n_marks=2, max_branch=3) -> ScenarioModel:
    """No deletions, and every outcome at a node innovates the same pieces.

    The observed marks then pin down the whole history, so the admissible
    information coincides with the full history.
    """
    rng = np.random.default_rng(seed)
    marks = tuple("abcdefgh"[:n_marks])
    grid = tuple(np.round(np.cumsum(np.r_[0.0, rng.uniform(0.5, 1.5, n_steps)]), 6))
    law = {}
    stack = [((), frozenset())]
    while stack:
        history, innovated = stack.pop()
        if len(history) == n_steps:
            continue
        fresh = [p for p in range(1, max_pieces + 1) if p not in innovated]
        if fresh and rng.random() < 0.7:
            size = 1 if len(fresh) < 2 or rng.random() < 0.7 else 2
            pieces = sorted(rng.choice(fresh, size=size, replace=False).tolist())
        else:
            pieces = []
        if not pieces:
            outs = [(EMPTY, 1.0)]
        else:
            combos = {tuple(rng.choice(marks, size=len(pieces))) for _ in range(max_branch)}
            combos = sorted(combos)
            probs = rng.dirichlet(np.ones(len(combos))) + 0.05
            probs = probs / probs.sum()
            probs[-1] = 1.0 - probs[:-1].sum()
            outs = [(frozenset(Innovation(p, m) for p, m in zip(pieces, c)), float(q))
                    for c, q in zip(combos, probs)]
        law[history] = outs
        for ev, _ in outs:
            stack.append((history + (ev,), innovated | {e.piece for e in ev}))
    return ScenarioModel(grid, marks, max_pieces, law, name=f"fullinfo-{seed}")


def _unit(seed, text) -> float:
    """Deterministic uniform on [-1, 1) from a seed and a string."""
    h = hashlib.blake2b(f"{seed}|{text}".encode(), digest_size=8).digest()
    return struct.unpack("<Q", h)[0] / 2.0**63 - 1.0


class RandomPayoff:
    """Bounded path functional with an independent-looking value per path."""

    def __init__(self, seed):
        self.seed = seed

    def __call__(self, path) -> float:
        return _unit(self.seed, format_history(path.events))


class RandomRate:
    """Random sojourn rate ``h(path, M, k)`` that also reads unobserved marks."""

    def __init__(self, seed):
        self.seed = seed

    def __call__(self, path, M, k) -> float:
        return _unit(self.seed, f"{M}|{k}|{path.marks}")


class RandomField:
    """Random jump integrand ``F(path, k, I, e)`` reading every mark of the path."""

    def __init__(self, seed):
        self.seed = seed

    def __call__(self, path, k, I, e) -> float:
        return _unit(self.seed, f"{k}|{I}|{e}|{path.marks}")


def model_suite(n_models=100, seed=2024, full_information=False) -> list:
    """Deterministic list of small random models with varied shapes.

    Each model has 1-3 pieces, 1-5 steps, 1-3 marks and branching at most 3.
    """
    rng = np.random.default_rng(seed)
    out = []
    for j in range(n_models):
        K = int(rng.integers(1, 4))
        N = int(rng.integers(1, 6))
        E = int(rng.integers(1, 4))
        s = int(rng.integers(0, 2**31))
        if full_information:
            out.append(full_information_model(s, max_pieces=K, n_steps=N, n_marks=E))
        else:
            out.append(random_model(s, max_pieces=K, n_steps=N, n_marks=E))
    return out
