import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from imr.model import EMPTY, Deletion, Innovation, ScenarioModel  # noqa: E402


def ev(*items):
    return frozenset(items)


@pytest.fixture
def deterministic_model():
    """Piece 1 innovated with mark a at t_1, deleted at t_3."""
    law = {
        (): [(ev(Innovation(1, "a")), 1.0)],
        (ev(Innovation(1, "a")),): [(EMPTY, 1.0)],
        (ev(Innovation(1, "a")), EMPTY): [(ev(Deletion(1)), 1.0)],
    }
    return ScenarioModel((0, 1, 2, 3), ("a",), 1, law, name="deterministic")


@pytest.fixture
def bernoulli_model():
    """Innovate piece 1 with mark a w.p. 0.5 at t_1, delete it at t_2 if active."""
    law = {
        (): [(ev(Innovation(1, "a")), 0.5), (EMPTY, 0.5)],
        (ev(Innovation(1, "a")),): [(ev(Deletion(1)), 1.0)],
    }
    return ScenarioModel((0, 1, 2), ("a",), 1, law, name="bernoulli")


@pytest.fixture
def two_mark_model():
    """Piece 1 gets mark a or b (w.p. 0.5 each) at t_1 and is deleted at t_2."""
    a, b = ev(Innovation(1, "a")), ev(Innovation(1, "b"))
    law = {
        (): [(a, 0.5), (b, 0.5)],
        (a,): [(ev(Deletion(1)), 1.0)],
        (b,): [(ev(Deletion(1)), 1.0)],
    }
    return ScenarioModel((0, 1, 2), ("a", "b"), 1, law, name="two-mark")


@pytest.fixture
def swap_model():
    """Piece 1 at t_1 (mark a/b), at t_2 piece 2 innovated jointly with deleting piece 1."""
    a, b = ev(Innovation(1, "a")), ev(Innovation(1, "b"))
    law = {
        (): [(a, 0.3), (b, 0.7)],
        (a,): [(ev(Innovation(2, "a"), Deletion(1)), 0.6), (EMPTY, 0.4)],
        (b,): [(ev(Innovation(2, "a"), Deletion(1)), 0.2), (ev(Innovation(2, "b"), Deletion(1)), 0.5),
               (EMPTY, 0.3)],
    }
    return ScenarioModel((0, 1, 2, 3), ("a", "b"), 2, law, name="swap")


def jump_processes(eng, F):
    """Cumulative ``F.mu``, ``G.nu`` and ``H.rho`` as (P, N+1) arrays."""
    import numpy as np

    from imr.measures import if_ib_compensate

    N = eng.n_steps
    out = {name: np.zeros((eng.n_paths, N + 1)) for name in ("Fmu", "Gnu", "Hrho")}
    for r in range(eng.n_paths):
        pair = if_ib_compensate(eng, r, F)
        incs = {
            "Fmu": [(k[0], v) for k, v in pair.F_mu.items()],
            "Gnu": [(a.step, a.mass) for a in pair.forward_atoms()],
            "Hrho": [(a.step, a.mass) for a in pair.backward_atoms()],
        }
        for name, items in incs.items():
            row = np.zeros(N + 1)
            for k, v in items:
                row[k] += v
            out[name][r] = np.cumsum(row)
    return out
