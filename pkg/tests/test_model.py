import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from conftest import ev
from imr.generators import random_model
from imr.model import (
    EMPTY,
    Atom,
    Deletion,
    InformationState,
    Innovation,
    MeasureAtoms,
    ModelError,
    ScenarioModel,
    counting_measure_atoms,
    enumerate_paths,
    information_state,
    iter_nodes,
    validate_path,
)


def test_indices():
    assert Innovation(2, "a").index == 3
    assert Deletion(2).index == 4


def test_deterministic_model_single_path():
    law = {(): [(ev(Innovation(1, "a")), 1.0)]}
    m = ScenarioModel((0, 1, 2), ("a",), 1, law)
    paths = enumerate_paths(m)
    assert len(paths) == 1 and paths[0].probability == 1.0


def test_bernoulli_two_paths(bernoulli_model):
    paths = enumerate_paths(bernoulli_model)
    assert sorted(p.probability for p in paths) == [0.5, 0.5]
    inn = [p for p in paths if p.marks[0] == "a"][0]
    assert inn.times == ((1.0, 2.0),)


@pytest.mark.parametrize("seed", range(10))
def test_random_model_probabilities_sum_to_one(seed):
    m = random_model(seed, max_pieces=3, n_steps=4)
    paths = enumerate_paths(m)
    assert math.isclose(sum(p.probability for p in paths), 1.0, abs_tol=1e-12)
    brute = O.brute_paths(m)
    assert {p.events: p.probability for p in paths}.keys() == brute.keys()
    for p in paths:
        assert math.isclose(p.probability, brute[p.events], rel_tol=1e-14)
        validate_path(p)


def test_iter_nodes_covers_tree(bernoulli_model):
    nodes = dict(iter_nodes(bernoulli_model))
    assert nodes[()] == 1.0
    assert len(nodes) == 5


# ------------------------------------------------------------- validation


def _bad(law, marks=("a",), K=1, grid=(0, 1, 2)):
    with pytest.raises(ModelError) as exc:
        enumerate_paths(ScenarioModel(grid, marks, K, law))
    return exc.value


def test_rejects_probabilities_not_summing_to_one():
    err = _bad({(): [(ev(Innovation(1, "a")), 0.4), (EMPTY, 0.4)]})
    assert err.invariant == "distribution sums to 1" and err.node == ()


def test_rejects_double_innovation():
    a = ev(Innovation(1, "a"))
    err = _bad({(): [(a, 1.0)], (a,): [(a, 1.0)]})
    assert err.invariant == "each piece is innovated at most once"
    assert err.node == (a,)
    assert "each piece is innovated at most once" in str(err)


def test_rejects_deleting_inactive_piece():
    err = _bad({(): [(ev(Deletion(1)), 1.0)]})
    assert err.invariant == "deletion only of active pieces"


def test_rejects_instant_deletion():
    err = _bad({(): [(ev(Innovation(1, "a"), Deletion(1)), 1.0)]})
    assert err.invariant in ("no instantaneous deletion", "deletion only of active pieces")


def test_rejects_unknown_mark_and_piece():
    assert _bad({(): [(ev(Innovation(1, "q")), 1.0)]}).invariant == "innovation marks lie in the mark space"
    assert _bad({(): [(ev(Innovation(2, "a")), 1.0)]}).invariant == "pieces lie in 1..max_pieces"


def test_rejects_negative_probability():
    err = _bad({(): [(ev(Innovation(1, "a")), 1.5), (EMPTY, -0.5)]})
    assert err.invariant == "probabilities are finite and non-negative"


def test_rejects_duplicate_outcomes():
    err = _bad({(): [(EMPTY, 0.5), (EMPTY, 0.5)]})
    assert err.invariant == "composite events at a node are distinct"


@pytest.mark.parametrize("grid, inv", [
    ((1, 2), "grid starts at 0"),
    ((0, 2, 1), "grid is strictly increasing"),
    ((0,), "grid is finite with at least one step"),
    ((0, math.inf), "grid is finite"),
])
def test_rejects_bad_grid(grid, inv):
    with pytest.raises(ModelError) as exc:
        ScenarioModel(grid, ("a",), 1, {})
    assert exc.value.invariant == inv


def test_rejects_null_mark_and_horizon():
    with pytest.raises(ModelError):
        ScenarioModel((0, 1), ("",), 1, {})
    with pytest.raises(ModelError):
        ScenarioModel((0, 1), ("a",), 1, {}, horizon=3)


# ---------------------------------------------------------- information


def test_information_state_examples(deterministic_model):
    (p,) = enumerate_paths(deterministic_model)
    assert information_state(p, 0.0) == InformationState()
    assert information_state(p, 2.0) == InformationState((1,), ("a",))
    assert information_state(p, 3.0, "right") == InformationState()
    assert information_state(p, 3.0, "left") == InformationState((1,), ("a",))
    # innovation time: right includes, left excludes
    assert information_state(p, 1.0, "right").active_set == (1,)
    assert information_state(p, 1.0, "left").active_set == ()


def test_information_state_rejects_off_grid(deterministic_model):
    (p,) = enumerate_paths(deterministic_model)
    with pytest.raises(ModelError):
        information_state(p, 1.5)


@pytest.mark.parametrize("seed", range(8))
def test_information_state_matches_replayed_events(seed):
    m = random_model(seed, n_steps=4)
    for p in enumerate_paths(m):
        for k, t in enumerate(m.grid):
            assert information_state(p, t).key == O.state(p.events, k)
            if k:
                assert information_state(p, t, "left").key == O.left_state(p.events, k)


def test_information_state_invariants():
    with pytest.raises(ModelError):
        InformationState((2,), ("a",))
    with pytest.raises(ModelError):
        InformationState((1,), ("",))


# ------------------------------------------------------- counting measure


def test_counting_atoms_event_free():
    m = ScenarioModel((0, 1, 2), ("a",), 1, {})
    (p,) = enumerate_paths(m)
    assert len(counting_measure_atoms(p)) == 0


def test_counting_atoms_innovation_and_deletion(deterministic_model):
    (p,) = enumerate_paths(deterministic_model)
    atoms = counting_measure_atoms(p).as_dict()
    assert atoms == {(1, (1,), ("a",)): 1.0, (3, (2,), ("a",)): 1.0}


def test_counting_atoms_simultaneous(swap_model):
    for p in enumerate_paths(swap_model):
        if p.events[1]:
            atoms = counting_measure_atoms(p).as_dict()
            joint = [k for k in atoms if k[0] == 2]
            assert joint == [(2, (2, 3), (p.marks[0], p.marks[1]))]
            # the defining indicator: exactly T_2 and T_3 sit at t_2
            assert p.T(2) == p.T(3) == 2.0 and p.T(1) != 2.0 and p.T(4) != 2.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_counting_atoms_match_events(seed):
    m = random_model(seed, n_steps=3)
    for p in enumerate_paths(m):
        got = counting_measure_atoms(p).as_dict()
        want = {}
        for k in range(1, m.n_steps + 1):
            r = O.event(p.events, k)
            if r is not None:
                want[(k,) + r] = 1.0
        assert got == want


def test_measure_atoms_rejects_duplicates():
    a = Atom(1.0, (1,), ("a",), 1.0, 1)
    with pytest.raises(ModelError):
        MeasureAtoms("nu", (a, a))
    with pytest.raises(ModelError):
        MeasureAtoms("mu", (Atom(1.0, (1,), ("a",), 0.5, 1),))
