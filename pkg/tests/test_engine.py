import numpy as np
import pytest

import oracles as O
from conftest import ev
from imr.engine import (
    ActiveSetIs,
    Everything,
    ExactEngine,
    JointEventIs,
    JumpIndicator,
    MarksEqual,
    bounded_fraction_diagnostic,
    conditional_expectation,
    state_event,
)
from imr.generators import RandomPayoff, full_information_model, model_suite, random_model
from imr.model import EMPTY, InformationState, Innovation, ScenarioModel


def test_constant_passes_through(swap_model):
    eng = ExactEngine(swap_model)
    assert eng.conditional_expectation(lambda p: 3.5, MarksEqual((1,), ("a",))) == pytest.approx(3.5, abs=1e-15)
    assert eng.conditional_expectation(lambda p: 3.5, MarksEqual((3,), ("",))) == pytest.approx(3.5, abs=1e-15)


def test_full_space_is_unconditional(swap_model):
    eng = ExactEngine(swap_model)
    f = RandomPayoff(1)
    want = sum(p.probability * f(p) for p in eng.paths)
    assert abs(eng.conditional_expectation(f, Everything()) - want) < 1e-15
    assert abs(conditional_expectation(swap_model, f) - want) < 1e-15


def test_two_path_hand_ratio(bernoulli_model):
    eng = ExactEngine(bernoulli_model)
    xi = lambda p: 1.0 if p.marks[0] == "a" else 0.0  # noqa: E731
    assert eng.conditional_expectation(xi, JointEventIs(1, (1,), ("a",))) == 1.0
    assert eng.conditional_expectation(xi, JumpIndicator(1, 0)) == 0.0


def test_zero_probability_event_flags(bernoulli_model):
    eng = ExactEngine(bernoulli_model)
    assert eng.conditional_expectation(lambda p: 1.0, MarksEqual((1,), ("zz",))) == 0.0
    assert eng.flags and eng.flags[-1].context == "conditional_expectation"
    with pytest.raises(ArithmeticError):
        eng.ratio(1.0, 0.0)


def test_conditioning_vocabulary(swap_model):
    eng = ExactEngine(swap_model)
    paths = O.brute_paths(swap_model)
    for k in range(1, 4):
        for side in ("right", "left"):
            for M in ((), (1,), (3,), (1, 3)):
                m = eng.mask(ActiveSetIs(k, M, side))
                key = O.state if side == "right" else O.left_state
                want = [tuple(i for i, _ in key(p.events, k)) == M for p in eng.paths]
                assert list(m) == want
    both = eng.mask(ActiveSetIs(1, (1,)) & MarksEqual((1,), ("b",)))
    assert both.sum() == sum(1 for p in eng.paths if p.marks[0] == "b")
    assert len(paths) == eng.n_paths


def test_state_event_matches_state(swap_model):
    eng = ExactEngine(swap_model)
    for r, p in enumerate(eng.paths):
        for k in range(4):
            key = O.state(p.events, k)
            st = InformationState(tuple(i for i, _ in key), tuple(z for _, z in key))
            assert eng.mask(state_event(k, st))[r]


# ------------------------------------------------------------ projections


def test_projection_of_constant(swap_model):
    for pp in ExactEngine(swap_model).optional_projection(lambda p: 2.0):
        assert np.all(pp.values == 2.0)
        assert np.isnan(pp.left[0]) and np.all(pp.left[1:] == 2.0)


@pytest.mark.parametrize("seed", range(6))
def test_full_information_equals_history_projection(seed):
    m = full_information_model(seed)
    eng = ExactEngine(m)
    f = RandomPayoff(seed)
    right, _ = eng.ratio_projection(f)
    np.testing.assert_allclose(right, eng.history_projection(f), atol=1e-12)
    paths = O.brute_paths(m)
    xi = {p.events: f(p) for p in eng.paths}
    for k in range(m.n_steps + 1):
        want = O.history_projection(paths, xi, k)
        np.testing.assert_allclose(right[:, k], [want[p.events] for p in eng.paths], atol=1e-12)


def test_projection_returns_to_average_after_deletion(two_mark_model):
    eng = ExactEngine(two_mark_model)
    xi = lambda p: 1.0 if p.marks[0] == "a" else 0.0  # noqa: E731
    for pp, p in zip(eng.optional_projection(xi), eng.paths):
        hit = 1.0 if p.marks[0] == "a" else 0.0
        assert list(pp.values) == [0.5, hit, 0.5]
        assert pp.left[1] == 0.5 and pp.left[2] == hit
        # hand ratio E_0[xi I^0_t] / E_0[I^0_t] after deletion
        ind = eng.indicator(2, ())
        assert eng.E_M(ind * eng.values(xi), (), ()) / eng.E_M(ind, (), ()) == 0.5


@pytest.mark.parametrize("m", model_suite(30, seed=11), ids=lambda m: m.name)
def test_ratio_and_partition_agree(m):
    eng = ExactEngine(m)
    f = RandomPayoff(5)
    right, left = eng.ratio_projection(f)
    part = eng.partition_projection(f)
    assert np.max(np.abs(right - part)) <= 1e-12
    if m.n_steps:
        assert np.max(np.abs(left[:, 1:] - part[:, :-1])) <= 1e-12
    paths = O.brute_paths(m)
    xi = {p.events: f(p) for p in eng.paths}
    for k in range(m.n_steps + 1):
        want = O.projection(paths, xi, k)
        np.testing.assert_allclose(part[:, k], [want[p.events] for p in eng.paths], atol=1e-12)


def test_projection_process_examples(swap_model):
    eng = ExactEngine(swap_model)
    grid = swap_model.grid
    for pp in eng.projection_process(lambda p, k: grid[k]):
        assert np.allclose(pp.values, grid)
    # an adapted process projects to itself
    adapted = lambda p, k: float(len(O.state(p.events, k))) + (k == 2)  # noqa: E731
    X = eng.process(adapted)
    for r, pp in enumerate(eng.projection_process(adapted)):
        assert np.allclose(pp.values, X[r])
    # X_t = 1{T_1 >= t} * 1{Z_1 = b}: compare with conditional_expectation per state
    Y = lambda p, k: float(p.T(1) >= grid[k] and p.marks[0] == "b")  # noqa: E731
    proj = eng.projection_process(Y)
    for r, p in enumerate(eng.paths):
        for k in range(len(grid)):
            key = O.state(p.events, k)
            st = InformationState(tuple(i for i, _ in key), tuple(z for _, z in key))
            want = eng.conditional_expectation(lambda q: Y(q, k), state_event(k, st))
            assert abs(proj[r].values[k] - want) < 1e-15
            if k:
                assert abs(proj[r].left[k] - eng.process_projection_matrix(Y)[r, k - 1]) < 1e-15


# ------------------------------------------------------- bounded fractions


def test_bounded_fraction_deterministic(deterministic_model):
    assert np.all(bounded_fraction_diagnostic(deterministic_model) == 1.0)


def test_bounded_fraction_bernoulli(bernoulli_model):
    eng = ExactEngine(bernoulli_model)
    d = eng.bounded_fraction_diagnostic()
    assert d.max() == 2.0  # 1 / 0.5
    by_branch = {p.marks[0]: v for p, v in zip(eng.paths, d)}
    assert by_branch[""] == 2.0  # A^{}_{t_1} has probability 0.5
    assert by_branch["a"] == 1.0  # Z_1 = a already forces A^{1}_{t_1}


def test_bounded_fraction_innovated_branch():
    a = ev(Innovation(1, "a"))
    m = ScenarioModel((0, 1, 2), ("a",), 1, {(): [(a, 0.5), (EMPTY, 0.5)], ((EMPTY),): [(a, 1.0)]})
    eng = ExactEngine(m)
    d = {p.innovation_step(1): v for p, v in zip(eng.paths, eng.bounded_fraction_diagnostic())}
    assert d[1] == 2.0


@pytest.mark.parametrize("seed", range(5))
def test_bounded_fraction_finite(seed):
    d = bounded_fraction_diagnostic(random_model(seed))
    assert np.all(np.isfinite(d)) and np.all(d >= 1.0 - 1e-12)
