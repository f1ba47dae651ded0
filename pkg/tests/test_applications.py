import numpy as np
import pytest

import oracles as O
from imr.applications.location import (
    LocationSpec,
    location_model,
    location_predictor,
    retention_nesting,
    retention_sweep,
)
from imr.applications.markov import MarkovApproxSpec, chain_state, jump_chain_model, markov_gap
from imr.applications.thiele import InsuranceContract, death_step, thiele_model, thiele_reserve
from imr.engine import ExactEngine
from imr.measures import compute_mu
from imr.model import ModelError

GRID = (0, 1, 2, 3, 4)


# ------------------------------------------------------------------ Thiele


def test_thiele_zero_contract():
    res = thiele_reserve(thiele_model(GRID), InsuranceContract(0.0, 0.0, 0.05))
    assert np.all(res.reserve == 0.0)
    for rep in res.ledger.reports:
        for arr in (rep.lhs, rep.drift, rep.if_integral, rep.ib_integral):
            assert np.all(arr == 0.0)


def test_thiele_pure_death_benefit_matches_enumeration():
    m = thiele_model(GRID, check_prob=0.0, hazard={"g": 0.1})
    res = thiele_reserve(m, InsuranceContract(a=0.0, b=1.0, phi=0.0))
    eng = ExactEngine(m)
    paths = O.brute_paths(m)
    N = m.n_steps
    for k in range(N + 1):
        xi = {p.events: float(death_step(p) is not None and death_step(p) > k) for p in eng.paths}
        want = O.projection(paths, xi, k)
        for r, p in enumerate(eng.paths):
            assert abs(res.reserve[r, k] - want[p.events]) <= 1e-12
            if death_step(p) is None or death_step(p) > k:  # alive at t_k
                assert abs(res.reserve[r, k] - (1 - 0.9 ** (N - k))) <= 1e-12


def test_thiele_ledger_with_deletions():
    m = thiele_model(GRID, retention=2)
    res = thiele_reserve(m, InsuranceContract(a=1.0, b=lambda t: 5.0 + t, phi=0.03))
    assert res.max_residual < 1e-9
    assert np.all(res.terminal_reserve == 0.0)
    assert res.benefits_self_compensating
    nonzero = 0
    for r, rep in enumerate(res.ledger.reports):
        inc = np.diff(rep.ib_integral)
        g = res.ledger.integrands[r]
        for k in range(1, m.n_steps + 1):
            if abs(inc[k - 1]) > 1e-12:
                nonzero += 1
                # backward atoms at this step involve a deleted health record
                assert any(s == k and any(i % 2 == 0 for i in I) for (s, I, e) in g.backward)
    assert nonzero > 0


def test_thiele_without_deletions_has_no_ib_part():
    m = thiele_model(GRID, retention=None)
    res = thiele_reserve(m, InsuranceContract(a=1.0, b=2.0, phi=0.02))
    assert res.max_residual < 1e-9
    assert all(np.max(np.abs(r.ib_integral)) <= 1e-12 for r in res.ledger.reports)


def test_thiele_term_before_horizon_and_off_grid():
    m = thiele_model(GRID)
    res = thiele_reserve(m, InsuranceContract(a=1.0, b=1.0, phi=0.0, T=2.0))
    assert np.all(res.reserve[:, 2:] == 0.0) and res.max_residual < 1e-9
    with pytest.raises(ModelError):
        thiele_reserve(m, InsuranceContract(a=1.0, T=2.5))


def test_thiele_csv(tmp_path):
    res = thiele_reserve(thiele_model((0, 1, 2)), InsuranceContract(a=1.0, b=1.0, phi=0.01))
    res.write_csv(tmp_path)
    for name in ("thiele_ledger.csv", "thiele_reserve.csv", "thiele_sum_at_risk.csv"):
        assert (tmp_path / name).stat().st_size > 0


# ------------------------------------------------------------------ Markov


def _f(y, n):
    return {"x": 1.0, "y": -0.5, "z": 2.0}[y] + 0.3 * n


def test_markov_chain_has_no_gap():
    res = markov_gap(jump_chain_model(GRID, kind="markov"), MarkovApproxSpec(_f))
    assert res.max_gap <= 1e-12
    assert res.state_vs_admissible <= 1e-12
    assert res.representation.max_residual < 1e-10


def test_duration_chain_gap_matches_enumeration():
    m = jump_chain_model(GRID, kind="duration")
    res = markov_gap(m, MarkovApproxSpec(_f))
    eng = ExactEngine(m)
    paths = O.brute_paths(m)
    N = m.n_steps
    xi = {p.events: _f(*chain_state(p, N)) for p in eng.paths}
    for k in range(N + 1):
        full = O.history_projection(paths, xi, k)
        num, den = {}, {}
        for h, q in paths.items():
            key = _chain(h, k)
            num[key] = num.get(key, 0.0) + q * xi[h]
            den[key] = den.get(key, 0.0) + q
        for r, p in enumerate(eng.paths):
            assert abs(res.full[r, k] - full[p.events]) <= 1e-12
            key = _chain(p.events, k)
            assert abs(res.state[r, k] - num[key] / den[key]) <= 1e-12
    assert res.max_gap > 1e-3
    assert res.state_vs_admissible <= 1e-12


def _chain(history, k):
    """``(Y, N)`` from the replayed state: the one active piece and its index."""
    st = O.state(history, k)
    if not st:
        return None, 0
    (i, y), = st
    return y, (i - 1) // 2


def test_markov_constant_target():
    res = markov_gap(jump_chain_model(GRID, kind="duration"), MarkovApproxSpec(lambda y, n: 2.0))
    assert np.all(res.full == 2.0) and np.all(res.state == 2.0) and np.all(res.admissible == 2.0)
    for rep in res.representation.reports:
        assert np.max(np.abs(rep.if_integral)) <= 1e-15 and np.max(np.abs(rep.ib_integral)) <= 1e-15
    inc, run = res.fuzziness()
    assert np.max(run) <= 1e-15


def test_markov_csv(tmp_path):
    m = jump_chain_model((0, 1, 2))
    markov_gap(m, MarkovApproxSpec(_f)).write_csv(tmp_path, m.grid)
    assert (tmp_path / "markov_gap.csv").read_text().startswith("path_id,t,full_history")


# ---------------------------------------------------------------- location


def test_location_full_area():
    m = location_model(n_steps=4, delta=1)
    res = location_predictor(m, LocationSpec(1, 1, ("L", "R")))
    assert np.all(res.predictor == 1.0)
    for name in ("if_integral", "ib_integral", "drift"):
        assert np.all(res.component(name) == 0.0)


def test_location_long_retention_has_no_ib():
    m = location_model(n_steps=5, delta=5)
    res = location_predictor(m, LocationSpec(5, 1, ("R",)))
    assert np.all(res.component("ib_integral") == 0.0)
    assert res.max_residual < 1e-9


def test_location_short_retention():
    m = location_model(n_steps=5, delta=1)
    res = location_predictor(m, LocationSpec(1, 2, ("R",)))
    assert res.max_residual < 1e-9
    assert res.ib_magnitude > 1e-3


def test_location_stride_gives_singleton_events():
    m = location_model(n_steps=6, delta=3, stride=2)
    eng = ExactEngine(m)
    for r in range(eng.n_paths):
        assert all(len(a.index_set) == 1 for a in compute_mu(eng, r))
    assert location_predictor(m, LocationSpec(3, 1, ("R",))).max_residual < 1e-9


def test_retention_sweep_and_nesting():
    rows = retention_sweep([1, 2, 6], LocationSpec(1, 1, ("R",)), n_steps=5)
    assert [d for d, _, _ in rows] == [1, 2, 6]
    assert all(res < 1e-9 for _, _, res in rows)
    assert rows[-1][1] == 0.0 and rows[0][1] > 0.0
    small, large = location_model(n_steps=5, delta=1), location_model(n_steps=5, delta=3)
    assert retention_nesting(small, large)
    assert not retention_nesting(large, small)


@pytest.mark.parametrize("kw", [{"delta": 0, "h": 1, "A": ()}, {"delta": 1, "h": 0.5, "A": ()}])
def test_location_spec_validation(kw):
    with pytest.raises(ModelError):
        LocationSpec(**kw)
