import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cogran import engine
from cogran.engine import CouplingParams, NfisRegulator, RstRegulator, StubRegulator

P = CouplingParams()


def test_growth_linear_examples():
    assert engine.growth_linear(100, 10, P) == pytest.approx(90.51, abs=1e-9)
    ident = CouplingParams(alpha=1, beta=0, gamma=0)
    assert engine.growth_linear(37.25, 123.0, ident) == 37.25
    for beta in (0.0, 0.3, 7.0):
        assert engine.growth_linear(100, 0, CouplingParams(alpha=0.8, beta=beta, gamma=0.5)) == pytest.approx(80.5)


def test_growth_power_examples():
    p = CouplingParams(alpha=0.5, beta=0.25, gamma=0.5, law="power")
    assert engine.growth_power(100, 10, p) == pytest.approx(10 + 10 ** 0.25 + 0.5, abs=1e-12)
    assert engine.growth_power(100, 10, p) == pytest.approx(12.27828, abs=1e-5)
    for a in (0.1, 0.9, 2.0):
        assert engine.growth_power(1, 0, p.replace(alpha=a)) == pytest.approx(1.5)
    assert engine.growth_power(100, 1, CouplingParams(alpha=1, beta=1, gamma=0, law="power")) == pytest.approx(101)


def test_growth_rejects_bad_inputs():
    with pytest.raises(ValueError):
        engine.growth_power(10, 0, CouplingParams(beta=0, law="power"))
    with pytest.raises(ValueError):
        engine.growth_power(10, 0, CouplingParams(beta=-1, law="power"))
    for N, E in ((math.nan, 1), (10, math.inf), (0, 1), (10, -1)):
        with pytest.raises(ValueError):
            engine.growth_linear(N, E, P)


def test_params_validation():
    for bad in (dict(n_min=3), dict(n_min=10, n_max=9), dict(iterations=0), dict(law="cubic"), dict(n0=0), dict(alpha=math.nan)):
        with pytest.raises(ValueError):
            CouplingParams(**bad)
    with pytest.raises(ValueError):
        NfisRegulator(n_rules=4, max_rules=3)
    with pytest.raises(ValueError):
        RstRegulator(scales=())
    with pytest.raises(ValueError):
        StubRegulator(error=-1)


def test_grid_shape_examples():
    assert engine.grid_shape(12, P) == (3, 4)
    assert engine.grid_shape(90.51, P) == (10, 9)
    assert engine.grid_shape(2.55, P) == (2, 2)
    assert engine.grid_shape(1e9, P) == (20, 20)
    assert engine.grid_shape(math.inf, P) == (20, 20)


@given(st.floats(-1e6, 1e6), st.integers(4, 60), st.integers(0, 400))
@settings(max_examples=300, deadline=None)
def test_grid_shape_stays_in_band(N, n_min, extra):
    p = CouplingParams(n_min=n_min, n_max=n_min + extra)
    n1, n2 = engine.grid_shape(N, p)
    assert n1 >= 2 and n2 >= 2
    if engine.near_square_feasible((p.n_min + p.n_max) / 2, (p.n_max - p.n_min) / 2):
        assert p.n_min <= n1 * n2 <= p.n_max


def test_grid_shape_balance_wherever_attainable():
    # the bound is met at every N where some near-square pair can meet it
    p = CouplingParams(n_min=4, n_max=10_000)
    misses = []
    for N in range(4, 10_001):
        tol = max(3.0, 0.05 * N)
        n1, n2 = engine.grid_shape(N, p)
        ok = n1 >= 2 and n2 >= 2 and abs(n1 - n2) <= 2 and abs(n1 * n2 - N) <= tol
        if not ok:
            misses.append(N)
    assert all(not engine.near_square_feasible(N, max(3.0, 0.05 * N)) for N in misses)
    assert misses == [68, 76]


def test_iterate_law_matches_closed_form():
    errors = [10.0] * 50
    seq = engine.iterate_law(P, errors)
    np.testing.assert_allclose(seq, engine.linear_closed_form(P, 10.0, np.arange(51)), rtol=0, atol=1e-9)
    assert engine.linear_closed_form(P.replace(alpha=1.0), 10.0, 3) == pytest.approx(100 + 3 * 0.51)


def test_stub_fixed_point():
    seq = engine.iterate_law(P, [10.0] * 250)
    assert np.all(np.abs(seq[200:] - 0.51 / 0.1) < 1)


def test_step_seed_is_stable_and_distinct():
    assert engine.step_seed(0, 1) == engine.step_seed(0, 1)
    assert len({engine.step_seed(s, t) for s in range(5) for t in range(1, 6)}) == 25


def test_stub_run_replays_closed_form(small_split):
    train, test = small_split
    tr = engine.run_coupled(train, test, P.replace(iterations=40), StubRegulator(10.0), seed=3)
    assert tr.completed and len(tr) == 40
    np.testing.assert_allclose(
        tr.column("n_target"), engine.linear_closed_form(P, 10.0, np.arange(40)), rtol=0, atol=1e-9
    )
    for s in tr.steps:
        assert (s.n1, s.n2) == engine.grid_shape(s.n_target, P)
        assert s.error == 10.0 and s.rule_count == 0 and s.scale is None and not s.saturated


def test_stub_noise_is_seeded(small_split):
    train, test = small_split
    reg = StubRegulator(10.0, 3.0)
    a = engine.run_coupled(train, test, P.replace(iterations=10), reg, seed=1)
    b = engine.run_coupled(train, test, P.replace(iterations=10), reg, seed=1)
    c = engine.run_coupled(train, test, P.replace(iterations=10), reg, seed=2)
    assert a == b and a != c
    assert np.all(a.errors >= 0) and np.std(a.errors) > 0


def test_saturation_flag(small_split):
    train, test = small_split
    p = CouplingParams(alpha=1.5, n_max=50, iterations=8)
    tr = engine.run_coupled(train, test, p, StubRegulator(1.0))
    assert tr.completed
    assert [s.saturated for s in tr.steps] == [s.n_target > 50 for s in tr.steps]
    assert tr.steps[-1].saturated and tr.steps[-1].n_actual <= 50


def test_nfis_run_shape_and_determinism(small_split):
    train, test = small_split
    p = P.replace(iterations=6)
    reg = NfisRegulator(n_rules=2, train_iterations=3)
    a = engine.run_coupled(train, test, p, reg, seed=9, som_epochs=5)
    b = engine.run_coupled(train, test, p, reg, seed=9, som_epochs=5)
    assert a.completed and len(a) == 6 and a == b
    for s in a.steps:
        assert p.n_min <= s.n_actual <= p.n_max and s.n1 >= 2 and s.n2 >= 2
        assert s.n_actual == s.n1 * s.n2
        assert math.isfinite(s.error) and s.error >= 0 and s.rule_count == 2
    assert a.final_grid.n_units == a.steps[-1].n_actual


def test_rst_run_records_scales(small_split):
    train, test = small_split
    p = CouplingParams(alpha=0.9, beta=0.7, gamma=1.0, iterations=7)
    reg = RstRegulator(scales=(2, 3, 4, 5, 6, 7, 8))
    tr = engine.run_coupled(train, test, p, reg, seed=4, som_epochs=5)
    assert tr.completed
    assert [s.scale for s in tr.steps] == [2, 3, 4, 5, 6, 7, 8]
    assert np.all(np.isfinite(tr.errors))
    assert reg.scale_at(20) == 8
    follow = RstRegulator(scales=(2, 4), decision_scale=None)
    tr2 = engine.run_coupled(train, test, p.replace(iterations=2), follow, seed=4, som_epochs=5)
    assert tr2.final_regulator[0].decision_scale.requested_k == 4


def test_failing_step_returns_partial_trace(small_split):
    train, test = small_split
    reg = RstRegulator(scales=(2, 8), min_support=10_000)
    tr = engine.run_coupled(train, test, P.replace(iterations=5), reg, som_epochs=3)
    assert not tr.completed and len(tr) == 0
    assert tr.diagnostic.startswith("step 1:")


def test_run_rejects_empty_inputs(small_split):
    train, test = small_split
    with pytest.raises(ValueError):
        engine.run_coupled(train, test.subset([]), P, StubRegulator())


def test_trace_csv_round_trip(tmp_path, small_split):
    train, test = small_split
    tr = engine.run_coupled(train, test, P.replace(iterations=5), RstRegulator(scales=(2, 3)), som_epochs=3)
    path = engine.write_trace_csv(tr, tmp_path / "trace.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(engine.TRACE_COLUMNS)
    assert len(lines) == 6
    assert engine.read_trace_csv(path).steps == tr.steps
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        engine.read_trace_csv(bad)
