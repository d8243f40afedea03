import numpy as np
import pytest

from qmarket.fpl import InitialState, Trajectory, time_grid
from qmarket.scenarios import (
    CASES,
    SUBCASES,
    Numerics,
    ScenarioError,
    ScenarioId,
    calibrate_lambda,
    delta_pi_range,
    iter_ids,
    no_transaction,
    resolve_scenario,
    run_grid,
    run_scenario,
    validity_scan,
)
from qmarket.schedules import custom_schedule


def _traj(grid, dn, dk):
    zero = np.zeros_like(grid)
    return Trajectory(grid, zero, zero.astype(complex), dn, dk, zero.copy())


def test_parse_ids():
    assert ScenarioId.parse("Ia/P1") == ScenarioId("I", "a", "P1")
    assert ScenarioId.parse("VId/P4") == ScenarioId("VI", "d", "P4")
    assert ScenarioId.parse("IVb", "P3") == ScenarioId("IV", "b", "P3")
    assert str(ScenarioId("III", "c", "P2")) == "IIIc/P2"
    for bad in ("VIIa", "Ie/P1", "Ia/P9", "a/P1", ""):
        with pytest.raises(ScenarioError):
            ScenarioId.parse(bad)


def test_resolve_registry_values():
    params, init, sched = resolve_scenario("Ia/P1")
    assert (params.omega_a, params.omega_c, params.Omega_A, params.Omega_C) == (1, 1, 1, 1)
    assert params.f1 == 1e-3
    assert (init.n, init.k, init.k_res, init.n_res, init.M) == (0, 20, 20, 100, 2)
    assert sched.kind == "P1"
    params, init, sched = resolve_scenario("VId/P4")
    assert (params.omega_a, params.omega_c, params.Omega_A, params.Omega_C) == (1, 3, 2, 7)
    assert (init.n, init.k, init.k_res, init.n_res, init.M) == (0, 80, 80, 100, 2)
    assert sched.kind == "P4"


def test_cash_order_conventions():
    _, lit, _ = resolve_scenario("Ib/P1", cash_order="literal")
    _, tab, _ = resolve_scenario("Ib/P1", cash_order="table")
    assert (lit.k, lit.k_res) == (80, 20)
    assert (tab.k, tab.k_res) == (20, 80)
    # table-order b is literal-order c
    a = run_scenario("IIIb/P4", Numerics(lam=0.1))
    b = run_scenario("IIIc/P4", Numerics(lam=0.1), cash_order="literal")
    assert a.delta_pi.tobytes() == b.delta_pi.tobytes()
    with pytest.raises(ScenarioError):
        resolve_scenario("Ia/P1", cash_order="reversed")


def test_run_shape():
    t = run_scenario("IIc/P3", Numerics(step=1e-3, horizon=6.0, lam=0.2))
    assert len(t.grid) == 6001 == len(t.delta_pi)
    assert t.delta_pi[0] == 0
    t2 = run_scenario("IIc/P3", Numerics(step=0.004, horizon=5.0, lam=0.2))
    assert len(t2.grid) == round(5.0 / 0.004) + 1


def test_custom_schedule_scenario():
    sched = custom_schedule([(0, 0), (2, 3), (6, 1)])
    t = run_scenario(ScenarioId("V", "a", "custom"), Numerics(lam=0.1), custom=sched)
    assert t.price[2000] == pytest.approx(3.0)
    with pytest.raises(ScenarioError):
        run_scenario(ScenarioId("V", "a", "custom"), Numerics(lam=0.1))


def test_numerics_validation():
    with pytest.raises(ScenarioError):
        Numerics(step=0)
    with pytest.raises(ScenarioError):
        Numerics(lam=-1)


def test_validity_zero_trajectory():
    g = time_grid(6.0, 1e-3)
    rep = validity_scan(_traj(g, np.zeros_like(g), np.zeros_like(g)), InitialState(0, 20, 100, 20, 2))
    assert rep.full and rep.valid_horizon == "full" and rep.violations == []
    assert rep.mask(g).all()


def test_validity_share_crossing():
    g = time_grid(6.0, 1e-3)
    rep = validity_scan(_traj(g, 200 * g, np.zeros_like(g)), InitialState(0, 20, 100, 20, 2))
    assert abs(rep.t_f - 0.5) <= 1e-3 * (1 + 1e-9)
    assert rep.violations[0][1] == "n"
    assert not rep.mask(g)[-1] and rep.mask(g)[0]


def test_validity_all_bounds_sorted():
    g = time_grid(6.0, 1e-3)
    init = InitialState(1, 5, 10, 8, 1)
    dn = np.where(g > 4, -3.0, 0.0)
    dk = np.where(g > 2, 9.0, 0.0) - np.where(g > 5, 30.0, 0.0)
    rep = validity_scan(_traj(g, dn, dk), init)
    names = [v[1] for v in rep.violations]
    times = [v[0] for v in rep.violations]
    assert names == ["delta_k", "delta_n", "k"]
    assert times == sorted(times)
    assert rep.t_f == times[0]


def test_ranges_and_no_transaction():
    g = time_grid(1.0, 0.1)
    t = _traj(g, np.zeros_like(g), np.zeros_like(g))
    assert delta_pi_range(t) == (0.0, 0.0)
    assert no_transaction(t)


def test_grid_shape_and_order():
    rows = run_grid(numerics=Numerics(step=0.01, lam=0.1))
    assert len(rows) == 96
    assert [r.scenario for r in rows[:8]] == ["Ia"] * 4 + ["Ib"] * 4
    assert [r.schedule for r in rows[:4]] == ["P1", "P2", "P3", "P4"]
    assert rows[-1].scenario == "VId"


def test_single_cell_matches_run():
    (row,) = run_grid(["I"], ["a"], ["P1"], Numerics(lam=0.3))
    t = run_scenario("Ia/P1", Numerics(lam=0.3))
    assert (row.min, row.max) == delta_pi_range(t)


def test_grid_null_interaction():
    for r in run_grid(numerics=Numerics(step=0.01, lam=0.0)):
        assert (r.min, r.max) == (0.0, 0.0) and r.t_f is None


def test_grid_empty_selection():
    with pytest.raises(ScenarioError):
        run_grid([], ["a"], ["P1"])


def test_iter_ids():
    assert len(iter_ids("all")) == 96
    assert len(iter_ids(["Ia", "IIb/P3"])) == 5
    assert len(iter_ids("all", ["P2"])) == 24


def test_calibration_hits_target():
    lam = calibrate_lambda(4.0, "Ia/P1")
    assert run_scenario("Ia/P1", Numerics(lam=lam)).delta_pi.max() == pytest.approx(4.0, rel=1e-9)


def test_no_transaction_cells(calibrated_grid):
    # cells with |delta n|, |delta k| < 1 over the whole horizon
    for label in ("IIIa", "Va", "VIa"):
        assert calibrated_grid[label, "P1"][0].no_transaction
    for label in ("IIIa", "IVa", "Va", "VIa"):
        assert calibrated_grid[label, "P2"][0].no_transaction
    assert not calibrated_grid["Id", "P2"][0].no_transaction


def test_delta_n_nonnegative(calibrated_grid):
    for row, traj in calibrated_grid.values():
        assert traj.delta_n.min() >= -1e-6, row


def test_flat_price_segments(calibrated_grid):
    flats = {"P2": [(0, 1), (3, 6)], "P3": [(0, 1), (3, 6)], "P4": [(0, 1), (4, 6)]}
    for (label, sched), (row, traj) in calibrated_grid.items():
        for a, b in flats.get(sched, []):
            seg = traj.delta_pi[int(round(a * 1000)) : int(round(b * 1000)) + 1]
            assert np.ptp(seg) < 1e-6 * max(1.0, np.abs(traj.delta_pi).max()), (label, sched)


def test_sign_law(calibrated_grid):
    for (label, sched), (row, traj) in calibrated_grid.items():
        s = traj.meta["schedule"]
        h = traj.grid[1] - traj.grid[0]
        slope = np.diff(traj.delta_pi) / h
        mid = 0.5 * (traj.grid[1:] + traj.grid[:-1])
        pdot = s.slope(traj.grid[:-1])
        sel = s.smooth_mask(mid) & (np.abs(slope) > 1e-6)
        assert np.all(np.sign(slope[sel]) == np.sign(pdot[sel])), (label, sched)


def test_grid_refinement(calibrated_lambda):
    coarse = run_grid(numerics=Numerics(step=1e-3, lam=calibrated_lambda))
    fine = run_grid(numerics=Numerics(step=5e-4, lam=calibrated_lambda))
    for a, b in zip(coarse, fine):
        big_a = max(abs(a.min), abs(a.max))
        big_b = max(abs(b.min), abs(b.max))
        assert abs(big_a - big_b) < 1e-4 * big_a, a


def test_grid_is_pure():
    a = run_grid(["II"], ["c"], ["P4"], Numerics(lam=0.1))
    b = run_grid(["II"], ["c"], ["P4"], Numerics(lam=0.1))
    assert a == b
