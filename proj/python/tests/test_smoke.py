import json
import os
from pathlib import Path

import pytest

import hydrotwin

SAMPLE = Path(os.environ.get("HYDROTWIN_DATA_DIR", Path(__file__).resolve().parents[2] / "data")) / "sample"


def sample_text(name):
    return (SAMPLE / name).read_text()


def test_ground_truth_at_the_selected_point():
    assert hydrotwin.true_energy(164.0, 0.20, 40.0) == pytest.approx(39.44, abs=1e-9)
    assert hydrotwin.true_quality(164.0, 0.20, 40.0) > 0.9


def test_errors_carry_their_code():
    with pytest.raises(hydrotwin.HydrotwinError) as info:
        hydrotwin.true_energy(200.0, 0.20, 40.0)
    assert info.value.code == "out_of_domain"


def test_oracle_selection():
    chosen = hydrotwin.select_operating_point(hydrotwin.oracle_model())["chosen"]
    assert chosen["op_point"] == {"temp_setpoint_c": 164.0, "dry_solids_frac": 0.2, "cycle_minutes": 40.0}
    assert chosen["feasible"]


def test_train_and_plan_match_the_golden_file():
    config = json.loads(sample_text("config.json"))
    trained = hydrotwin.train(sample_text("historian.csv"), config)
    assert [c["name"] for c in trained["ranking"]][0] == "gbt"
    rec = hydrotwin.plan(sample_text("historian.csv"), sample_text("weather.csv"), trained["model"], config)
    assert rec == json.loads(sample_text("golden_recommendation.json"))


def test_simulate_round_trips_through_the_parser():
    historian, weather = hydrotwin.simulate(96, seed=3)
    parsed = hydrotwin.parse_historian(historian)
    assert parsed["row_errors"] == []
    assert parsed["accepted_rows"] > 96 * 8
    assert weather.startswith("date,rainfall_mm")


def test_exact_solver_agrees_with_enumeration():
    problem = {
        "grid": {"start": "2024-03-01T00:00:00Z", "step_minutes": 15, "horizon_steps": 5},
        "reactors": [{"id": 1, "rate_pct_per_step": 4.0, "min_up_steps": 0, "min_down_steps": 0},
                     {"id": 2, "rate_pct_per_step": 3.0, "min_up_steps": 0, "min_down_steps": 0}],
        "initial_status": [False, True],
        "initial_level_pct": 55.0,
        "target_level_pct": 50.0,
        "inflow_forecast_pct": [5.0, 2.0, 7.5, 0.0, 4.0],
        "omega": 0.1,
    }
    exact = hydrotwin.solve(problem)
    brute = hydrotwin.solve(problem, exhaustive=True)
    assert exact["objective"] == pytest.approx(brute["objective"], abs=1e-9)


def test_closed_loop_report_shape():
    report = hydrotwin.evaluate(episodes=1, steps=24)
    assert set(report) >= {"plan", "baseline", "episodes"}
    assert report["plan"]["rms_deviation"] >= 0.0


def test_service_round_trip():
    svc = hydrotwin.Service(json.loads(sample_text("config.json")))
    assert svc.state()["state_version"] == 0
    svc.set_model(json.loads(sample_text("model.json")))
    svc.load_history(sample_text("historian.csv"), sample_text("weather.csv"))
    planned = svc.plan(horizon_steps=8)
    run = svc.operator_action(planned["run_id"], "accept")
    assert run["operator_action"]["kind"] == "accept"
    tick = svc.sim_tick(steps=2)
    assert tick["state_version"] == 4
    assert svc.runs(limit=1)["total"] == 1
    with pytest.raises(hydrotwin.HydrotwinError) as info:
        svc.operator_action(planned["run_id"], "accept")
    assert info.value.code == "conflict"
