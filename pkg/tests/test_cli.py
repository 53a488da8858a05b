import json
import math

import numpy as np
import pytest

from rodplan.cli import main, solution_from_json
from rodplan.scenario import (
    ScenarioError,
    ScenarioSpec,
    fixture_path,
    load_scenario,
    with_orders,
)


def fast_scenario_dict(**overrides):
    """Small, loose scenario that solves in a couple of seconds."""
    base = {
        "spec_version": 1,
        "name": "fast",
        "L": 0.6,
        "m": 2,
        "n": 2,
        "m_e": 4,
        "n_e": 4,
        "bounds": {
            "vmin": 0.5,
            "vmax": 1.5,
            "qmax": 0.5,
            "umax": 4 * math.pi,
            "wmax": math.pi,
            "vsmax": 8.0,
            "qtmax": 0.5,
        },
        "d_safe": 0.02,
        "epsilon": 1e-4,
        "p_des": [0.05, 0.1, 0.55],
        "phi_des": -0.2,
        "theta_des": 0.3,
        "psi_des": 0.1,
        "weights": {"w1": 10000.0, "w2": 10.0, "w3": 10.0, "w4": 10.0},
        "obstacles": [],
        "initial_configuration": {"type": "straight"},
        "solver": {"T_min": 1.0, "T_max": 30.0, "seed": 0},
        "tip_tol": 0.05,
    }
    base.update(overrides)
    return base


@pytest.fixture
def fast_scenario_path(tmp_path):
    path = tmp_path / "fast.json"
    path.write_text(json.dumps(fast_scenario_dict()))
    return str(path)


@pytest.fixture(scope="module")
def planned(tmp_path_factory):
    out = tmp_path_factory.mktemp("fastplan")
    scen = out / "fast.json"
    scen.write_text(json.dumps(fast_scenario_dict()))
    code = main(["plan", str(scen), "--out", str(out), "--grid", "41x41", "--quiet"])
    return code, out, scen


class TestScenarioSchema:
    def test_fixtures_load_and_round_trip(self):
        for name in ("case1", "case2", "case3"):
            spec = load_scenario(fixture_path(name))
            again = ScenarioSpec.from_json_dict(spec.to_json_dict())
            assert again.to_json_dict() == spec.to_json_dict()

    def test_table_values_case1(self):
        spec = load_scenario(fixture_path("case1"))
        b = spec.bounds
        assert (b.v_min, b.v_max, b.q_max) == (0.85, 1.15, 0.25)
        assert b.u_max == pytest.approx(2 * math.pi)
        assert b.omega_max == pytest.approx(math.pi / 4)
        assert (b.v_s_max, b.q_t_max) == (2.0, 0.075)
        assert (spec.w1, spec.w2, spec.w3, spec.w4) == (1e5, 1e3, 1e3, 100.0)
        np.testing.assert_allclose(spec.p_des, [0.1, 0.425, 0.55])
        assert spec.phi_des == pytest.approx(-math.pi / 4)
        assert spec.theta_des == pytest.approx(math.pi / 4)
        assert spec.psi_des == pytest.approx(3 * math.pi / 4)

    def test_table_values_case2_case3(self):
        c2 = load_scenario(fixture_path("case2"))
        assert (c2.bounds.v_min, c2.bounds.v_max) == (0.75, 1.25)
        assert c2.bounds.u_max == pytest.approx(2.5 * math.pi)
        assert c2.bounds.omega_max == pytest.approx(math.pi / 2)
        assert c2.bounds.v_s_max == 3.25
        assert (c2.w1, c2.w2, c2.w3, c2.w4) == (1e4, 100.0, 100.0, 0.0)
        np.testing.assert_allclose(c2.p_des, [0.0, 0.325, 0.3])
        assert len(c2.obstacles) == 2
        c3 = load_scenario(fixture_path("case3"))
        assert (c3.w1, c3.w4) == (1e4, 100.0)
        np.testing.assert_allclose(c3.p_des, [0.05, 0.375, 0.475])
        radii = [o.radius for o in c3.obstacles]
        assert radii == [0.15, 0.13, 0.20]
        np.testing.assert_allclose(c3.obstacles[0].center, [-0.115, 0.3, 0.65])

    def test_invalid_bounds_named(self, tmp_path):
        bad = fast_scenario_dict()
        bad["bounds"]["vmin"] = 2.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ScenarioError) as err:
            load_scenario(path)
        assert "bounds" in str(err.value)

    def test_missing_field_named(self, tmp_path):
        bad = fast_scenario_dict()
        del bad["p_des"]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ScenarioError) as err:
            load_scenario(path)
        assert err.value.field == "p_des"

    def test_initial_configuration_base_check(self, tmp_path):
        bad = fast_scenario_dict(
            initial_configuration={
                "type": "control_points",
                "p": [[0.1, 0, 0], [0, 0, 0.3], [0, 0, 0.6]],
                "phi": [0, 0, 0],
                "theta": [0, 0, 0],
                "psi": [0, 0, 0],
            }
        )
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        with pytest.raises(ScenarioError):
            load_scenario(path)

    def test_with_orders_elevates_control_point_initial(self):
        spec = load_scenario(fixture_path("case2"))
        up = with_orders(spec, 6, 6)
        assert up.m == 6 and up.m_e == 12
        p5 = np.asarray(spec.initial["p"])
        p6 = np.asarray(up.initial["p"])
        # elevated edge is the same polynomial: endpoints match exactly
        np.testing.assert_allclose(p6[0], p5[0], atol=1e-15)
        np.testing.assert_allclose(p6[-1], p5[-1], atol=1e-15)


class TestPlanCommand:
    def test_plan_writes_artifacts_and_passes(self, planned):
        code, out, _scen = planned
        assert code == 0
        for name in ("solution.json", "report.json", "trajectory.csv", "constraints.csv"):
            assert (out / name).exists()
        artifact = json.loads((out / "solution.json").read_text())
        assert artifact["verification"]["verdict"] == "pass"
        assert artifact["solver_report"]["status"] in ("optimal", "feasible-stalled")

    def test_trajectory_csv_shape(self, planned):
        _code, out, _scen = planned
        lines = (out / "trajectory.csv").read_text().strip().splitlines()
        assert lines[0] == "s,t,x,y,z,phi,theta,psi"
        assert len(lines) == 1 + 41 * 41

    def test_constraints_csv_bounds_columns(self, planned):
        _code, out, _scen = planned
        header = (out / "constraints.csv").read_text().splitlines()[0].split(",")
        assert header[:8] == ["s", "t", "v_sq", "q_sq", "u_sq", "w_sq", "a_sq", "at_sq"]
        assert header[-1] == "qtmax_sq"

    def test_schema_error_exit_2(self, tmp_path):
        bad = fast_scenario_dict()
        bad["bounds"]["vmin"] = 9.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(bad))
        assert main(["plan", str(path), "--out", str(tmp_path)]) == 2

    def test_missing_scenario_exit_4(self, tmp_path):
        assert main(["plan", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 4


class TestVerifyCommand:
    def test_round_trip_pass(self, planned):
        _code, out, scen = planned
        code = main(
            ["verify", str(out / "solution.json"), str(scen), "--grid", "41x41", "--quiet"]
        )
        assert code == 0

    def test_corrupted_solution_fails(self, planned, tmp_path):
        _code, out, scen = planned
        artifact = json.loads((out / "solution.json").read_text())
        artifact["surfaces"]["p"]["cps"][0][2][0] += 0.01  # break the base clamp
        bad = tmp_path / "bad_solution.json"
        bad.write_text(json.dumps(artifact))
        code = main(["verify", str(bad), str(scen), "--grid", "41x41", "--quiet"])
        assert code == 1

    def test_order_mismatch_exit_2(self, planned, tmp_path):
        _code, out, _scen = planned
        other = tmp_path / "other.json"
        other.write_text(json.dumps(fast_scenario_dict(m=3, n=3, m_e=6, n_e=6)))
        code = main(
            ["verify", str(out / "solution.json"), str(other), "--grid", "41x41", "--quiet"]
        )
        assert code == 2

    def test_missing_file_exit_4(self, planned, tmp_path):
        _code, _out, scen = planned
        assert main(["verify", str(tmp_path / "nope.json"), str(scen)]) == 4


class TestEvalCommand:
    def test_base_is_clamped(self, planned, capsys):
        _code, out, _scen = planned
        code = main(["eval", str(out / "solution.json"), "0.0", "1.0"])
        assert code == 0
        text = capsys.readouterr().out
        pos = json.loads(text.splitlines()[0].split("position: ")[1])
        assert max(abs(v) for v in pos) < 1e-6

    def test_matches_library_evaluation(self, planned, capsys):
        _code, out, _scen = planned
        artifact = json.loads((out / "solution.json").read_text())
        pose, _T = solution_from_json(artifact)
        code = main(["eval", str(out / "solution.json"), "0.3", "0.5"])
        assert code == 0
        pos = json.loads(capsys.readouterr().out.splitlines()[0].split("position: ")[1])
        np.testing.assert_allclose(pos, pose.p.evaluate(0.3, 0.5), atol=1e-12)

    def test_out_of_domain_exit_2(self, planned):
        _code, out, _scen = planned
        assert main(["eval", str(out / "solution.json"), "5.0", "0.0"]) == 2


class TestSweepCommand:
    def test_single_order_sweep(self, tmp_path):
        scen = tmp_path / "fast.json"
        scen.write_text(json.dumps(fast_scenario_dict()))
        code = main(
            ["sweep", str(scen), "--orders", "2", "--out", str(tmp_path), "--grid",
             "31x31", "--quiet"]
        )
        assert code == 0
        rows = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 2
        assert rows[0].startswith("m,n,cost")

    def test_error_isolation(self, tmp_path):
        # order 1 cannot host second derivatives; the row is flagged and the
        # sweep continues
        scen = tmp_path / "fast.json"
        scen.write_text(json.dumps(fast_scenario_dict()))
        code = main(
            ["sweep", str(scen), "--orders", "1,2", "--out", str(tmp_path), "--grid",
             "31x31", "--quiet"]
        )
        assert code == 0
        rows = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 3
        assert "error" in rows[1]
