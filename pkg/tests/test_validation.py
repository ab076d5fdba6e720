import csv
import json

import numpy as np
import pytest

from semitrailer.identification import CostFunction, ParamSpace
from semitrailer.maneuvers import VALIDATION_SECTIONS, NoiseSpec, synthesize_dataset, validation_sequence
from semitrailer.params import OUTPUT_NAMES
from semitrailer.validation import REFERENCE_RMSE, display_unit, validate


@pytest.fixture(scope="module")
def sequence_clean(params):
    return synthesize_dataset(params, validation_sequence(100.0), None, dt=1e-3)


@pytest.fixture(scope="module")
def sequence_noisy(params):
    return synthesize_dataset(params, validation_sequence(100.0), NoiseSpec.realistic(12), dt=1e-3)


def test_self_consistency_near_zero(sequence_clean, params):
    run = validate(sequence_clean, params, VALIDATION_SECTIONS, dt=1e-3)
    assert max(run.report.rmse.values()) <= 1e-6
    assert run.report.cost <= 1e-12


def test_coarser_step_bounded_by_integrator_error(sequence_clean, params):
    run = validate(sequence_clean, params, dt=1e-2)
    for name, value in run.report.rmse.items():
        scale = np.max(np.abs(sequence_clean[name].values))
        assert value <= 1e-5 * scale


def test_noise_floor_oracle(sequence_noisy, params):
    run = validate(sequence_noisy, params, dt=1e-3)
    std = NoiseSpec.realistic().std
    for name in OUTPUT_NAMES:
        assert 0.9 * std[name] <= run.report.rmse[name] <= 1.1 * std[name]


def test_sections_follow_reporting_structure(sequence_noisy, params):
    run = validate(sequence_noisy, params, VALIDATION_SECTIONS, dt=1e-2)
    rep = run.report
    assert list(rep.sections) == ["I", "II", "III", "IV"]
    assert rep.section_windows["III"] == (63.0, 81.0)
    for label, values in rep.sections.items():
        assert set(values) == set(OUTPUT_NAMES)
        assert all(v >= 0.0 for v in values.values())


def test_report_cost_equals_identification_cost(sequence_noisy, params):
    space = ParamSpace.default()
    J_id = CostFunction(sequence_noisy, params, space, dt=1e-2, rate=100.0)(space.from_params(params))
    J_val = validate(sequence_noisy, params, dt=1e-2).report.cost
    assert J_val == pytest.approx(J_id, rel=1e-12)


def test_section_outside_span(sequence_clean, params):
    with pytest.raises(ValueError, match="outside"):
        validate(sequence_clean, params, {"late": (100.0, 130.0)}, dt=1e-2)


def test_display_units():
    assert display_unit("yawrate_1") == ("deg/s", pytest.approx(57.29577951308232))
    assert display_unit("theta")[0] == "deg"
    assert display_unit("F_z23L") == ("kN", 1e-3)


def test_reference_fixture_values():
    assert REFERENCE_RMSE == {"yawrate_1": 0.76, "yawrate_2": 0.39, "rollrate_2": 0.5, "F_y21R": 0.74,
                              "F_z21R": 1.34, "F_y23L": 0.79, "F_z23L": 1.87}


def test_report_artifacts(tmp_path, sequence_noisy, params):
    run = validate(sequence_noisy, params, VALIDATION_SECTIONS, dt=1e-2)
    run.report.to_json(tmp_path / "report.json")
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["rmse_display"]["yawrate_1"] == pytest.approx(np.degrees(doc["rmse_si"]["yawrate_1"]))
    assert doc["units_display"]["F_y21R"] == "kN"
    assert doc["reference_rmse_display"]["F_z23L"] == 1.87
    assert doc["config"]["dt"] == 1e-2 and "parameters" in doc["config"]
    paths = run.write_plot_data(tmp_path / "plots")
    assert len(paths) == 12
    with open(tmp_path / "plots" / "theta.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "measured", "simulated"] and len(rows) == run.t.size + 1
    table = run.report.format_table()
    assert "yawrate_1" in table and "0.76" in table and "cost J" in table
