import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semitrailer import InvalidParameterError, simulate
from semitrailer.maneuvers import (
    KMH, PRESETS, VALIDATION_SECTIONS, ManeuverSpec, NoiseSpec, generate, identification_mix, preset,
    synthesize_dataset, validation_sequence,
)
from semitrailer.params import OUTPUT_NAMES, V_MIN

speeds = st.one_of(st.floats(5.0, 80.0),
                   st.lists(st.floats(5.0, 80.0), min_size=2, max_size=5).map(
                       lambda vs: tuple((4.0 * i, v) for i, v in enumerate(vs))))


def specs():
    slalom = st.builds(lambda a, f, s: ManeuverSpec("slalom", 30.0, speed=s, amplitude=a, frequency=f, cycles=4),
                       st.floats(-0.2, 0.2), st.floats(0.2, 1.0), speeds)
    dlc = st.builds(lambda a, f, h, s: ManeuverSpec("double-lane-change", 30.0, speed=s, amplitude=a, frequency=f,
                                                    hold=h),
                    st.floats(-0.2, 0.2), st.floats(0.2, 1.0), st.floats(0.0, 3.0), speeds)
    turn = st.builds(lambda a, r, h, s: ManeuverSpec("constant-turn", 30.0, speed=s, amplitude=a, rise_time=r,
                                                     hold=h),
                     st.floats(-0.2, 0.2), st.floats(0.2, 3.0), st.floats(0.0, 10.0), speeds)
    return st.one_of(slalom, dlc, turn)


def test_zero_amplitude_slalom_is_straight():
    inp = generate(ManeuverSpec("slalom", 20.0, amplitude=0.0, frequency=0.5, cycles=4))
    assert np.all(inp.delta == 0.0)


@pytest.mark.parametrize("bad", [
    dict(kind="slalom", duration=10.0, frequency=0.0, amplitude=0.1),
    dict(kind="double-lane-change", duration=10.0, frequency=0.0),
    dict(kind="slalom", duration=0.0, frequency=0.5),
    dict(kind="constant-turn", duration=10.0, speed=1.0),
    dict(kind="wiggle", duration=10.0),
    dict(kind="constant-turn", duration=5.0, hold=10.0),
    dict(kind="piecewise", duration=5.0),
])
def test_invalid_specs(bad):
    with pytest.raises(InvalidParameterError):
        ManeuverSpec(**bad).validate()


def test_validation_sequence_timeline():
    spec = validation_sequence()
    inp = generate(spec)
    assert inp.duration == pytest.approx(115.0)
    t, v = inp.t, inp.v_x2 / KMH

    def window(a, b):
        return (t >= a) & (t <= b)

    assert np.allclose(v[window(0, 40)], 15.0)
    assert np.allclose(v[window(46, 62)], 30.0)
    assert np.allclose(v[window(67, 81)], 18.0)
    assert np.allclose(v[window(87, 115)], 40.0)
    # I: lane changes with both steer signs; II: right turn from about 50 s; III: left turn; IV: lane changes
    d = inp.delta
    assert d[window(0, 40)].max() > 0.1 and d[window(0, 40)].min() < -0.1
    assert np.all(d[window(40, 49.9)] == 0.0) and d[window(50, 63)].min() < -0.09
    assert d[window(63, 81)].min() >= 0.0 and d[window(63, 81)].max() > 0.2
    assert d[window(81, 115)].max() > 0.0 and d[window(81, 115)].min() < 0.0
    assert list(VALIDATION_SECTIONS) == ["I", "II", "III", "IV"]


def test_validation_sequence_plausible_response(params):
    inp = generate(validation_sequence())
    res = simulate(None, inp, params, 1e-3)
    t = res.t
    # lateral acceleration of the trailer stays below 4 m/s^2
    a_y = np.gradient(res.state("v_y2"), t) + inp.v_x2 * res.state("yawrate_2")
    assert np.max(np.abs(a_y)) < 4.0
    # section III turns the combination by roughly half a revolution
    m = (t >= 63.0) & (t <= 81.0)
    heading = np.degrees(np.trapezoid(res.output("yawrate_1")[m], t[m]))
    assert 160.0 < heading < 200.0
    assert not any(res.diagnostics["liftoff_steps"].values())


def test_double_lane_change_has_no_net_heading():
    spec = ManeuverSpec("double-lane-change", 20.0, amplitude=0.1, frequency=0.4, hold=1.5, speed=30.0,
                        sample_rate=1000.0)
    inp = generate(spec)
    integral = np.trapezoid(inp.delta, inp.t)
    assert abs(integral) <= 0.01 * 0.1 * 20.0


@settings(max_examples=30)
@given(specs())
def test_profile_invariants(spec):
    spec = spec.validate()
    inp = generate(spec)
    assert np.all(inp.v_x2 >= V_MIN)
    amp = abs(spec.amplitude)
    assert np.max(np.abs(inp.delta)) <= amp * (1 + 1e-12) + 1e-15
    # supplied acceleration agrees with a central difference of the speed to O(h^2)
    h = 1.0 / spec.sample_rate
    fd = (inp.v_x2[2:] - inp.v_x2[:-2]) / (2 * h)
    # truncation bound h^2/6 * max|v'''|, with v''' estimated from the supplied acceleration
    jerk_rate = np.max(np.abs(np.diff(inp.a_x2, 2))) / h**2
    assert np.max(np.abs(fd - inp.a_x2[1:-1])) <= 2 * h**2 / 6 * jerk_rate + 1e-9


def test_steer_and_speed_are_c1():
    inp = generate(validation_sequence(1000.0))
    h = 1e-3
    for sig in (inp.delta, inp.v_x2):
        slope = np.diff(sig) / h
        assert np.max(np.abs(np.diff(slope))) < 1e-2  # no slope jumps


def test_spec_json_round_trip(tmp_path):
    for name in PRESETS:
        spec = preset(name)
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(spec.to_dict()))
        again = ManeuverSpec.from_json(path)
        assert again == spec
        assert np.array_equal(generate(again).delta, generate(spec).delta)


def test_unknown_preset_names_options():
    with pytest.raises(InvalidParameterError, match="validation-sequence"):
        preset("zigzag")


def test_synthesis_without_noise_is_exact(params):
    spec = ManeuverSpec("constant-turn", 6.0, speed=25.0, amplitude=0.08, hold=1.0, sample_rate=100.0)
    ds = synthesize_dataset(params, spec, None, dt=1e-3)
    sim = simulate(None, generate(spec), params, 1e-3)
    for i, name in enumerate(OUTPUT_NAMES):
        assert np.array_equal(ds[name].values, sim.outputs[:, i])
    assert ds.metadata["source"] == "synthetic" and ds.metadata["noise"]["seed"] == 0


def test_noise_statistics(params):
    spec = ManeuverSpec("slalom", 100.0, speed=30.0, amplitude=0.0, frequency=0.5, cycles=4)
    sigma = 150.0
    ds = synthesize_dataset(params, spec, NoiseSpec({"F_z21R": sigma}, seed=9), dt=1e-2)
    values = ds["F_z21R"].values
    assert values.size >= 10_000
    assert np.std(values) == pytest.approx(sigma, rel=0.05)


def test_synthesis_deterministic(params):
    spec = ManeuverSpec("slalom", 8.0, speed=30.0, amplitude=0.03, frequency=0.5, cycles=2)
    a = synthesize_dataset(params, spec, NoiseSpec.realistic(4), dt=1e-2)
    b = synthesize_dataset(params, spec, NoiseSpec.realistic(4), dt=1e-2)
    c = synthesize_dataset(params, spec, NoiseSpec.realistic(5), dt=1e-2)
    assert all(np.array_equal(a[n].values, b[n].values) for n in OUTPUT_NAMES)
    assert not np.array_equal(a["yawrate_1"].values, c["yawrate_1"].values)


def test_noise_spec_validation():
    with pytest.raises(InvalidParameterError):
        NoiseSpec({"yawrate_1": -1.0})
    with pytest.raises(InvalidParameterError):
        NoiseSpec({"speed": 1.0})
    real = NoiseSpec.realistic()
    assert real.std["yawrate_1"] == pytest.approx(np.radians(0.1))
    assert real.std["F_y21R"] == 200.0


def test_identification_mix_content():
    spec = identification_mix()
    assert spec.duration == 60.0
    assert {s.kind for s in spec.segments} == {"slalom", "double-lane-change", "constant-turn"}
    inp = generate(spec)
    assert np.all(inp.delta[inp.t <= 2.0] == 0.0)
