"""Acceptance criteria 1-10.

Run with pytest (one summary line per criterion is printed at the end) or
directly: ``python tests/test_acceptance.py [N ...]``.
"""
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from conftest import ACCEPTANCE_LINES, random_params, random_state  # noqa: E402
from semitrailer import InputSample, default_params, simulate, state_derivative  # noqa: E402
from semitrailer.dynamics import coupling_constraint_residual  # noqa: E402
from semitrailer.identification import (  # noqa: E402
    CostFunction, ParamSpace, PsoConfig, identify, normalized_cost, pso, refine,
)
from semitrailer.maneuvers import (  # noqa: E402
    ManeuverSpec, NoiseSpec, generate, identification_mix, synthesize_dataset, validation_sequence,
)
from semitrailer.model import lateral_tire_force_static, static_loads  # noqa: E402
from semitrailer.params import OUTPUT_NAMES, TireParams  # noqa: E402
from semitrailer.validation import REFERENCE_RMSE, display_unit, validate  # noqa: E402

SLALOM_10S = ManeuverSpec("slalom", 10.0, speed=40.0, amplitude=0.05, frequency=0.5, cycles=3, start=2.0)


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


def check_1():
    rng = np.random.default_rng(101)
    sets = [random_params(rng, spread=0.5) for _ in range(1000)]

    def run():
        worst = 0.0
        for p in sets:
            s11, s12, s2 = static_loads(p)
            total = (p.m_A1 + p.m_A2) * p.g
            worst = max(worst, abs(s11 + s12 + 6 * s2 - total) / total)
        return worst

    worst, secs = _timed(run)
    return worst <= 1e-12 and secs < 1.0, f"max rel error {worst:.2e} (<= 1e-12), {secs:.2f} s (< 1 s)"


def check_2():
    rng = np.random.default_rng(202)
    alpha = np.linspace(-math.pi / 2, math.pi / 2, 100_000)

    def run():
        odd = bound = slope_err = 0.0
        for _ in range(100):
            tire = TireParams(rng.uniform(0.3, 2.0), rng.uniform(1.05, 2.5), rng.uniform(5e4, 1e6),
                              rng.uniform(5e3, 1e5))
            fz = rng.uniform(1e3, 1e5)
            f = lateral_tire_force_static(tire, alpha, fz)
            odd = max(odd, np.max(np.abs(f + lateral_tire_force_static(tire, -alpha, fz))))
            bound = max(bound, np.max(np.abs(f)) / (tire.mu * fz))
            h = 1e-6
            fd = (lateral_tire_force_static(tire, h, fz) - lateral_tire_force_static(tire, -h, fz)) / (2 * h)
            exact = tire.c1 * math.sin(2 * math.atan(fz / tire.c2))
            slope_err = max(slope_err, abs(fd - exact) / exact)
        return odd, bound, slope_err

    (odd, bound, slope_err), secs = _timed(run)
    ok = odd == 0.0 and bound <= 1.0 and slope_err <= 1e-4 and secs < 5.0
    return ok, (f"oddness {odd:.1e}, max |F_y|/(mu F_z) {bound:.15f}, slope rel error {slope_err:.1e} "
                f"(<= 1e-4), {secs:.2f} s (< 5 s)")


def check_3():
    rng = np.random.default_rng(303)

    def run():
        worst = 0.0
        for _ in range(100):
            p = random_params(rng)
            x = random_state(rng)
            u = InputSample(0.0, rng.uniform(-0.2, 0.2), rng.uniform(3.0, 25.0), rng.uniform(-1.0, 1.0))
            xdot = state_derivative(x, u, p)
            worst = max(worst, np.max(np.abs(oracles.residual(x, xdot, (u.delta, u.v_x2, u.a_x2), p))))
        return worst

    worst, secs = _timed(run)
    return worst <= 1e-8 and secs < 5.0, f"max |residual| {worst:.2e} (<= 1e-8), {secs:.2f} s (< 5 s)"


def check_4():
    p = default_params()
    # inputs on the coarsest step's lattice so every run sees the same interpolant
    inputs = generate(ManeuverSpec(**{**SLALOM_10S.to_dict(), "sample_rate": 250.0}))

    def run():
        states = {dt: simulate(None, inputs, p, dt).states for dt in (4e-3, 2e-3, 1e-3)}
        # the recorded trajectories share the input sample times
        e_coarse = np.max(np.abs(states[4e-3] - states[2e-3]))
        e_fine = np.max(np.abs(states[2e-3] - states[1e-3]))
        return math.log2(e_coarse / e_fine)

    order, secs = _timed(run)
    return order >= 3.8 and secs < 30.0, f"observed order {order:.3f} (>= 3.8), {secs:.1f} s (< 30 s)"


def mirror_deviation(a, b) -> float:
    """Worst per-channel relative deviation of ``b`` from the mirror image of ``a``."""
    worst = 0.0
    for i in range(4):  # rates and articulation angle change sign
        worst = max(worst, np.max(np.abs(a[:, i] + b[:, i])) / np.max(np.abs(a[:, i])))
    for r, l in ((4, 5), (6, 7)):  # lateral forces change sign and side
        for i, j in ((r, l), (l, r)):
            worst = max(worst, np.max(np.abs(a[:, i] + b[:, j])) / np.max(np.abs(a[:, i])))
    for r, l in ((8, 9), (10, 11)):  # vertical forces change side
        for i, j in ((r, l), (l, r)):
            worst = max(worst, np.max(np.abs(a[:, i] - b[:, j])) / np.max(np.abs(a[:, i])))
    return worst


def check_5():
    p = default_params()
    inputs = generate(validation_sequence())

    def run():
        a = simulate(None, inputs, p, 1e-3).outputs
        b = simulate(None, inputs.mirrored(), p, 1e-3).outputs
        return mirror_deviation(a, b)

    worst, secs = _timed(run)
    return worst <= 1e-9 and secs < 30.0, f"max rel deviation {worst:.2e} (<= 1e-9), {secs:.1f} s (< 30 s)"


def check_6():
    p = default_params()
    # inputs sampled at the integration rate (see README: input resolution and drift)
    inputs = generate(validation_sequence(1000.0))

    def run():
        res = simulate(None, inputs, p, 1e-3)
        direct = np.max(np.abs(coupling_constraint_residual(res.states, inputs.v_x2, p)))
        return max(direct, res.diagnostics["constraint_drift_max"])

    drift, secs = _timed(run)
    return drift <= 1e-6 and secs < 10.0, f"max constraint residual {drift:.2e} m/s (<= 1e-6), {secs:.1f} s (< 10 s)"


def check_7():
    p = default_params()
    spec = ManeuverSpec("slalom", 10.0, speed=40.0, amplitude=0.05, frequency=0.5, cycles=3, sample_rate=50.0)
    data = synthesize_dataset(p, spec, None, dt=1e-3)
    space = ParamSpace.default()
    j_self = CostFunction(data, p, space, dt=1e-3, rate=50.0)(space.from_params(p))

    rng = np.random.default_rng(707)
    Y = rng.normal(size=(2000, 12)) * rng.uniform(1e-3, 1e4, 12) + rng.uniform(-1e3, 1e3, 12)
    j_mean = normalized_cost(Y, np.broadcast_to(Y.mean(axis=0), Y.shape))

    S = Y + 0.2 * rng.normal(size=Y.shape) * Y.std(axis=0)
    base = normalized_cost(Y, S)
    scale_err = 0.0
    for _ in range(20):
        c = 10.0 ** rng.uniform(-8, 8, 12)
        scale_err = max(scale_err, abs(normalized_cost(Y * c, S * c) - base) / base)
    ok = j_self <= 1e-6 and j_mean == 12.0 and scale_err <= 1e-12
    return ok, f"self J {j_self:.1e} (<= 1e-6), mean-predictor J {j_mean!r} (== 12), scale rel error {scale_err:.1e}"


def round_trip_identification(n_jobs: int = 1):
    truth = default_params()
    space = ParamSpace.default()
    train = synthesize_dataset(truth, identification_mix(), NoiseSpec.realistic(seed=81), dt=1e-3)
    costfn = CostFunction(train, truth, space, dt=0.02, rate=50.0)
    floor = costfn(space.from_params(truth))
    result = identify(train, truth, space, PsoConfig(swarm_size=30, max_iterations=60, seed=2024), restarts=8,
                      n_jobs=n_jobs, costfn=costfn)
    held_out = synthesize_dataset(truth, validation_sequence(), NoiseSpec.realistic(seed=82), dt=1e-3)
    report = validate(held_out, result.best_params(truth), dt=1e-2).report
    return floor, result, report


def rmse_bound(name: str) -> float | None:
    if name in REFERENCE_RMSE:
        return REFERENCE_RMSE[name]
    if name.startswith("F_y"):
        return REFERENCE_RMSE["F_y23L"]
    if name.startswith("F_z"):
        return REFERENCE_RMSE["F_z23L"]
    return None  # articulation angle has no anchor


def judge_round_trip(floor, result, report, secs):
    ratio = result.best_cost / floor
    shown = report.rmse_display()
    bounded = [n for n in OUTPUT_NAMES if rmse_bound(n) is not None]
    failures = [n for n in bounded if not shown[n] <= rmse_bound(n)]
    worst = max(bounded, key=lambda n: shown[n] / rmse_bound(n))
    ok = ratio <= 1.5 and not failures
    detail = (f"best J {result.best_cost:.5f} = {ratio:.3f} x noise floor {floor:.5f} (<= 1.5); held-out RMSE "
              f"worst channel {worst} {shown[worst]:.3f} {display_unit(worst)[0]} vs {rmse_bound(worst)}"
              f"{'; over: ' + ', '.join(failures) if failures else ''}; {secs / 60:.1f} min")
    return ok, detail


def check_8():
    (floor, result, report), secs = _timed(round_trip_identification)
    return judge_round_trip(floor, result, report, secs)


def sphere(p):
    return float(np.sum(np.asarray(p) ** 2))


def check_9():
    box = ParamSpace(tuple("abcde"), -5 * np.ones(5), 5 * np.ones(5))
    best = [pso(sphere, box, PsoConfig(swarm_size=30, max_iterations=150, seed=s)).cost for s in range(10)]
    median = float(np.median(best))
    center = np.array([1.3, -2.2, 0.7, 3.1, -4.0])
    weights = np.array([1.0, 5.0, 0.3, 2.0, 0.8])
    res = refine(lambda p: float(np.sum(weights * (np.asarray(p) - center) ** 2)),
                 center + np.array([0.5, -0.4, 1.0, -0.9, 0.6]), box)
    dist = float(np.max(np.abs(res.p - center)))
    return median <= 1e-3 and dist <= 1e-6, f"sphere median {median:.1e} (<= 1e-3), refine argmin error {dist:.1e}"


def check_10():
    truth = default_params()
    spec = ManeuverSpec("slalom", 10.0, speed=40.0, amplitude=0.05, frequency=0.5, cycles=3, start=2.0,
                        sample_rate=50.0)
    data = synthesize_dataset(truth, spec, NoiseSpec.realistic(seed=10), dt=1e-3)
    config = PsoConfig(swarm_size=8, max_iterations=5, seed=99)

    def run(n_jobs):
        res = identify(data, truth, config=config, restarts=3, dt=0.02, rate=50.0, n_jobs=n_jobs,
                       refine_iterations=3)
        return json.dumps(res.to_dict(), indent=2, sort_keys=True).encode()

    runs = [run(1), run(1), run(2)]
    ok = runs[0] == runs[1] == runs[2]
    return ok, f"identify JSON identical across 2 serial runs and 2 workers: {ok} ({len(runs[0])} bytes)"


CHECKS = {n: globals()[f"check_{n}"] for n in range(1, 11)}
TITLES = {
    1: "static-load conservation", 2: "tire-model properties", 3: "assembly residual oracle",
    4: "integrator order", 5: "mirror symmetry", 6: "constraint drift", 7: "cost identities",
    8: "round-trip identification", 9: "optimizer benchmarks", 10: "determinism",
}


def run_check(n: int) -> tuple[bool, str]:
    ok, detail = CHECKS[n]()
    return ok, f"criterion {n}: {'PASS' if ok else 'FAIL'} {TITLES[n]}: {detail}"


@pytest.mark.parametrize("n", [pytest.param(n, id=f"criterion_{n}", marks=[pytest.mark.slow] if n == 8 else [])
                               for n in CHECKS])
def test_criterion(n):
    ok, line = run_check(n)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    wanted = [int(a) for a in sys.argv[1:]] or list(CHECKS)
    results = []
    for n in wanted:
        ok, line = run_check(n)
        print(line, flush=True)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
