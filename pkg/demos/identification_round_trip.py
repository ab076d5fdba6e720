"""Recover tire and suspension parameters from synthetic measurements.

    python demos/identification_round_trip.py [restarts] [jobs]

A known vehicle drives the 60 s identification mix; its outputs get sensor
noise and become the "measurement". The search starts from nothing but the
parameter bounds. A held-out drive through the validation sequence then
shows whether the fit generalizes. Defaults are scaled down to run in a few
minutes; the acceptance suite uses 8 restarts with a 30 x 60 swarm.
"""
import sys
import time

from semitrailer import default_params
from semitrailer.identification import CostFunction, ParamSpace, PsoConfig, identify
from semitrailer.maneuvers import NoiseSpec, identification_mix, synthesize_dataset, validation_sequence
from semitrailer.validation import validate

restarts = int(sys.argv[1]) if len(sys.argv) > 1 else 2
jobs = int(sys.argv[2]) if len(sys.argv) > 2 else 1

truth = default_params()
space = ParamSpace.default()
train = synthesize_dataset(truth, identification_mix(), NoiseSpec.realistic(seed=1), dt=1e-3)

# Coarser integration and a 50 Hz comparison grid keep each cost evaluation cheap.
costfn = CostFunction(train, truth, space, dt=0.02, rate=50.0)
floor = costfn(space.from_params(truth))
print(f"cost of the true parameters (noise floor): {floor:.5f}")

start = time.perf_counter()
result = identify(train, truth, space, PsoConfig(swarm_size=30, max_iterations=40, seed=7),
                  restarts=restarts, n_jobs=jobs, refine_iterations=40, costfn=costfn)
print(f"{restarts} restarts in {time.perf_counter() - start:.0f} s")
for i, (j_pso, j) in enumerate(zip(result.pso_costs, result.restart_costs)):
    print(f"  restart {i}: swarm {j_pso:.5f} -> refined {j:.5f}")
print(f"best cost {result.best_cost:.5f} ({result.best_cost / floor:.2f} x noise floor)")

# Parameters that barely affect the outputs are recovered loosely; the
# cost, not the parameter error, is what the fit is judged on.
best = result.best_params(truth)
true_p = space.from_params(truth)
print(f"{'parameter':22s} {'true':>12s} {'identified':>12s} {'error %':>8s}")
for name, a, b in zip(space.names, true_p, result.best_p):
    print(f"{name:22s} {a:12.5g} {b:12.5g} {100 * (b - a) / a:8.1f}")

held_out = synthesize_dataset(truth, validation_sequence(), NoiseSpec.realistic(seed=2), dt=1e-3)
report = validate(held_out, best).report
print()
print(report.format_table())
