"""Output-error identification of the tire, suspension and roll-axis parameters.

A global-best particle swarm searches the normalized parameter box, an SQP
step with central finite-difference gradients polishes the swarm's best, and
the whole procedure is repeated from independent seeds; the lowest-cost
restart wins.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .dataset import ANALYSIS_RATE, MeasurementDataset
from .dynamics import simulate
from .errors import DomainError, IntegrationError, InvalidParameterError
from .params import IDENTIFIABLE, VehicleParameters

log = logging.getLogger(__name__)

PENALTY = 1e6
FD_RELATIVE_STEP = 1e-4


# -- search space ----------------------------------------------------------------

@dataclass(frozen=True)
class ParamSpace:
    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.shape != (len(self.names),) or hi.shape != lo.shape:
            raise InvalidParameterError("bounds must match the parameter names")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
            raise InvalidParameterError("bounds must be finite with lower < upper")
        if len(set(self.names)) != len(self.names):
            raise InvalidParameterError("duplicate parameter names")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @classmethod
    def from_bounds(cls, bounds: Mapping[str, Sequence[float]], names: Sequence[str] | None = None) -> "ParamSpace":
        if names is None:
            names = [n for n in IDENTIFIABLE if n in bounds] + sorted(set(bounds) - set(IDENTIFIABLE))
        return cls(tuple(names), np.array([bounds[n][0] for n in names]), np.array([bounds[n][1] for n in names]))

    @classmethod
    def default(cls) -> "ParamSpace":
        doc = json.loads(resources.files("semitrailer.data").joinpath("bounds_default.json").read_text())
        return cls.from_bounds(doc, IDENTIFIABLE)

    def to_params(self, vector, fixed: VehicleParameters) -> VehicleParameters:
        return fixed.with_values(dict(zip(self.names, np.asarray(vector, dtype=float).tolist())))

    def from_params(self, params: VehicleParameters) -> np.ndarray:
        flat = params.to_flat()
        return np.array([flat[n] for n in self.names])

    def normalize(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.lower) / self.span

    def denormalize(self, z) -> np.ndarray:
        return self.lower + np.asarray(z, dtype=float) * self.span

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def to_dict(self) -> dict:
        return {n: [float(lo), float(hi)] for n, lo, hi in zip(self.names, self.lower, self.upper)}


# -- cost ------------------------------------------------------------------------

def normalized_cost(measured: np.ndarray, simulated: np.ndarray, names: Sequence[str] | None = None) -> float:
    """Sum over channels of ||y_m - y||^2 / ||y_m - mean(y_m)||^2.

    Channels whose measurement has zero variance are skipped with a warning.
    """
    measured = np.asarray(measured, dtype=float)
    simulated = np.asarray(simulated, dtype=float)
    if measured.shape != simulated.shape:
        raise ValueError(f"shape mismatch {measured.shape} vs {simulated.shape}")
    J = 0.0
    for l in range(measured.shape[1]):
        ym = measured[:, l]
        den = float(np.sum((ym - np.mean(ym)) ** 2))
        if den == 0.0:
            label = names[l] if names else str(l)
            warnings.warn(f"measured channel {label} has zero variance; excluded from the cost", stacklevel=2)
            continue
        J += float(np.sum((ym - simulated[:, l]) ** 2)) / den
    return J


class CostFunction:
    """Picklable ``p -> J`` over one or more datasets (costs are summed).

    Each dataset is put on a uniform ``rate`` grid once; the model starts from
    the straight-running equilibrium at the first sample.
    """

    def __init__(self, datasets: MeasurementDataset | Sequence[MeasurementDataset], fixed: VehicleParameters,
                 space: ParamSpace, dt: float = 1e-2, rate: float = ANALYSIS_RATE, penalty: float = PENALTY):
        if isinstance(datasets, MeasurementDataset):
            datasets = [datasets]
        self.fixed = fixed
        self.space = space
        self.dt = float(dt)
        self.penalty = float(penalty)
        self.grids = [ds.on_grid(rate) for ds in datasets]
        for inputs, _ in self.grids:
            lead = inputs.t <= inputs.t[0] + 2.0
            if np.max(np.abs(inputs.delta[lead])) > 1e-3:
                warnings.warn("dataset does not start with 2 s of straight driving; "
                              "zero initial state may bias the cost", stacklevel=2)

    def params(self, p) -> VehicleParameters:
        return self.space.to_params(p, self.fixed)

    def evaluate(self, params: VehicleParameters) -> float:
        """Cost of a full parameter set; simulation errors propagate."""
        return sum(normalized_cost(Y, simulate(None, inputs, params, self.dt).outputs)
                   for inputs, Y in self.grids)

    def __call__(self, p) -> float:
        try:
            J = self.evaluate(self.params(p).validate())
        except (IntegrationError, DomainError, InvalidParameterError):
            return self.penalty
        return J if math.isfinite(J) else self.penalty


def cost(p_candidate, dataset: MeasurementDataset, fixed: VehicleParameters, dt: float = 1e-2,
         space: ParamSpace | None = None, rate: float | None = None) -> float:
    """Normalized output-error cost of ``p_candidate`` (ordered as ``space.names``) on ``dataset``.

    The comparison grid defaults to 100 Hz, or 1/dt when the step is coarser.
    """
    rate = rate or min(ANALYSIS_RATE, 1.0 / dt)
    return CostFunction(dataset, fixed, space or ParamSpace.default(), dt, rate)(p_candidate)


# -- particle swarm --------------------------------------------------------------

@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 50
    max_iterations: int = 150
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    velocity_clamp: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise InvalidParameterError("swarm_size must be >= 2")
        if self.max_iterations < 1:
            raise InvalidParameterError("max_iterations must be >= 1")
        if min(self.inertia, self.cognitive, self.social, self.velocity_clamp) <= 0.0:
            raise InvalidParameterError("PSO coefficients must be positive")


class PsoResult(NamedTuple):
    p_best: np.ndarray
    cost: float
    history: np.ndarray
    n_evaluations: int


def pso(costfn: Callable[[np.ndarray], float], space: ParamSpace, config: PsoConfig = PsoConfig(),
        evaluator: Callable = map) -> PsoResult:
    """Global-best particle swarm on the box ``space``.

    The swarm lives in normalized coordinates; ``history[0]`` is the best
    initial cost and ``history[i]`` the swarm best after iteration ``i``.
    ``evaluator`` maps the cost over a list of points (``map`` or a pool's
    ``map``); results are consumed in order, so the outcome does not depend
    on scheduling.
    """
    rng = np.random.default_rng(config.seed)
    n, dim = config.swarm_size, space.dim
    vmax = config.velocity_clamp
    z = rng.uniform(0.0, 1.0, size=(n, dim))
    v = rng.uniform(-vmax, vmax, size=(n, dim))

    def evaluate(points):
        vals = np.fromiter(evaluator(costfn, list(space.denormalize(points))), dtype=float, count=len(points))
        return np.where(np.isfinite(vals), vals, np.inf)

    f = evaluate(z)
    if not np.any(np.isfinite(f)):
        raise RuntimeError("cost is non-finite for every initial particle")
    pbest, pbest_f = z.copy(), f.copy()
    g = int(np.argmin(pbest_f))
    gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
    history = [gbest_f]
    for _ in range(config.max_iterations):
        r1 = rng.uniform(size=(n, dim))
        r2 = rng.uniform(size=(n, dim))
        v = (config.inertia * v + config.cognitive * r1 * (pbest - z) + config.social * r2 * (gbest - z))
        np.clip(v, -vmax, vmax, out=v)
        z = np.clip(z + v, 0.0, 1.0)
        f = evaluate(z)
        better = f < pbest_f
        pbest[better] = z[better]
        pbest_f[better] = f[better]
        g = int(np.argmin(pbest_f))
        if pbest_f[g] < gbest_f:
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        history.append(gbest_f)
    return PsoResult(space.denormalize(gbest), gbest_f, np.array(history), n * (config.max_iterations + 1))


# -- local refinement ------------------------------------------------------------

class RefineResult(NamedTuple):
    p: np.ndarray
    cost: float
    initial_cost: float
    progress: bool
    n_evaluations: int
    message: str


def refine(costfn: Callable[[np.ndarray], float], p0, space: ParamSpace, max_iterations: int = 100,
           ftol: float = 1e-12, rel_step: float = FD_RELATIVE_STEP) -> RefineResult:
    """Bound-constrained SQP (SLSQP) from ``p0`` with central-difference gradients.

    Works in normalized coordinates. The best point evaluated is returned, so
    the cost never exceeds ``costfn(p0)``; ``progress`` is False when nothing
    better than ``p0`` was found.
    """
    p0 = np.clip(np.asarray(p0, dtype=float), space.lower, space.upper)
    z0 = space.normalize(p0)
    best = {"z": z0.copy(), "f": float(costfn(p0))}
    f0 = best["f"]
    nfev = [1]

    def f(z):
        z = np.clip(z, 0.0, 1.0)
        val = float(costfn(space.denormalize(z)))
        nfev[0] += 1
        if val < best["f"]:
            best["z"], best["f"] = z.copy(), val
        return val

    def grad(z):
        z = np.clip(z, 0.0, 1.0)
        p = space.denormalize(z)
        h = rel_step * np.where(np.abs(p) > 0.0, np.abs(p), space.span) / space.span
        g = np.empty_like(z)
        for i in range(z.size):
            up = z.copy()
            dn = z.copy()
            up[i] = min(z[i] + h[i], 1.0)
            dn[i] = max(z[i] - h[i], 0.0)
            g[i] = (f(up) - f(dn)) / (up[i] - dn[i])
        return g

    if not math.isfinite(f0):
        return RefineResult(p0, f0, f0, False, nfev[0], "initial cost not finite")
    try:
        res = minimize(f, z0, jac=grad, method="SLSQP", bounds=[(0.0, 1.0)] * z0.size,
                       options={"maxiter": max_iterations, "ftol": ftol})
        message = str(res.message)
    except (ValueError, ArithmeticError) as exc:
        message = f"line search failed: {exc}"
    progress = best["f"] < f0
    if not progress:
        return RefineResult(p0, f0, f0, False, nfev[0], message)
    return RefineResult(space.denormalize(best["z"]), best["f"], f0, True, nfev[0], message)


# -- multi-restart identification ----------------------------------------------------

def restart_seeds(master_seed: int, restarts: int) -> list[int]:
    """Independent per-restart seeds derived from one master seed."""
    return [int(s.generate_state(1, dtype=np.uint32)[0]) for s in np.random.SeedSequence(master_seed).spawn(restarts)]


@dataclass
class RestartOutcome:
    seed: int
    pso_p: np.ndarray
    pso_cost: float
    p: np.ndarray
    cost: float
    history: np.ndarray
    refine_progress: bool
    n_evaluations: int


def _run_restart(costfn, space: ParamSpace, config: PsoConfig, seed: int, refine_iterations: int) -> RestartOutcome:
    cfg = replace(config, seed=seed)
    sw = pso(costfn, space, cfg)
    ref = refine(costfn, sw.p_best, space, max_iterations=refine_iterations)
    return RestartOutcome(seed, sw.p_best, sw.cost, ref.p, ref.cost, sw.history, ref.progress,
                          sw.n_evaluations + ref.n_evaluations)


def _run_restart_packed(args):
    return _run_restart(*args)


@dataclass
class IdentificationResult:
    names: tuple[str, ...]
    best_p: np.ndarray
    best_cost: float
    restart_costs: np.ndarray
    pso_costs: np.ndarray
    histories: list[np.ndarray]
    seeds: list[int]
    refine_progress: list[bool]
    config: dict = field(default_factory=dict)

    @property
    def best_restart(self) -> int:
        return int(np.argmin(self.restart_costs))

    @property
    def refinement_ratio(self) -> np.ndarray:
        """Relative cost reduction achieved by refinement, per restart."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.pso_costs > 0, (self.pso_costs - self.restart_costs) / self.pso_costs, 0.0)

    def best_params(self, fixed: VehicleParameters) -> VehicleParameters:
        return fixed.with_values(dict(zip(self.names, self.best_p.tolist())))

    def to_dict(self) -> dict:
        return {
            "best": {"parameters": dict(zip(self.names, self.best_p.tolist())), "cost": self.best_cost,
                     "restart": self.best_restart},
            "restart_costs": self.restart_costs.tolist(),
            "pso_costs": self.pso_costs.tolist(),
            "refinement_ratio": self.refinement_ratio.tolist(),
            "refine_progress": list(self.refine_progress),
            "seeds": list(self.seeds),
            "history": [h.tolist() for h in self.histories],
            "config": self.config,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def identify(datasets: MeasurementDataset | Sequence[MeasurementDataset], fixed: VehicleParameters,
             space: ParamSpace | None = None, config: PsoConfig = PsoConfig(), restarts: int = 60,
             dt: float = 1e-2, rate: float = ANALYSIS_RATE, n_jobs: int = 1,
             refine_iterations: int = 100, costfn: Callable | None = None) -> IdentificationResult:
    """Repeat swarm search + refinement ``restarts`` times and keep the cheapest result.

    ``config.seed`` is the master seed. Restarts are independent and may run
    in ``n_jobs`` processes; results are collected in restart order, so the
    outcome is identical for any worker count.
    """
    if restarts < 1:
        raise InvalidParameterError("restarts must be >= 1")
    space = space or ParamSpace.default()
    costfn = costfn or CostFunction(datasets, fixed, space, dt, rate)
    seeds = restart_seeds(config.seed, restarts)
    jobs = [(costfn, space, config, s, refine_iterations) for s in seeds]
    if n_jobs > 1 and restarts > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_run_restart_packed, jobs))
    else:
        outcomes = []
        for i, job in enumerate(jobs):
            outcomes.append(_run_restart_packed(job))
            log.info("restart %d/%d: J=%.6g", i + 1, restarts, outcomes[-1].cost)
    costs = np.array([o.cost for o in outcomes])
    if not np.any(costs < PENALTY):
        raise RuntimeError("all identification restarts failed")
    best = int(np.argmin(costs))
    return IdentificationResult(
        names=space.names,
        best_p=outcomes[best].p,
        best_cost=float(costs[best]),
        restart_costs=costs,
        pso_costs=np.array([o.pso_cost for o in outcomes]),
        histories=[o.history for o in outcomes],
        seeds=seeds,
        refine_progress=[o.refine_progress for o in outcomes],
        config={"pso": asdict(config), "restarts": restarts, "dt": dt, "rate": rate,
                "space": space.to_dict(), "refine_iterations": refine_iterations},
    )
