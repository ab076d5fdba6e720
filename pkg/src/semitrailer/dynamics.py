"""Implicit state-space assembly ``M(x) xdot = f(x, u)``, RK4 integration and the output map.

Row layout of the assembled system (0-based):

====  ===========================================================
row   equation
====  ===========================================================
0     tractor yaw balance, kingpin force eliminated
1     trailer lateral balance, kingpin force eliminated
2     trailer yaw balance, kingpin force eliminated
3     trailer roll balance, kingpin force eliminated
4     time derivative of the coupling-point velocity constraint
5     articulation rate  theta' = yawrate_2 - yawrate_1
6     roll angle         kappa' = rollrate_2
7-14  first-order tire lag per wheel station
====  ===========================================================

The closed-form entries are listed in ``docs/model_equations.md``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from numba import njit

from .errors import DomainError, IntegrationError, SingularArticulationError
from .model import (
    ERR_ARTICULATION, ERR_ILL_CONDITIONED, ERR_NONFINITE, ERR_SLIP_DENOMINATOR,
    FLAG_LIFTOFF, FLAG_VX1_CLAMP, FLAG_VX2_CLAMP, N_FLAGS, OK, STATUS_MESSAGES,
    _slip_angles, _suspension, _tire_force, _vertical_loads, _vx1,
)
from .params import (
    N_OUTPUTS, N_STATES, OUTPUT_NAMES, P_B2, P_C1_2J, P_C1_11, P_C1_12, P_C2_2J,
    P_C2_11, P_C2_12, P_C2J, P_C11, P_C12, P_G, P_H_W2, P_H_WK, P_J_X2, P_J_Z1,
    P_J_Z2, P_L2J, P_L11, P_L12, P_L_H1, P_L_H21, P_L_K1, P_L_V1, P_L_V2, P_M_A1,
    P_M_A2, P_M_R1, P_M_R2, P_MU, STATE_NAMES, V_MIN, WHEELS, InputSample,
    OutputVector, VehicleParameters,
)

RCOND_ABORT = 1e-12
RCOND_WARN = 1e-8
_HALF_PI = 0.5 * math.pi


# -- compiled kernels --------------------------------------------------------------

@njit(cache=True)
def _assemble(x, delta, vx2, ax2, p, M, rhs, flags):
    for i in range(N_FLAGS):
        flags[i] = 0
    theta = x[6]
    if not abs(theta) < _HALF_PI:
        return ERR_ARTICULATION

    r1, kappa, vy2, rollrate, r2 = x[1], x[2], x[3], x[4], x[5]
    vx1 = _vx1(x, vx2, p)
    vx1_den = vx1
    if vx1_den < V_MIN:
        vx1_den = V_MIN
        flags[FLAG_VX1_CLAMP] = 1
    vx2_den = vx2
    if vx2_den < V_MIN:
        vx2_den = V_MIN
        flags[FLAG_VX2_CLAMP] = 1

    alpha = np.empty(8)
    status = _slip_angles(x, delta, vx1_den, vx2_den, p, alpha)
    if status != OK:
        return status
    fz = np.empty(8)
    _vertical_loads(x, p, fz)
    fd = np.empty(6)
    _suspension(kappa, rollrate, p, fd)

    mu = p[P_MU]
    fstat = np.empty(8)
    fstat[0] = _tire_force(mu, p[P_C11], p[P_C1_11], p[P_C2_11], alpha[0], fz[0])
    fstat[1] = _tire_force(mu, p[P_C12], p[P_C1_12], p[P_C2_12], alpha[1], fz[1])
    for i in range(2, 8):
        fstat[i] = _tire_force(mu, p[P_C2J], p[P_C1_2J], p[P_C2_2J], alpha[i], fz[i])
    for i in range(8):
        if fz[i] <= 0.0:
            flags[FLAG_LIFTOFF + i] = 1

    m_a2 = p[P_M_A2]
    m1 = 4.0 * p[P_M_R1] + p[P_M_A1]
    m2 = 6.0 * p[P_M_R2] + m_a2
    l_k1 = p[P_L_K1]
    l_v2 = p[P_L_V2]
    h_w2 = p[P_H_W2]
    h_wk = p[P_H_WK]
    cth = math.cos(theta)
    sth = math.sin(theta)
    ck = math.cos(kappa)
    sk = math.sin(kappa)
    cd = math.cos(delta)

    f11 = x[7]
    f12 = x[8]
    # F_Ky*cos(theta) = base - m1*vy1'
    base = f11 * cd + f12 - m1 * vx1 * r1
    sum_fy2 = 0.0
    yaw_fy2 = 0.0
    for j in range(3):
        pair = x[9 + 2 * j] + x[10 + 2 * j]
        sum_fy2 += pair
        yaw_fy2 += pair * p[P_L_H21 + j]

    for i in range(N_STATES):
        for j in range(N_STATES):
            M[i, j] = 0.0

    M[0, 0] = m1 * l_k1
    M[0, 1] = p[P_J_Z1]
    rhs[0] = f11 * cd * p[P_L_V1] - f12 * p[P_L_H1] + base * l_k1

    M[1, 0] = m1 / cth
    M[1, 3] = m2
    M[1, 4] = m_a2 * h_w2
    rhs[1] = sum_fy2 + base / cth - m2 * vx2 * r2

    M[2, 0] = m1 * l_v2 / cth
    M[2, 5] = p[P_J_Z2]
    rhs[2] = base * l_v2 / cth - yaw_fy2

    M[3, 0] = -m1 * h_wk * ck / cth
    M[3, 3] = -m_a2 * h_w2 * ck
    M[3, 4] = p[P_J_X2]
    rhs[3] = ((vx2 * r2 * ck + p[P_G] * sk) * m_a2 * h_w2
              + 0.5 * p[P_B2] * (-fd[0] + fd[1] - fd[2] + fd[3] - fd[4] + fd[5])
              - base * h_wk * ck / cth)

    M[4, 0] = 1.0
    M[4, 1] = -l_k1
    M[4, 3] = -cth
    M[4, 5] = -l_v2 * cth
    M[4, 6] = -(vx2 * cth - (vy2 + r2 * l_v2) * sth)
    rhs[4] = ax2 * sth

    M[5, 6] = 1.0
    rhs[5] = r2 - r1

    M[6, 2] = 1.0
    rhs[6] = rollrate

    rate_front = vx1_den / p[P_L11]
    rate_rear = vx1_den / p[P_L12]
    rate_trailer = vx2_den / p[P_L2J]
    for i in range(8):
        M[7 + i, 7 + i] = 1.0
    rhs[7] = rate_front * (fstat[0] - f11)
    rhs[8] = rate_rear * (fstat[1] - f12)
    for i in range(2, 8):
        rhs[7 + i] = rate_trailer * (fstat[i] - x[7 + i])
    return OK


@njit(cache=True)
def _solve(M, rhs, out):
    """Row-equilibrated Gaussian elimination with partial pivoting.

    Returns a cheap reciprocal-condition estimate (smallest over largest pivot
    magnitude of the equilibrated system), 0.0 if singular.
    """
    n = rhs.shape[0]
    A = M.copy()
    b = rhs.copy()
    for i in range(n):
        s = 0.0
        for j in range(n):
            if abs(A[i, j]) > s:
                s = abs(A[i, j])
        if s == 0.0:
            return 0.0
        for j in range(n):
            A[i, j] /= s
        b[i] /= s
    pmin = np.inf
    pmax = 0.0
    for k in range(n):
        piv = k
        amax = abs(A[k, k])
        for i in range(k + 1, n):
            if abs(A[i, k]) > amax:
                amax = abs(A[i, k])
                piv = i
        if amax == 0.0:
            return 0.0
        if piv != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[piv, j]
                A[piv, j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        pmin = min(pmin, amax)
        pmax = max(pmax, amax)
        akk = A[k, k]
        for i in range(k + 1, n):
            if A[i, k] != 0.0:
                m = A[i, k] / akk
                for j in range(k + 1, n):
                    A[i, j] -= m * A[k, j]
                b[i] -= m * b[k]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, n):
            s -= A[i, j] * out[j]
        out[i] = s / A[i, i]
    return pmin / pmax


@njit(cache=True)
def _derivative(x, delta, vx2, ax2, p, xdot, flags):
    M = np.empty((N_STATES, N_STATES))
    rhs = np.empty(N_STATES)
    status = _assemble(x, delta, vx2, ax2, p, M, rhs, flags)
    if status != OK:
        return status, 0.0
    rcond = _solve(M, rhs, xdot)
    if not rcond >= RCOND_ABORT:
        return ERR_ILL_CONDITIONED, rcond
    return OK, rcond


@njit(cache=True)
def _outputs(x, p, out):
    fz = np.empty(8)
    _vertical_loads(x, p, fz)
    out[0] = x[1]
    out[1] = x[5]
    out[2] = x[4]
    out[3] = x[6]
    out[4] = x[9]
    out[5] = x[10]
    out[6] = x[13]
    out[7] = x[14]
    out[8] = fz[2]
    out[9] = fz[3]
    out[10] = fz[6]
    out[11] = fz[7]


@njit(cache=True)
def _interp(t_in, u_in, t, hint, out):
    n = t_in.shape[0]
    i = hint
    while i < n - 2 and t > t_in[i + 1]:
        i += 1
    while i > 0 and t < t_in[i]:
        i -= 1
    w = (t - t_in[i]) / (t_in[i + 1] - t_in[i])
    if w < 0.0:
        w = 0.0
    elif w > 1.0:
        w = 1.0
    for c in range(3):
        out[c] = (1.0 - w) * u_in[i, c] + w * u_in[i + 1, c]
    return i


@njit(cache=True)
def _rk4_step(x, t, dt, t_in, u_in, p, hint, x_new, flags, rcond_min):
    """One classical RK4 step; stage-1 flags are left in ``flags``."""
    u = np.empty(3)
    k1 = np.empty(N_STATES)
    k2 = np.empty(N_STATES)
    k3 = np.empty(N_STATES)
    k4 = np.empty(N_STATES)
    xs = np.empty(N_STATES)
    stage_flags = np.empty(N_FLAGS, dtype=np.int64)

    hint = _interp(t_in, u_in, t, hint, u)
    status, rc = _derivative(x, u[0], u[1], u[2], p, k1, flags)
    rcond_min[0] = min(rcond_min[0], rc)
    if status != OK:
        return status, hint
    for i in range(N_STATES):
        xs[i] = x[i] + 0.5 * dt * k1[i]
    hint = _interp(t_in, u_in, t + 0.5 * dt, hint, u)
    status, rc = _derivative(xs, u[0], u[1], u[2], p, k2, stage_flags)
    rcond_min[0] = min(rcond_min[0], rc)
    if status != OK:
        return status, hint
    for i in range(N_STATES):
        xs[i] = x[i] + 0.5 * dt * k2[i]
    status, rc = _derivative(xs, u[0], u[1], u[2], p, k3, stage_flags)
    rcond_min[0] = min(rcond_min[0], rc)
    if status != OK:
        return status, hint
    for i in range(N_STATES):
        xs[i] = x[i] + dt * k3[i]
    hint = _interp(t_in, u_in, t + dt, hint, u)
    status, rc = _derivative(xs, u[0], u[1], u[2], p, k4, stage_flags)
    rcond_min[0] = min(rcond_min[0], rc)
    if status != OK:
        return status, hint
    for i in range(N_STATES):
        x_new[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if not np.isfinite(x_new[i]):
            return ERR_NONFINITE, hint
    return OK, hint


@njit(cache=True)
def _integrate(x0, t_in, u_in, p, dt, rec_steps, states, outputs, counts, rcond_stats):
    """Fixed-step RK4 from t_in[0]; records at the integration steps listed in ``rec_steps``.

    Returns (status, failing step index). ``rcond_stats`` holds
    [min reciprocal condition, number of steps below the warning threshold].
    """
    x = x0.copy()
    x_new = np.empty(N_STATES)
    flags = np.empty(N_FLAGS, dtype=np.int64)
    rc = np.empty(1)
    n_rec = rec_steps.shape[0]
    n_steps = rec_steps[n_rec - 1]
    t0 = t_in[0]
    j = 0
    hint = 0
    for k in range(n_steps + 1):
        if j < n_rec and k == rec_steps[j]:
            for i in range(N_STATES):
                states[j, i] = x[i]
            _outputs(x, p, outputs[j])
            j += 1
        if k == n_steps:
            break
        rc[0] = np.inf
        status, hint = _rk4_step(x, t0 + k * dt, dt, t_in, u_in, p, hint, x_new, flags, rc)
        if rc[0] < rcond_stats[0]:
            rcond_stats[0] = rc[0]
        if rc[0] < RCOND_WARN:
            rcond_stats[1] += 1.0
        if status != OK:
            return status, k
        for i in range(N_FLAGS):
            counts[i] += flags[i]
        for i in range(N_STATES):
            x[i] = x_new[i]
    return OK, n_steps


@njit(cache=True)
def _liftoff_mask(states, p):
    n = states.shape[0]
    mask = np.zeros((n, 8), dtype=np.bool_)
    fz = np.empty(8)
    for k in range(n):
        _vertical_loads(states[k], p, fz)
        for i in range(8):
            mask[k, i] = fz[i] <= 0.0
    return mask


# -- types -------------------------------------------------------------------------

@dataclass(frozen=True)
class InputTrajectory:
    """Sampled inputs (steer angle, trailer speed, trailer acceleration); linear in between."""

    t: np.ndarray
    delta: np.ndarray
    v_x2: np.ndarray
    a_x2: np.ndarray

    def __post_init__(self):
        arrays = [np.ascontiguousarray(a, dtype=np.float64) for a in (self.t, self.delta, self.v_x2, self.a_x2)]
        for name, a in zip(("t", "delta", "v_x2", "a_x2"), arrays):
            object.__setattr__(self, name, a)
            if a.ndim != 1 or a.shape != arrays[0].shape:
                raise ValueError("input channels must be 1-D arrays of equal length")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"input channel {name!r} contains non-finite values")
        if self.t.size < 2 or np.any(np.diff(self.t) <= 0.0):
            raise ValueError("input time stamps must be strictly increasing (>= 2 samples)")

    def __len__(self) -> int:
        return self.t.size

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def matrix(self) -> np.ndarray:
        return np.column_stack([self.delta, self.v_x2, self.a_x2])

    def at(self, t: float) -> InputSample:
        if not self.t[0] <= t <= self.t[-1]:
            raise ValueError(f"t={t} outside input horizon [{self.t[0]}, {self.t[-1]}]")
        return InputSample(float(t), *(float(np.interp(t, self.t, a)) for a in (self.delta, self.v_x2, self.a_x2)))

    def mirrored(self) -> "InputTrajectory":
        return InputTrajectory(self.t, -self.delta, self.v_x2, self.a_x2)


class AssembledSystem(NamedTuple):
    M: np.ndarray
    rhs: np.ndarray
    flags: np.ndarray

    def rcond(self) -> float:
        return _solve(self.M, self.rhs, np.empty(N_STATES))


@dataclass
class SimulationResult:
    t: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def output(self, name: str) -> np.ndarray:
        return self.outputs[:, OUTPUT_NAMES.index(name)]

    def state(self, name: str) -> np.ndarray:
        return self.states[:, STATE_NAMES.index(name)]

    def to_csv(self, path: str | Path) -> None:
        """Header ``t``, the 15 state names, then the 12 output names (outputs prefixed ``y_``)."""
        header = ["t", *STATE_NAMES, *(f"y_{n}" for n in OUTPUT_NAMES)]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(self.t.size):
                w.writerow([repr(float(v)) for v in (self.t[i], *self.states[i], *self.outputs[i])])

    def write_diagnostics(self, path: str | Path, extra: dict | None = None) -> None:
        doc = {k: v for k, v in self.diagnostics.items() if k != "liftoff_mask"}
        if extra:
            doc.update(extra)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


# -- public API ------------------------------------------------------------------

def _raise_status(status: int, t: float = float("nan"), state=None):
    if status == ERR_ARTICULATION:
        raise SingularArticulationError(STATUS_MESSAGES[status])
    if status == ERR_SLIP_DENOMINATOR:
        raise DomainError(STATUS_MESSAGES[status])
    raise IntegrationError(STATUS_MESSAGES[status], t, state)


def assemble(x, u: InputSample, params: VehicleParameters) -> AssembledSystem:
    """Mass matrix and right-hand side of the implicit model at (x, u)."""
    x = np.asarray(x, dtype=np.float64)
    M = np.empty((N_STATES, N_STATES))
    rhs = np.empty(N_STATES)
    flags = np.zeros(N_FLAGS, dtype=np.int64)
    status = _assemble(x, float(u.delta), float(u.v_x2), float(u.a_x2), params.to_array(), M, rhs, flags)
    if status != OK:
        _raise_status(status, getattr(u, "t", float("nan")), x)
    return AssembledSystem(M, rhs, flags)


def state_derivative(x, u: InputSample, params: VehicleParameters) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    xdot = np.empty(N_STATES)
    flags = np.zeros(N_FLAGS, dtype=np.int64)
    status, _ = _derivative(x, float(u.delta), float(u.v_x2), float(u.a_x2), params.to_array(), xdot, flags)
    if status != OK:
        _raise_status(status, getattr(u, "t", float("nan")), x)
    return xdot


def output(x, u: InputSample | None, params: VehicleParameters) -> OutputVector:
    """Measured-output map; depends on the state only, ``u`` is accepted for symmetry."""
    out = np.empty(N_OUTPUTS)
    _outputs(np.asarray(x, dtype=np.float64), params.to_array(), out)
    return OutputVector(*out.tolist())


def step_rk4(x, inputs: InputTrajectory, t: float, dt: float, params: VehicleParameters) -> np.ndarray:
    """Advance ``x`` from ``t`` to ``t + dt`` with one classical Runge-Kutta step."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if t < inputs.t[0] or t + dt > inputs.t[-1] * (1 + 1e-12) + 1e-12:
        raise ValueError(f"step [{t}, {t + dt}] leaves the input horizon")
    x = np.asarray(x, dtype=np.float64)
    x_new = np.empty(N_STATES)
    flags = np.zeros(N_FLAGS, dtype=np.int64)
    rc = np.array([np.inf])
    status, _ = _rk4_step(x, float(t), float(dt), inputs.t, inputs.matrix(), params.to_array(), 0, x_new, flags, rc)
    if status != OK:
        _raise_status(status, t, x)
    return x_new


def _record_steps(t: np.ndarray, dt: float) -> np.ndarray:
    s = (t - t[0]) / dt
    steps = np.rint(s)
    if np.max(np.abs(s - steps)) > 1e-6:
        raise ValueError(f"input sample times are not on the integration grid of dt={dt}")
    steps = steps.astype(np.int64)
    if np.any(np.diff(steps) <= 0):
        raise ValueError("dt is coarser than the input sample spacing")
    return steps


def coupling_constraint_residual(states: np.ndarray, v_x2, params: VehicleParameters) -> np.ndarray:
    """Velocity mismatch of both bodies at the kingpin (zero for consistent states)."""
    s = np.atleast_2d(states)
    return (s[:, 0] - s[:, 1] * params.l_k1 - np.asarray(v_x2) * np.sin(s[:, 6])
            - (s[:, 3] + s[:, 5] * params.l_v2) * np.cos(s[:, 6]))


def simulate(x0, inputs: InputTrajectory, params: VehicleParameters, dt: float = 1e-3) -> SimulationResult:
    """Fixed-step RK4 over the input horizon; states and outputs recorded at the input samples.

    Input sample times must lie on the integration grid ``t0 + k*dt``.
    ``x0=None`` starts from the straight-running equilibrium.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    params.validate()
    x0 = np.zeros(N_STATES) if x0 is None else np.array(x0, dtype=np.float64)
    if x0.shape != (N_STATES,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite 15-vector")
    rec = _record_steps(inputs.t, dt)
    n = inputs.t.size
    p = params.to_array()
    states = np.empty((n, N_STATES))
    outputs = np.empty((n, N_OUTPUTS))
    counts = np.zeros(N_FLAGS, dtype=np.int64)
    rcond_stats = np.array([np.inf, 0.0])
    status, k = _integrate(x0, inputs.t, inputs.matrix(), p, float(dt), rec, states, outputs, counts, rcond_stats)
    if status != OK:
        t_fail = inputs.t[0] + k * dt
        last = int(np.searchsorted(rec, k, side="right")) - 1
        raise IntegrationError(STATUS_MESSAGES.get(status, "integration failed"), t_fail,
                               states[last].copy() if last >= 0 else x0)
    mask = _liftoff_mask(states, p)
    drift = coupling_constraint_residual(states, inputs.v_x2, params)
    lifted_any = mask.any(axis=1)
    diagnostics = {
        "dt": float(dt),
        "steps": int(rec[-1]),
        "liftoff_steps": {w: int(counts[FLAG_LIFTOFF + i]) for i, w in enumerate(WHEELS)},
        "first_liftoff_time": float(inputs.t[np.argmax(lifted_any)]) if lifted_any.any() else None,
        "vx1_clamp_steps": int(counts[FLAG_VX1_CLAMP]),
        "vx2_clamp_steps": int(counts[FLAG_VX2_CLAMP]),
        "min_rcond": float(rcond_stats[0]),
        "condition_warnings": int(rcond_stats[1]),
        "constraint_drift_max": float(np.max(np.abs(drift))),
        "liftoff_mask": mask,
    }
    return SimulationResult(inputs.t.copy(), states, outputs, diagnostics)


def consistent_state(params: VehicleParameters, v_x2: float, **values: float) -> np.ndarray:
    """State with the given entries whose ``v_y1`` satisfies the kingpin velocity constraint."""
    if "v_y1" in values:
        raise ValueError("v_y1 is determined by the constraint")
    x = np.zeros(N_STATES)
    for name, v in values.items():
        x[STATE_NAMES.index(name)] = v
    th = x[6]
    x[0] = x[1] * params.l_k1 + v_x2 * math.sin(th) + (x[3] + x[5] * params.l_v2) * math.cos(th)
    return x

