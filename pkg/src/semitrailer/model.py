"""Constituent physics: static loads, suspension and vertical forces, slip angles, tire model.

The scalar kernels (leading underscore) are compiled with numba and operate on
the flat parameter array from :meth:`VehicleParameters.to_array`. They are the
single implementation used by both the public functions below and the
integrator in :mod:`semitrailer.dynamics`.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit, vectorize

from .errors import DomainError, InvalidParameterError, SingularArticulationError
from .params import (
    P_B2, P_D, P_G, P_H_W2, P_K, P_L_H1, P_L_H21, P_L_H22, P_L_K1, P_L_V1, P_L_V2,
    P_M_A1, P_M_A2, P_M_R1, P_M_R2, V_MIN,
    TireParams, VehicleParameters,
)

# kernel status codes
OK = 0
ERR_ARTICULATION = 1
ERR_SLIP_DENOMINATOR = 2
ERR_ILL_CONDITIONED = 3
ERR_NONFINITE = 4

STATUS_MESSAGES = {
    ERR_ARTICULATION: "articulation angle reached +-pi/2",
    ERR_SLIP_DENOMINATOR: "non-positive wheel longitudinal speed in slip-angle denominator",
    ERR_ILL_CONDITIONED: "mass matrix singular or ill-conditioned",
    ERR_NONFINITE: "non-finite state",
}

# flag slots written by the kernels
FLAG_VX1_CLAMP = 0
FLAG_VX2_CLAMP = 1
FLAG_LIFTOFF = 2  # 8 slots, wheel order 11, 12, 21R, 21L, 22R, 22L, 23R, 23L
N_FLAGS = 10

_HALF_PI = 0.5 * math.pi


@njit(cache=True)
def _static_loads(p):
    g = p[P_G]
    e = p[P_L_H22] + p[P_L_V2]
    f = p[P_L_V1] + p[P_L_H1]
    m_a1 = p[P_M_A1]
    m_a2 = p[P_M_A2]
    f11 = (m_a1 * p[P_L_H1] * e + m_a2 * p[P_L_H22] * (p[P_L_H1] - p[P_L_K1])) * g / (e * f)
    f12 = (m_a1 * p[P_L_V1] * e + m_a2 * p[P_L_H22] * (p[P_L_V1] + p[P_L_K1])) * g / (e * f)
    f2j = m_a2 * g * p[P_L_V2] / (6.0 * e)
    return f11, f12, f2j


@njit(cache=True)
def _mtfm_b(mu, C, c1, c2, fz):
    return c1 * math.sin(2.0 * math.atan(fz / c2)) / (C * mu * fz)


@njit(cache=True)
def _tire_force(mu, C, c1, c2, alpha, fz):
    if fz <= 0.0:
        return 0.0
    B = _mtfm_b(mu, C, c1, c2, fz)
    return mu * fz * math.sin(C * math.atan(B * alpha))


@vectorize(["float64(float64, float64, float64, float64, float64, float64)"], cache=True)
def _tire_force_ufunc(mu, C, c1, c2, alpha, fz):
    return _tire_force(mu, C, c1, c2, alpha, fz)


@njit(cache=True)
def _vx1(x, vx2, p):
    th = x[6]
    return vx2 * math.cos(th) - (x[3] + x[5] * p[P_L_V2]) * math.sin(th)


@njit(cache=True)
def _slip_angles(x, delta, vx1, vx2, p, out):
    """Write the eight slip angles into ``out``; returns a status code."""
    vy1 = x[0]
    r1 = x[1]
    vy2 = x[3]
    rollrate = x[4]
    r2 = x[5]
    out[0] = delta - math.atan((vy1 + r1 * p[P_L_V1]) / vx1)
    out[1] = -math.atan((vy1 - r1 * p[P_L_H1]) / vx1)
    half_b = 0.5 * p[P_B2]
    den_r = vx2 + r2 * half_b
    den_l = vx2 - r2 * half_b
    if den_r <= 0.0 or den_l <= 0.0:
        return ERR_SLIP_DENOMINATOR
    roll_term = rollrate * p[P_H_W2]
    for j in range(3):
        num = vy2 - r2 * p[P_L_H21 + j] + roll_term
        out[2 + 2 * j] = -math.atan(num / den_r)
        out[3 + 2 * j] = -math.atan(num / den_l)
    return OK


@njit(cache=True)
def _suspension(kappa, rollrate, p, out):
    """Six spring-damper forces, order 21R, 21L, 22R, 22L, 23R, 23L."""
    f2j = _static_loads(p)[2]
    half_b = 0.5 * p[P_B2]
    dyn = kappa * half_b * p[P_K] + rollrate * half_b * p[P_D]
    for j in range(3):
        out[2 * j] = f2j + dyn
        out[2 * j + 1] = f2j - dyn


@njit(cache=True)
def _vertical_loads(x, p, out):
    """Vertical tire loads, wheel order 11, 12, 21R, ..., 23L (tractor values per axle)."""
    f11, f12, _ = _static_loads(p)
    wheel_tractor = 2.0 * p[P_M_R1] * p[P_G]
    out[0] = f11 + wheel_tractor
    out[1] = f12 + wheel_tractor
    fd = np.empty(6)
    _suspension(x[2], x[4], p, fd)
    wheel_trailer = p[P_M_R2] * p[P_G]
    for i in range(6):
        out[2 + i] = fd[i] + wheel_trailer


# -- public API ------------------------------------------------------------------

def _as_array(params: VehicleParameters | np.ndarray) -> np.ndarray:
    if isinstance(params, VehicleParameters):
        return params.to_array()
    return np.asarray(params, dtype=np.float64)


def static_loads(params: VehicleParameters) -> tuple[float, float, float]:
    """Static wheel loads (F_stat11, F_stat12, F_stat2j) in N.

    The trailer load is shared equally by all six trailer wheel stations
    (air suspension); F_stat11/F_stat12 are tractor axle loads.
    """
    if params.e <= 0.0 or params.f <= 0.0:
        raise InvalidParameterError(f"degenerate geometry: e={params.e}, f={params.f}")
    return _static_loads(params.to_array())


def suspension_forces(params: VehicleParameters, kappa: float, rollrate: float) -> np.ndarray:
    """Spring-damper forces of the trailer, order 21R, 21L, 22R, 22L, 23R, 23L."""
    static_loads(params)
    out = np.empty(6)
    _suspension(float(kappa), float(rollrate), params.to_array(), out)
    return out


def vertical_tire_forces(params: VehicleParameters, F_FD) -> np.ndarray:
    """Trailer wheel loads: suspension force plus the unsprung wheel weight (not clamped)."""
    return np.asarray(F_FD, dtype=float) + params.m_R2 * params.g


def mtfm_b(tire: TireParams, F_z):
    """Stiffness factor B of the simplified Magic Formula at load ``F_z``."""
    fz = np.asarray(F_z, dtype=float)
    if np.any(fz <= 0.0):
        raise DomainError("stiffness factor undefined for F_z <= 0 (wheel lift-off)")
    b = tire.c1 * np.sin(2.0 * np.arctan(fz / tire.c2)) / (tire.C * tire.mu * fz)
    return float(b) if b.ndim == 0 else b


def lateral_tire_force_static(tire: TireParams, alpha, F_z, with_flag: bool = False):
    """Steady-state lateral force ``mu*F_z*sin(C*arctan(B*alpha))``.

    Loads ``F_z <= 0`` give zero force; with ``with_flag`` the lift-off mask
    is returned alongside the force.
    """
    alpha = np.asarray(alpha, dtype=float)
    fz = np.asarray(F_z, dtype=float)
    force = _tire_force_ufunc(tire.mu, tire.C, tire.c1, tire.c2, alpha, fz)
    if np.ndim(force) == 0:
        force = float(force)
    if with_flag:
        lifted = fz <= 0.0
        return force, (bool(lifted) if lifted.ndim == 0 else lifted)
    return force


def cornering_stiffness(tire: TireParams, F_z):
    """Slope of the lateral force at zero slip, ``c1*sin(2*arctan(F_z/c2))``."""
    return tire.c1 * np.sin(2.0 * np.arctan(np.asarray(F_z, dtype=float) / tire.c2))


def tractor_longitudinal_velocity(x, v_x2: float, params: VehicleParameters, with_flag: bool = False):
    """Tractor speed from the shared coupling-point velocity.

    Clamped below at ``V_MIN``; ``with_flag`` also returns whether the clamp hit.
    """
    x = np.asarray(x, dtype=float)
    if abs(x[6]) >= _HALF_PI:
        raise SingularArticulationError(f"|theta| = {abs(x[6]):.4f} rad >= pi/2")
    vx1 = _vx1(x, float(v_x2), params.to_array())
    clamped = vx1 < V_MIN
    vx1 = max(vx1, V_MIN)
    return (vx1, clamped) if with_flag else vx1


def slip_angles(x, u, v_x1: float, params: VehicleParameters) -> np.ndarray:
    """Slip angles in rad, order 11, 12, 21R, 21L, 22R, 22L, 23R, 23L.

    ``u`` is an :class:`InputSample` (or any object with ``delta`` and ``v_x2``).
    """
    x = np.asarray(x, dtype=float)
    vx1 = max(float(v_x1), V_MIN)
    vx2 = max(float(u.v_x2), V_MIN)
    out = np.empty(8)
    if _slip_angles(x, float(u.delta), vx1, vx2, params.to_array(), out) != OK:
        raise DomainError(STATUS_MESSAGES[ERR_SLIP_DENOMINATOR])
    return out


def coupling_force(x, a_y1: float, delta: float, params: VehicleParameters) -> float:
    """Lateral kingpin force F_Ky from the tractor's lateral force balance."""
    x = np.asarray(x, dtype=float)
    theta = x[6]
    if abs(theta) >= _HALF_PI:
        raise SingularArticulationError(f"|theta| = {abs(theta):.4f} rad >= pi/2")
    m1 = 4.0 * params.m_R1 + params.m_A1
    return (x[7] * math.cos(delta) + x[8] - m1 * a_y1) / math.cos(theta)
