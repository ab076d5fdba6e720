"""Vehicle parameter set, state/input/output layouts and the parameter file format."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, NamedTuple

import numpy as np

from .errors import InvalidParameterError

G = 9.81
V_MIN = 0.5  # [m/s] lower clamp for longitudinal speeds in denominators


class StateVector(NamedTuple):
    v_y1: float = 0.0
    yawrate_1: float = 0.0
    kappa_2: float = 0.0
    v_y2: float = 0.0
    rollrate_2: float = 0.0
    yawrate_2: float = 0.0
    theta: float = 0.0
    F_y11: float = 0.0
    F_y12: float = 0.0
    F_y21R: float = 0.0
    F_y21L: float = 0.0
    F_y22R: float = 0.0
    F_y22L: float = 0.0
    F_y23R: float = 0.0
    F_y23L: float = 0.0


class InputSample(NamedTuple):
    t: float
    delta: float
    v_x2: float
    a_x2: float = 0.0


class OutputVector(NamedTuple):
    yawrate_1: float
    yawrate_2: float
    rollrate_2: float
    theta: float
    F_y21R: float
    F_y21L: float
    F_y23R: float
    F_y23L: float
    F_z21R: float
    F_z21L: float
    F_z23R: float
    F_z23L: float


STATE_NAMES: tuple[str, ...] = StateVector._fields
OUTPUT_NAMES: tuple[str, ...] = OutputVector._fields
INPUT_NAMES: tuple[str, ...] = ("delta", "v_x2", "a_x2")
N_STATES = len(STATE_NAMES)
N_OUTPUTS = len(OUTPUT_NAMES)

# wheel stations in state order (tire-lag rows)
WHEELS: tuple[str, ...] = ("11", "12", "21R", "21L", "22R", "22L", "23R", "23L")


@dataclass(frozen=True)
class TireParams:
    """Simplified Magic Formula coefficients of one tire (or lumped axle)."""

    mu: float
    C: float
    c1: float
    c2: float
    relaxation_length: float = 1.0

    def validate(self) -> None:
        if not 0.0 < self.mu <= 2.0:
            raise InvalidParameterError(f"mu must lie in (0, 2], got {self.mu}")
        if not 0.0 < self.C <= 3.0:
            raise InvalidParameterError(f"C must lie in (0, 3], got {self.C}")
        for name in ("c1", "c2", "relaxation_length"):
            if not getattr(self, name) > 0.0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class TireSet:
    """Per-axle tire coefficients; the friction scale mu is shared vehicle-wide."""

    C: float
    c1: float
    c2: float
    l: float


_TIRE_GROUPS = ("tire_front", "tire_rear", "tire_trailer")
_AXLE_GROUP = {"front": "tire_front", "rear": "tire_rear", "trailer": "tire_trailer"}


@dataclass(frozen=True)
class VehicleParameters:
    """All constants of the tractor / semitrailer combination in base SI units.

    Distances are measured from the respective body's centre of gravity:
    ``l_v1``/``l_h1`` to the tractor axles, ``l_k1`` to the fifth wheel,
    ``l_v2`` forward to the kingpin and ``l_h2j`` back to trailer axle j.
    ``h_W2`` and ``h_WK`` are the heights of the trailer body CG and of the
    coupling point above the roll axis.
    """

    m_A1: float
    m_A2: float
    m_R1: float
    m_R2: float
    J_z1: float
    J_z2: float
    J_x2: float
    l_v1: float
    l_h1: float
    l_k1: float
    l_v2: float
    l_h21: float
    l_h22: float
    l_h23: float
    b2: float
    h_W2: float
    h_WK: float
    k: float
    d: float
    mu: float
    tire_front: TireSet
    tire_rear: TireSet
    tire_trailer: TireSet
    g: float = field(default=G)

    @property
    def e(self) -> float:
        return self.l_h22 + self.l_v2

    @property
    def f(self) -> float:
        return self.l_v1 + self.l_h1

    def tire(self, axle: str) -> TireParams:
        """Tire parameters of ``axle`` in {'front', 'rear', 'trailer'}."""
        try:
            ts = getattr(self, _AXLE_GROUP[axle])
        except KeyError:
            raise ValueError(f"unknown axle {axle!r}; expected one of {sorted(_AXLE_GROUP)}") from None
        return TireParams(self.mu, ts.C, ts.c1, ts.c2, ts.l)

    def validate(self) -> "VehicleParameters":
        positive = ("m_R1", "m_R2", "J_z1", "J_z2", "J_x2", "l_v1", "l_h1", "l_v2",
                    "l_h21", "l_h22", "l_h23", "b2", "h_W2", "k", "d", "g")
        non_negative = ("m_A1", "m_A2", "l_k1", "h_WK")
        flat = self.to_flat()
        for name in positive:
            if not (np.isfinite(flat[name]) and flat[name] > 0.0):
                raise InvalidParameterError(f"{name} must be positive and finite, got {flat[name]}")
        for name in non_negative:
            if not (np.isfinite(flat[name]) and flat[name] >= 0.0):
                raise InvalidParameterError(f"{name} must be non-negative and finite, got {flat[name]}")
        for axle in _AXLE_GROUP:
            self.tire(axle).validate()
        return self

    # -- flat (dotted key) view -------------------------------------------------

    def to_flat(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for f_ in fields(self):
            value = getattr(self, f_.name)
            if isinstance(value, TireSet):
                for k, v in asdict(value).items():
                    out[f"{f_.name}.{k}"] = float(v)
            else:
                out[f_.name] = float(value)
        return out

    @classmethod
    def from_flat(cls, flat: Mapping[str, float]) -> "VehicleParameters":
        kwargs: dict[str, object] = {}
        tires: dict[str, dict[str, float]] = {g: {} for g in _TIRE_GROUPS}
        for key, value in flat.items():
            if "." in key:
                group, sub = key.split(".", 1)
                if group not in tires:
                    raise InvalidParameterError(f"unknown parameter {key!r}")
                tires[group][sub] = float(value)
            else:
                kwargs[key] = float(value)
        for group, values in tires.items():
            try:
                kwargs[group] = TireSet(**values)
            except TypeError as exc:
                raise InvalidParameterError(f"incomplete tire set {group!r}: {exc}") from None
        try:
            return cls(**kwargs)  # type: ignore[arg-type]
        except TypeError as exc:
            raise InvalidParameterError(str(exc)) from None

    def with_values(self, values: Mapping[str, float]) -> "VehicleParameters":
        """Copy with some dotted-key entries replaced."""
        flat = self.to_flat()
        unknown = set(values) - set(flat)
        if unknown:
            raise InvalidParameterError(f"unknown parameter(s): {sorted(unknown)}")
        flat.update({k: float(v) for k, v in values.items()})
        return VehicleParameters.from_flat(flat)

    def to_array(self) -> np.ndarray:
        """Pack into the flat float64 layout consumed by the compiled kernels."""
        flat = self.to_flat()
        return np.array([flat[name] for name in ARRAY_LAYOUT], dtype=np.float64)


# identifiable parameters, in the order of the identification vector
IDENTIFIABLE: tuple[str, ...] = (
    "mu",
    "tire_front.C", "tire_rear.C", "tire_trailer.C",
    "tire_front.c1", "tire_rear.c1", "tire_trailer.c1",
    "tire_front.c2", "tire_rear.c2", "tire_trailer.c2",
    "tire_front.l", "tire_rear.l", "tire_trailer.l",
    "k", "d", "h_WK", "h_W2",
)
FIXED: tuple[str, ...] = (
    "m_A1", "m_A2", "m_R1", "m_R2", "J_z1", "J_z2", "J_x2",
    "l_v1", "l_h1", "l_k1", "l_v2", "l_h21", "l_h22", "l_h23", "b2", "g",
)

ARRAY_LAYOUT: tuple[str, ...] = (
    "m_A1", "m_A2", "m_R1", "m_R2", "J_z1", "J_z2", "J_x2",
    "l_v1", "l_h1", "l_k1", "l_v2", "l_h21", "l_h22", "l_h23",
    "b2", "h_W2", "h_WK", "k", "d", "mu",
    "tire_front.C", "tire_front.c1", "tire_front.c2", "tire_front.l",
    "tire_rear.C", "tire_rear.c1", "tire_rear.c2", "tire_rear.l",
    "tire_trailer.C", "tire_trailer.c1", "tire_trailer.c2", "tire_trailer.l",
    "g",
)
(P_M_A1, P_M_A2, P_M_R1, P_M_R2, P_J_Z1, P_J_Z2, P_J_X2,
 P_L_V1, P_L_H1, P_L_K1, P_L_V2, P_L_H21, P_L_H22, P_L_H23,
 P_B2, P_H_W2, P_H_WK, P_K, P_D, P_MU,
 P_C11, P_C1_11, P_C2_11, P_L11,
 P_C12, P_C1_12, P_C2_12, P_L12,
 P_C2J, P_C1_2J, P_C2_2J, P_L2J,
 P_G) = range(len(ARRAY_LAYOUT))


# -- parameter files -------------------------------------------------------------

def _schema() -> dict:
    return json.loads(resources.files("semitrailer.data").joinpath("params.schema.json").read_text())


def params_from_dict(doc: Mapping) -> VehicleParameters:
    import jsonschema

    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        raise InvalidParameterError(f"parameter document invalid: {exc.message}") from None
    flat = {"g": G, **doc["fixed"], **doc["identifiable"]}
    return VehicleParameters.from_flat(flat).validate()


def params_to_dict(params: VehicleParameters) -> dict:
    flat = params.to_flat()
    return {
        "fixed": {k: flat[k] for k in FIXED},
        "identifiable": {k: flat[k] for k in IDENTIFIABLE},
    }


def load_params(path: str | Path) -> VehicleParameters:
    with open(path, encoding="utf-8") as fh:
        return params_from_dict(json.load(fh))


def save_params(params: VehicleParameters, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(params_to_dict(params), fh, indent=2)
        fh.write("\n")


def default_params() -> VehicleParameters:
    """Loaded 40 t class tractor/semitrailer used as synthetic ground truth."""
    doc = json.loads(resources.files("semitrailer.data").joinpath("params_default.json").read_text())
    return params_from_dict(doc)


def with_tire(params: VehicleParameters, axle: str, **changes: float) -> VehicleParameters:
    group = _AXLE_GROUP[axle]
    return replace(params, **{group: replace(getattr(params, group), **changes)})
