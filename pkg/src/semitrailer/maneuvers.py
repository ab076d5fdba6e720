"""Open-loop test maneuvers and synthetic measurement datasets.

Every profile is built from raised-cosine transitions so that the steer angle
and the trailer speed are continuously differentiable; the longitudinal
acceleration is the analytic derivative of the speed profile.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping

import numpy as np

from .dataset import Channel, MeasurementDataset
from .dynamics import InputTrajectory, simulate
from .errors import InvalidParameterError
from .params import INPUT_NAMES, OUTPUT_NAMES, V_MIN, VehicleParameters, params_to_dict

KINDS = ("slalom", "double-lane-change", "constant-turn", "validation-sequence", "piecewise")
KMH = 1.0 / 3.6


@dataclass(frozen=True)
class ManeuverSpec:
    """Description of an open-loop maneuver.

    ``speed`` is either a constant in km/h or a list of ``(t, km/h)`` knots;
    between knots the speed follows a raised-cosine transition, so a plateau is
    written as two knots with the same value. Steer patterns start at ``start``:

    * ``slalom``: ``cycles`` sine periods at ``frequency``, faded in/out over ``rise_time``.
    * ``double-lane-change``: per repetition, four sine-squared pulses of width
      ``1/(2*frequency)`` (+, -, hold, -, +), repetitions separated by ``gap``.
    * ``constant-turn``: ramp to ``amplitude`` over ``rise_time``, hold ``hold`` s, ramp back.
    * ``piecewise``: sum of the steer patterns of ``segments`` with this spec's speed profile.

    Positive ``amplitude`` steers left.
    """

    kind: str
    duration: float
    speed: float | tuple[tuple[float, float], ...] = 30.0
    amplitude: float = 0.0
    frequency: float = 0.0
    start: float = 2.0
    rise_time: float = 1.0
    hold: float = 0.0
    cycles: int = 1
    repetitions: int = 1
    gap: float = 2.0
    sample_rate: float = 100.0
    segments: tuple["ManeuverSpec", ...] = field(default_factory=tuple)
    name: str = ""

    def validate(self) -> "ManeuverSpec":
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown maneuver kind {self.kind!r}; valid kinds: {', '.join(KINDS)}")
        if not self.duration > 0.0:
            raise InvalidParameterError("duration must be positive")
        if not self.sample_rate > 0.0:
            raise InvalidParameterError("sample_rate must be positive")
        if self.rise_time <= 0.0:
            raise InvalidParameterError("rise_time must be positive")
        knots = self.speed_knots()
        if any(v * KMH < V_MIN for _, v in knots):
            raise InvalidParameterError(f"speeds must be >= {V_MIN} m/s")
        if any(b[0] <= a[0] for a, b in zip(knots, knots[1:])):
            raise InvalidParameterError("speed knot times must be strictly increasing")
        if self.kind in ("slalom", "double-lane-change") and not self.frequency > 0.0:
            raise InvalidParameterError(f"{self.kind} needs a positive frequency")
        if self.kind == "slalom" and 2.0 * self.rise_time > self.cycles / self.frequency:
            raise InvalidParameterError("slalom fade-in and fade-out overlap; lower rise_time or add cycles")
        if self.kind == "piecewise":
            if not self.segments:
                raise InvalidParameterError("piecewise maneuver needs segments")
            for seg in self.segments:
                if seg.kind in ("piecewise", "validation-sequence"):
                    raise InvalidParameterError("segments must be elementary steer patterns")
                seg.validate()
        if self.kind not in ("piecewise", "validation-sequence") and self.start + self.steer_length() > self.duration + 1e-9:
            raise InvalidParameterError(
                f"steer pattern ends at {self.start + self.steer_length():.3f} s, after duration {self.duration} s")
        return self

    def speed_knots(self) -> list[tuple[float, float]]:
        if isinstance(self.speed, (int, float)):
            return [(0.0, float(self.speed))]
        return [(float(t), float(v)) for t, v in self.speed]

    def steer_length(self) -> float:
        if self.kind == "slalom":
            return self.cycles / self.frequency
        if self.kind == "double-lane-change":
            one = 4.0 / (2.0 * self.frequency) + self.hold
            return self.repetitions * one + (self.repetitions - 1) * self.gap
        if self.kind == "constant-turn":
            return 2.0 * self.rise_time + self.hold
        return 0.0

    # -- JSON ----------------------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["segments"] = [s.to_dict() for s in self.segments]
        if not isinstance(self.speed, (int, float)):
            d["speed"] = [list(k) for k in self.speed]
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ManeuverSpec":
        doc = dict(doc)
        if "kind" in doc and doc["kind"] in PRESETS and len(doc) == 1:
            return preset(doc["kind"])
        segs = tuple(cls.from_dict(s) for s in doc.pop("segments", ()))
        if isinstance(doc.get("speed"), list):
            doc["speed"] = tuple(tuple(k) for k in doc["speed"])
        try:
            return cls(segments=segs, **doc).validate()
        except TypeError as exc:
            raise InvalidParameterError(f"bad maneuver spec: {exc}") from None

    @classmethod
    def from_json(cls, path) -> "ManeuverSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * s))


def _smoothstep_rate(s, width):
    inside = (s > 0.0) & (s < 1.0)
    return np.where(inside, 0.5 * np.pi / width * np.sin(np.pi * np.clip(s, 0.0, 1.0)), 0.0)


def speed_profile(spec: ManeuverSpec, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Trailer speed [m/s] and its analytic time derivative."""
    knots = spec.speed_knots()
    v = np.full_like(t, knots[0][1] * KMH)
    a = np.zeros_like(t)
    for (t0, v0), (t1, v1) in zip(knots, knots[1:]):
        width = t1 - t0
        s = (t - t0) / width
        v += (v1 - v0) * KMH * _smoothstep(s)
        a += (v1 - v0) * KMH * _smoothstep_rate(s, width)
    return v, a


def _sin2_pulse(t, t0, width):
    s = (t - t0) / width
    return np.where((s > 0.0) & (s < 1.0), np.sin(np.pi * np.clip(s, 0.0, 1.0)) ** 2, 0.0)


def steer_profile(spec: ManeuverSpec, t: np.ndarray) -> np.ndarray:
    kind = spec.kind
    if kind == "piecewise":
        return sum((steer_profile(seg, t) for seg in spec.segments), np.zeros_like(t))
    if kind == "validation-sequence":
        return steer_profile(validation_sequence(), t)
    tau = t - spec.start
    A = spec.amplitude
    if kind == "slalom":
        length = spec.steer_length()
        env = _smoothstep(tau / spec.rise_time) * _smoothstep((length - tau) / spec.rise_time)
        return np.where((tau >= 0) & (tau <= length), A * env * np.sin(2.0 * np.pi * spec.frequency * tau), 0.0)
    if kind == "double-lane-change":
        w = 1.0 / (2.0 * spec.frequency)
        out = np.zeros_like(t)
        t0 = spec.start
        for _ in range(spec.repetitions):
            out += A * (_sin2_pulse(t, t0, w) - _sin2_pulse(t, t0 + w, w))
            t1 = t0 + 2 * w + spec.hold
            out += A * (-_sin2_pulse(t, t1, w) + _sin2_pulse(t, t1 + w, w))
            t0 = t1 + 2 * w + spec.gap
        return out
    if kind == "constant-turn":
        r = spec.rise_time
        return A * (_smoothstep(tau / r) - _smoothstep((tau - r - spec.hold) / r))
    raise InvalidParameterError(f"unknown maneuver kind {kind!r}")


def generate(spec: ManeuverSpec) -> InputTrajectory:
    """Sample the maneuver at ``spec.sample_rate`` over ``[0, duration]``."""
    spec.validate()
    if spec.kind == "validation-sequence":
        spec = validation_sequence(spec.sample_rate)
    n = int(math.floor(spec.duration * spec.sample_rate + 1e-9)) + 1
    t = np.arange(n) / spec.sample_rate
    v, a = speed_profile(spec, t)
    return InputTrajectory(t, steer_profile(spec, t), v, a)


# -- presets ---------------------------------------------------------------------

VALIDATION_SECTIONS = {"I": (0.0, 40.0), "II": (40.0, 63.0), "III": (63.0, 81.0), "IV": (81.0, 115.0)}


def validation_sequence(sample_rate: float = 100.0) -> ManeuverSpec:
    """115 s four-section sequence (approximate radii and amplitudes).

    I   0-40 s: three double lane changes at 15 km/h
    II  40-63 s: accelerate to 30 km/h, right turn (R ~ 40 m) from 50 s
    III 63-81 s: decelerate to 18 km/h, 180 deg left turn (R ~ 15 m)
    IV  81-115 s: accelerate to 40 km/h, three double lane changes
    """
    return ManeuverSpec(
        kind="piecewise",
        name="validation-sequence",
        duration=115.0,
        sample_rate=sample_rate,
        speed=((0.0, 15.0), (40.0, 15.0), (46.0, 30.0), (62.0, 30.0), (67.0, 18.0),
               (81.0, 18.0), (87.0, 40.0), (115.0, 40.0)),
        segments=(
            ManeuverSpec("double-lane-change", 40.0, amplitude=0.15, frequency=0.25, start=3.0,
                         hold=2.0, repetitions=3, gap=2.0),
            ManeuverSpec("constant-turn", 63.0, amplitude=-0.095, start=50.0, rise_time=1.5, hold=8.0),
            ManeuverSpec("constant-turn", 81.0, amplitude=0.25, start=68.0, rise_time=1.5, hold=6.6),
            ManeuverSpec("double-lane-change", 115.0, amplitude=0.035, frequency=0.4, start=88.0,
                         hold=1.5, repetitions=3, gap=2.0),
        ),
    )


def identification_mix(sample_rate: float = 100.0) -> ManeuverSpec:
    """60 s mix of slalom, double lane change and constant turns at 25-40 km/h."""
    return ManeuverSpec(
        kind="piecewise",
        name="identification-mix",
        duration=60.0,
        sample_rate=sample_rate,
        speed=((0.0, 30.0), (18.0, 30.0), (22.0, 40.0), (31.0, 40.0), (35.0, 25.0), (60.0, 25.0)),
        segments=(
            ManeuverSpec("slalom", 18.0, amplitude=0.05, frequency=0.4, cycles=6, start=2.5),
            ManeuverSpec("double-lane-change", 31.0, amplitude=0.035, frequency=0.4, start=23.0, hold=1.5),
            ManeuverSpec("constant-turn", 47.0, amplitude=0.13, start=36.0, rise_time=1.5, hold=7.0),
            ManeuverSpec("constant-turn", 60.0, amplitude=-0.13, start=48.5, rise_time=1.5, hold=7.0),
        ),
    )


PRESETS = {
    "validation-sequence": validation_sequence,
    "identification-mix": identification_mix,
    "slalom": lambda rate=100.0: ManeuverSpec("slalom", 20.0, speed=40.0, amplitude=0.05,
                                              frequency=0.5, cycles=8, sample_rate=rate),
    "double-lane-change": lambda rate=100.0: ManeuverSpec("double-lane-change", 15.0, speed=40.0,
                                                          amplitude=0.04, frequency=0.4, hold=1.5,
                                                          sample_rate=rate),
    "constant-turn": lambda rate=100.0: ManeuverSpec("constant-turn", 20.0, speed=30.0, amplitude=0.1,
                                                     hold=12.0, sample_rate=rate),
}


def preset(name: str, sample_rate: float = 100.0) -> ManeuverSpec:
    try:
        return PRESETS[name](sample_rate)
    except KeyError:
        raise InvalidParameterError(
            f"unknown maneuver {name!r}; valid options: {', '.join(sorted(PRESETS))}") from None


# -- synthetic measurements --------------------------------------------------------

DEG = math.pi / 180.0


@dataclass(frozen=True)
class NoiseSpec:
    """Additive white Gaussian noise per output channel (SI units)."""

    std: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        for name, s in self.std.items():
            if name not in OUTPUT_NAMES:
                raise InvalidParameterError(f"noise given for unknown channel {name!r}")
            if not s >= 0.0:
                raise InvalidParameterError(f"noise std for {name!r} must be >= 0")

    @classmethod
    def realistic(cls, seed: int = 0) -> "NoiseSpec":
        """0.1 deg/s on rates, 0.05 deg on the articulation angle, 0.2 kN on forces."""
        std = {n: 0.2e3 for n in OUTPUT_NAMES if n.startswith("F_")}
        std.update(yawrate_1=0.1 * DEG, yawrate_2=0.1 * DEG, rollrate_2=0.1 * DEG, theta=0.05 * DEG)
        return cls(std, seed)


def synthesize_dataset(params_true: VehicleParameters, spec: ManeuverSpec,
                       noise: NoiseSpec | None = None, dt: float = 1e-3) -> MeasurementDataset:
    """Simulate ``spec`` with ``params_true`` and package noisy outputs as a dataset."""
    noise = noise or NoiseSpec()
    inputs = generate(spec)
    result = simulate(None, inputs, params_true, dt)
    rng = np.random.default_rng(noise.seed)
    channels = {name: Channel(inputs.t, getattr(inputs, name)) for name in INPUT_NAMES}
    for i, name in enumerate(OUTPUT_NAMES):
        values = result.outputs[:, i].copy()
        s = noise.std.get(name, 0.0)
        if s > 0.0:
            values = values + rng.normal(0.0, s, size=values.shape)
        channels[name] = Channel(inputs.t, values)
    metadata = {
        "source": "synthetic",
        "maneuver": spec.to_dict(),
        "noise": {"std": dict(noise.std), "seed": noise.seed},
        "dt": dt,
        "params_true": params_to_dict(params_true),
    }
    return MeasurementDataset(channels, metadata)


def with_rate(spec: ManeuverSpec, sample_rate: float) -> ManeuverSpec:
    return replace(spec, sample_rate=sample_rate)
