"""Per-channel and per-section RMSE of a simulated model against a measurement dataset."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import ANALYSIS_RATE, MeasurementDataset, rmse
from .dynamics import simulate
from .identification import normalized_cost
from .params import OUTPUT_NAMES, VehicleParameters

RAD2DEG = 180.0 / math.pi

# Reference RMSE of the original test-track validation (display units; roll rate over section IV only).
REFERENCE_RMSE = {
    "yawrate_1": 0.76,
    "yawrate_2": 0.39,
    "rollrate_2": 0.5,
    "F_y21R": 0.74,
    "F_z21R": 1.34,
    "F_y23L": 0.79,
    "F_z23L": 1.87,
}


def display_unit(channel: str) -> tuple[str, float]:
    """Unit label and SI-to-display factor: deg/s for rates, deg for angles, kN for forces."""
    if channel.startswith(("yawrate", "rollrate")):
        return "deg/s", RAD2DEG
    if channel == "theta":
        return "deg", RAD2DEG
    if channel.startswith("F_"):
        return "kN", 1e-3
    return "SI", 1.0


@dataclass
class ValidationReport:
    rmse: dict[str, float]
    sections: dict[str, dict[str, float]]
    section_windows: dict[str, tuple[float, float]]
    cost: float
    config: dict = field(default_factory=dict)

    def rmse_display(self) -> dict[str, float]:
        return {k: v * display_unit(k)[1] for k, v in self.rmse.items()}

    def sections_display(self) -> dict[str, dict[str, float]]:
        return {s: {k: v * display_unit(k)[1] for k, v in d.items()} for s, d in self.sections.items()}

    def to_dict(self) -> dict:
        return {
            "rmse_si": self.rmse,
            "rmse_display": self.rmse_display(),
            "units_display": {k: display_unit(k)[0] for k in self.rmse},
            "sections": {k: list(v) for k, v in self.section_windows.items()},
            "section_rmse_si": self.sections,
            "section_rmse_display": self.sections_display(),
            "reference_rmse_display": REFERENCE_RMSE,
            "cost": self.cost,
            "config": self.config,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def format_table(self) -> str:
        disp = self.rmse_display()
        lines = [f"{'channel':<12} {'RMSE':>10} {'unit':<6} {'reference':>9}"]
        for name in OUTPUT_NAMES:
            if name not in disp:
                continue
            ref = REFERENCE_RMSE.get(name)
            lines.append(f"{name:<12} {disp[name]:>10.4f} {display_unit(name)[0]:<6} "
                         f"{'' if ref is None else f'{ref:9.2f}':>9}")
        lines.append(f"cost J = {self.cost:.6g}")
        return "\n".join(lines)


@dataclass
class ValidationRun:
    report: ValidationReport
    t: np.ndarray
    measured: np.ndarray
    simulated: np.ndarray

    def write_plot_data(self, directory) -> list[Path]:
        """One CSV per channel with columns t, measured, simulated."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, name in enumerate(OUTPUT_NAMES):
            path = directory / f"{name}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["t", "measured", "simulated"])
                for row in zip(self.t, self.measured[:, i], self.simulated[:, i]):
                    w.writerow([repr(float(v)) for v in row])
            paths.append(path)
        return paths


def validate(dataset: MeasurementDataset, params: VehicleParameters,
             sections: Mapping[str, tuple[float, float]] | None = None, dt: float = 1e-2,
             rate: float = ANALYSIS_RATE) -> ValidationRun:
    """Simulate the dataset's inputs and compare all 12 outputs on a ``rate`` grid."""
    inputs, Y = dataset.on_grid(rate)
    sim = simulate(None, inputs, params, dt)
    t = inputs.t
    per_channel = {name: rmse(sim.outputs[:, i], Y[:, i]) for i, name in enumerate(OUTPUT_NAMES)}
    sections = dict(sections or {})
    per_section = {}
    for label, (a, b) in sections.items():
        if a < t[0] - 1e-9 or b > t[-1] + 1e-9 or not a < b:
            raise ValueError(f"section {label!r} [{a}, {b}] outside dataset span [{t[0]}, {t[-1]}]")
        m = (t >= a) & (t <= b)
        per_section[label] = {name: rmse(sim.outputs[m, i], Y[m, i]) for i, name in enumerate(OUTPUT_NAMES)}
    report = ValidationReport(
        rmse=per_channel,
        sections=per_section,
        section_windows={k: (float(a), float(b)) for k, (a, b) in sections.items()},
        cost=normalized_cost(Y, sim.outputs, OUTPUT_NAMES),
        config={"dt": dt, "rate": rate, "parameters": params.to_flat()},
    )
    return ValidationRun(report, t, Y, sim.outputs)
