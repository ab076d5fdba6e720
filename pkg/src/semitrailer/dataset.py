"""Measurement datasets: CSV file contract, multi-rate channels, resampling and RMSE.

Wide format (canonical)::

    t,delta,v_x2,a_x2,yawrate_1,yawrate_2,rollrate_2,theta,F_y21R,...,F_z23L

One row per time stamp. A channel recorded at a lower rate leaves its cell
empty on rows where it has no sample, so 100 Hz and 1000 Hz channels can
share one file and keep their native rates.

Long format::

    channel,t,value

Metadata (provenance) is kept in a sidecar ``<file>.meta.json``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .dynamics import InputTrajectory
from .errors import DatasetError
from .params import INPUT_NAMES, OUTPUT_NAMES

WIDE_HEADER: tuple[str, ...] = ("t", *INPUT_NAMES, *OUTPUT_NAMES)
ANALYSIS_RATE = 100.0


@dataclass(frozen=True)
class Channel:
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.shape != v.shape:
            raise DatasetError("channel time stamps and values must be 1-D and of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0.0):
            raise DatasetError("channel time stamps must be strictly increasing")

    def __len__(self) -> int:
        return self.t.size

    @property
    def rate(self) -> float:
        """Native sample rate [Hz] from the median sample spacing."""
        if self.t.size < 2:
            return float("nan")
        return float(1.0 / np.median(np.diff(self.t)))


@dataclass
class MeasurementDataset:
    channels: dict[str, Channel]
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Channel:
        return self.channels[name]

    def require(self, names: Iterable[str]) -> None:
        missing = [n for n in names if n not in self.channels]
        if missing:
            raise DatasetError(f"dataset lacks required channel(s): {', '.join(missing)}")

    def rates(self) -> dict[str, float]:
        return {name: ch.rate for name, ch in self.channels.items()}

    def span(self, names: Iterable[str]) -> tuple[float, float]:
        """Time window covered by all of ``names``."""
        chans = [self.channels[n] for n in names]
        return max(c.t[0] for c in chans), min(c.t[-1] for c in chans)

    def on_grid(self, rate: float = ANALYSIS_RATE, outputs: bool = True):
        """Inputs (and measured outputs) linearly interpolated on a uniform common grid.

        Returns ``(inputs, Y)`` with ``Y`` of shape (n, 12), or ``(inputs, None)``.
        """
        names = [*INPUT_NAMES, *(OUTPUT_NAMES if outputs else ())]
        self.require(names)
        t0, t1 = self.span(names)
        n = int(math.floor((t1 - t0) * rate + 1e-9)) + 1
        if n < 2:
            raise DatasetError("channels do not overlap in time")
        t = t0 + np.arange(n) / rate
        cols = {name: np.interp(t, self.channels[name].t, self.channels[name].values) for name in names}
        inputs = InputTrajectory(t, cols["delta"], cols["v_x2"], cols["a_x2"])
        Y = np.column_stack([cols[n_] for n_ in OUTPUT_NAMES]) if outputs else None
        return inputs, Y

    @classmethod
    def from_arrays(cls, t, columns: Mapping[str, np.ndarray], metadata: dict | None = None) -> "MeasurementDataset":
        return cls({k: Channel(t, v) for k, v in columns.items()}, dict(metadata or {}))


def _fmt(x: float) -> str:
    return repr(float(x))


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def save_dataset(dataset: MeasurementDataset, path: str | Path, fmt: str = "wide") -> None:
    """Write the dataset (float repr, lossless) plus a metadata sidecar if metadata exist."""
    path = Path(path)
    known = [n for n in WIDE_HEADER[1:] if n in dataset.channels]
    extra = sorted(n for n in dataset.channels if n not in WIDE_HEADER)
    names = known + extra
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fmt == "wide":
            t_all = np.unique(np.concatenate([dataset.channels[n].t for n in names]))
            w.writerow(["t", *names])
            columns = []
            for n in names:
                ch = dataset.channels[n]
                idx = np.searchsorted(t_all, ch.t)
                col = np.full(t_all.size, None, dtype=object)
                col[idx] = ch.values
                columns.append(col)
            for i, ti in enumerate(t_all):
                w.writerow([_fmt(ti), *("" if c[i] is None else _fmt(c[i]) for c in columns)])
        elif fmt == "long":
            w.writerow(["channel", "t", "value"])
            for n in names:
                ch = dataset.channels[n]
                for ti, vi in zip(ch.t, ch.values):
                    w.writerow([n, _fmt(ti), _fmt(vi)])
        else:
            raise ValueError(f"unknown dataset format {fmt!r}")
    if dataset.metadata:
        with open(_meta_path(path), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(dataset.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise DatasetError(f"line {line}: column {column!r}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise DatasetError(f"line {line}: column {column!r}: non-finite value {cell!r}")
    return value


def _check_monotone(name: str, t: list[float], lines: list[int]) -> None:
    for i in range(1, len(t)):
        if t[i] <= t[i - 1]:
            raise DatasetError(f"line {lines[i]}: time stamps of channel {name!r} not strictly increasing")


def load_dataset(path: str | Path, required: Iterable[str] = INPUT_NAMES) -> MeasurementDataset:
    """Read a wide- or long-format dataset file; ``required`` channels must be present."""
    path = Path(path)
    series: dict[str, tuple[list[float], list[float], list[int]]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if header == ["channel", "t", "value"]:
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != 3:
                    raise DatasetError(f"line {line}: expected 3 fields, got {len(row)}")
                name = row[0].strip()
                ts, vs, ls = series.setdefault(name, ([], [], []))
                ts.append(_parse_float(row[1], line, "t"))
                vs.append(_parse_float(row[2], line, name))
                ls.append(line)
        else:
            if not header or header[0] != "t":
                raise DatasetError("line 1: first column must be 't' (or use the long 'channel,t,value' format)")
            if len(set(header)) != len(header):
                raise DatasetError("line 1: duplicate column names")
            for name in header[1:]:
                series[name] = ([], [], [])
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    raise DatasetError(f"line {line}: expected {len(header)} fields, got {len(row)}")
                if row[0].strip() == "":
                    raise DatasetError(f"line {line}: missing time stamp")
                t = _parse_float(row[0], line, "t")
                for name, cell in zip(header[1:], row[1:]):
                    if cell.strip() == "":
                        continue
                    ts, vs, ls = series[name]
                    ts.append(t)
                    vs.append(_parse_float(cell, line, name))
                    ls.append(line)
    for name, (ts, _, ls) in series.items():
        _check_monotone(name, ts, ls)
    channels = {name: Channel(np.array(ts), np.array(vs)) for name, (ts, vs, _) in series.items() if ts}
    metadata = {}
    if _meta_path(path).exists():
        with open(_meta_path(path), encoding="utf-8") as fh:
            metadata = json.load(fh)
    ds = MeasurementDataset(channels, metadata)
    ds.require(required)
    return ds


def resample(channel: Channel, target_rate: float) -> Channel:
    """Linear interpolation onto a uniform grid inside the channel span (no extrapolation)."""
    if len(channel) == 0:
        raise DatasetError("cannot resample an empty channel")
    if len(channel) == 1:
        return Channel(channel.t.copy(), channel.values.copy())
    native = channel.rate
    if not 1.0 <= target_rate <= 10.0 * native:
        raise DatasetError(f"target rate {target_rate} Hz outside [1, {10.0 * native:g}] Hz")
    n = int(math.floor((channel.t[-1] - channel.t[0]) * target_rate + 1e-9)) + 1
    t = channel.t[0] + np.arange(n) / target_rate
    return Channel(t, np.interp(t, channel.t, channel.values))


def rmse(sim, meas) -> float:
    """Root-mean-square difference of two equally sampled series."""
    sim = np.asarray(sim, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if sim.shape != meas.shape:
        raise ValueError(f"series length mismatch: {sim.shape} vs {meas.shape}")
    return float(np.sqrt(np.mean((sim - meas) ** 2)))
