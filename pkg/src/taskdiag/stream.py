"""Uniformly sampled multivariate streams and their CSV ingestion."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    EmptyFile,
    InvalidStream,
    IrregularStep,
    MalformedRow,
    MissingValue,
    NonMonotonicTime,
    UnknownChannel,
)

DEFAULT_TIME_COLUMN = "id_time"
DEFAULT_GAP_FILL_LIMIT = 6
SECONDS_PER_DAY = 86400

_MISSING_TOKENS = {"", "nan", "NaN", "NA", "null", "None"}


@dataclass(frozen=True)
class Stream:
    """A temporally ordered, uniformly sampled series.

    ``values`` has shape ``(t_steps, n_channels)`` and is made read-only on
    construction so a stream can be shared freely between threads.
    """

    values: np.ndarray
    step_duration: float
    start_time: float = 0.0
    channel_names: tuple[str, ...] = ("x",)
    series_id: str = "series"

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise InvalidStream(f"values must be 2-D, got shape {values.shape}")
        names = tuple(self.channel_names)
        if values.shape[0] < 2:
            raise InvalidStream("a stream needs at least 2 time steps")
        if values.shape[1] < 1 or len(names) != values.shape[1]:
            raise InvalidStream(
                f"{values.shape[1]} value columns but {len(names)} channel names"
            )
        if len(set(names)) != len(names) or any(not n for n in names):
            raise InvalidStream(f"channel names must be unique and non-empty: {names}")
        if np.isnan(values).any():
            raise InvalidStream("values contain NaN")
        if not self.step_duration > 0:
            raise InvalidStream(f"step_duration must be positive, got {self.step_duration}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", names)

    @property
    def t_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def duration(self) -> float:
        return self.t_steps * self.step_duration

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.step_duration * np.arange(self.t_steps)

    def channel(self, name: str) -> np.ndarray:
        try:
            idx = self.channel_names.index(name)
        except ValueError:
            raise UnknownChannel(
                f"no channel {name!r} in {self.series_id!r}; have {list(self.channel_names)}"
            ) from None
        return self.values[:, idx]


@dataclass(frozen=True)
class ChannelSelector:
    """Either one named channel or all channels."""

    mode: str = "all"
    channel: str | None = None

    def __post_init__(self):
        if self.mode not in ("single", "all"):
            raise ValueError(f"unknown selector mode {self.mode!r}")
        if self.mode == "single" and not self.channel:
            raise ValueError("single mode needs a channel name")

    @classmethod
    def single(cls, name: str) -> "ChannelSelector":
        return cls("single", name)

    @classmethod
    def all(cls) -> "ChannelSelector":
        return cls("all")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "channel": self.channel}


@dataclass(frozen=True)
class CsvSchema:
    time_column: str = DEFAULT_TIME_COLUMN
    value_columns: tuple[str, ...] | None = None
    gap_fill_limit: int = DEFAULT_GAP_FILL_LIMIT
    series_id: str | None = None
    # None infers the step from the modal inter-row delta
    step_duration: float | None = None


@dataclass(frozen=True)
class ChannelStats:
    name: str
    min: float
    max: float
    mean: float
    std: float


@dataclass(frozen=True)
class StreamSummary:
    series_id: str
    t_steps: int
    step_duration: float
    duration: float
    start_time: float
    channels: tuple[ChannelStats, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "series_id": self.series_id,
            "t_steps": self.t_steps,
            "step_duration": self.step_duration,
            "duration": self.duration,
            "start_time": self.start_time,
            "channels": [vars(c) for c in self.channels],
        }


def parse_timestamp(text: str) -> float:
    """Integer/float epoch seconds or an ISO-8601 string (naive means UTC)."""
    text = text.strip()
    try:
        return float(int(text))
    except ValueError:
        pass
    try:
        value = float(text)
        if math.isfinite(value):
            return value
    except ValueError:
        pass
    iso = text[:-1] + "+00:00" if text.endswith("Z") else text
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_cell(text: str) -> float:
    text = text.strip()
    if text in _MISSING_TOKENS:
        return math.nan
    value = float(text)
    if math.isinf(value):
        raise ValueError("infinite value")
    return value


def _fill_missing(column: np.ndarray, limit: int, name: str) -> np.ndarray:
    missing = np.isnan(column)
    if not missing.any():
        return column
    if missing[0] or missing[-1]:
        raise MissingValue(f"channel {name!r}: leading or trailing missing values")
    # run lengths of consecutive missing entries
    edges = np.diff(np.concatenate(([0], missing.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    longest = int((ends - starts).max())
    if longest > limit:
        raise IrregularStep(
            f"channel {name!r}: run of {longest} missing steps exceeds gap_fill_limit={limit}"
        )
    idx = np.arange(column.size)
    filled = column.copy()
    filled[missing] = np.interp(idx[missing], idx[~missing], column[~missing])
    return filled


def load_csv(path, schema: CsvSchema | None = None) -> Stream:
    """Read a stream from a CSV file with a header row.

    Rows are sorted by timestamp, the step is the modal difference between
    consecutive timestamps (unless the schema fixes it), and missing steps or NaN cells are linearly
    interpolated when a run is at most ``schema.gap_fill_limit`` steps long.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyFile(f"{path}: no header row")
        header = [h.strip() for h in header]
        if schema.time_column not in header:
            raise MalformedRow(f"{path}: no time column {schema.time_column!r} in {header}")
        t_idx = header.index(schema.time_column)
        if schema.value_columns is None:
            names = [h for i, h in enumerate(header) if i != t_idx]
        else:
            names = list(schema.value_columns)
            missing = [n for n in names if n not in header]
            if missing:
                raise UnknownChannel(f"{path}: columns {missing} not in header")
        if not names:
            raise MalformedRow(f"{path}: no value columns")
        v_idx = [header.index(n) for n in names]

        times, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MalformedRow(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                times.append(parse_timestamp(row[t_idx]))
                rows.append([_parse_cell(row[i]) for i in v_idx])
            except ValueError as exc:
                raise MalformedRow(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise EmptyFile(f"{path}: no data rows")
    if len(rows) < 2:
        raise InvalidStream(f"{path}: a stream needs at least 2 rows")

    times = np.asarray(times)
    order = np.argsort(times, kind="stable")
    times = times[order]
    data = np.asarray(rows, dtype=float)[order]
    deltas = np.diff(times)
    if (deltas == 0).any():
        dup = times[1:][deltas == 0][0]
        raise NonMonotonicTime(f"{path}: duplicate timestamp {dup}")

    if schema.step_duration is not None:
        step = float(schema.step_duration)
    else:
        step = Counter(deltas.tolist()).most_common(1)[0][0]
    ratio = deltas / step
    n_steps = np.rint(ratio).astype(np.int64)
    if not np.allclose(ratio, n_steps, rtol=0, atol=1e-9):
        raise IrregularStep(f"{path}: inter-row deltas are not multiples of the step {step}")
    if (n_steps - 1).max() > schema.gap_fill_limit:
        raise IrregularStep(
            f"{path}: gap of {int((n_steps - 1).max())} steps exceeds "
            f"gap_fill_limit={schema.gap_fill_limit}"
        )

    positions = np.concatenate(([0], np.cumsum(n_steps)))
    grid = np.full((positions[-1] + 1, len(names)), np.nan)
    grid[positions] = data
    for c, name in enumerate(names):
        grid[:, c] = _fill_missing(grid[:, c], schema.gap_fill_limit, name)

    return Stream(
        values=grid,
        step_duration=float(step),
        start_time=float(times[0]),
        channel_names=tuple(names),
        series_id=schema.series_id or path.stem,
    )


def _format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 2**53:
        return str(int(x))
    return repr(float(x))


def write_csv(stream: Stream, path, time_column: str = DEFAULT_TIME_COLUMN) -> Path:
    """Write ``stream`` in the format :func:`load_csv` reads (epoch-second timestamps)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([time_column, *stream.channel_names])
        for t, row in zip(stream.times, stream.values):
            writer.writerow([_format_number(t), *(repr(float(v)) for v in row)])
    return path


def load_manifest(path) -> list[dict]:
    """Read a JSON manifest ``[{"series_id": ..., "path": ...}, ...]``.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    entries = json.loads(path.read_text())
    if not isinstance(entries, list) or not entries:
        raise EmptyFile(f"{path}: manifest must be a non-empty JSON list")
    out = []
    seen = set()
    for entry in entries:
        if not isinstance(entry, dict) or "series_id" not in entry or "path" not in entry:
            raise MalformedRow(f"{path}: manifest entries need series_id and path: {entry!r}")
        sid = str(entry["series_id"])
        if sid in seen:
            raise MalformedRow(f"{path}: duplicate series_id {sid!r}")
        seen.add(sid)
        p = Path(entry["path"])
        if not p.is_absolute():
            p = path.parent / p
        out.append({"series_id": sid, "path": p})
    return out


def slice_channel(stream: Stream, selector: ChannelSelector) -> Stream:
    if selector.mode == "all":
        return stream
    column = stream.channel(selector.channel)
    return Stream(
        values=column[:, None],
        step_duration=stream.step_duration,
        start_time=stream.start_time,
        channel_names=(selector.channel,),
        series_id=stream.series_id,
    )


def scale_by_max(stream: Stream) -> Stream:
    """Divide each channel by its maximum absolute value (all-zero channels untouched)."""
    peak = np.abs(stream.values).max(axis=0)
    peak[peak == 0] = 1.0
    return Stream(
        values=stream.values / peak,
        step_duration=stream.step_duration,
        start_time=stream.start_time,
        channel_names=stream.channel_names,
        series_id=stream.series_id,
    )


def summarize(stream: Stream) -> StreamSummary:
    v = stream.values
    channels = tuple(
        ChannelStats(
            name=name,
            min=float(v[:, i].min()),
            max=float(v[:, i].max()),
            mean=float(v[:, i].mean()),
            std=float(v[:, i].std()),
        )
        for i, name in enumerate(stream.channel_names)
    )
    return StreamSummary(
        series_id=stream.series_id,
        t_steps=stream.t_steps,
        step_duration=stream.step_duration,
        duration=stream.t_steps * stream.step_duration,
        start_time=stream.start_time,
        channels=channels,
    )
