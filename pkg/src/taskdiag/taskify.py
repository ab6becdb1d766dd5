"""Temporal taskifications: construction, shifting and boundary perturbation."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidShift,
    InvalidTaskification,
    NeighborhoodEmpty,
    WindowTooLong,
    WindowTooShort,
)
from .stream import SECONDS_PER_DAY, Stream

DEFAULT_N_SAMPLES = 64
# redraw budget per requested perturbation
RETRIES_PER_SAMPLE = 1000


@dataclass(frozen=True)
class Taskification:
    """Ordered boundaries ``(t_0, ..., t_K)`` in step indices, ``t_0 = 0``."""

    boundaries: tuple[int, ...]
    label: str = ""
    steps_per_day: int | None = None

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        if len(b) < 2:
            raise InvalidTaskification("need at least one task (two boundaries)")
        if b[0] != 0:
            raise InvalidTaskification(f"first boundary must be 0, got {b[0]}")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise InvalidTaskification(f"boundaries must be strictly increasing: {b}")
        object.__setattr__(self, "boundaries", b)

    @property
    def n_tasks(self) -> int:
        return len(self.boundaries) - 1

    @property
    def t_steps(self) -> int:
        return self.boundaries[-1]

    @property
    def internal(self) -> tuple[int, ...]:
        return self.boundaries[1:-1]

    def lengths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "boundaries": list(self.boundaries),
            "steps_per_day": self.steps_per_day,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Taskification":
        return cls(tuple(d["boundaries"]), d.get("label", ""), d.get("steps_per_day"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class PerturbationSpec:
    delta_steps: int
    n_samples: int = DEFAULT_N_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if int(self.delta_steps) < 1:
            raise ValueError(f"delta_steps must be >= 1, got {self.delta_steps}")
        if int(self.n_samples) < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


def steps_per_day(stream: Stream) -> int:
    """Number of steps in one day; the step must divide a day evenly."""
    ratio = SECONDS_PER_DAY / stream.step_duration
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9:
        raise InvalidTaskification(
            f"step_duration {stream.step_duration}s does not divide a day evenly"
        )
    return n


def default_min_task_len(stream: Stream) -> int:
    return steps_per_day(stream)


def validate(tk: Taskification, stream: Stream, min_task_len: int | None = None) -> Taskification:
    """Check that ``tk`` tiles ``stream`` with tasks no shorter than ``min_task_len``."""
    if min_task_len is None:
        min_task_len = default_min_task_len(stream)
    if tk.t_steps != stream.t_steps:
        raise InvalidTaskification(
            f"last boundary {tk.t_steps} does not match stream length {stream.t_steps}"
        )
    shortest = int(tk.lengths().min())
    if shortest < min_task_len:
        raise InvalidTaskification(
            f"task of {shortest} steps is shorter than min_task_len={min_task_len}"
        )
    return tk


def task_intervals(tk: Taskification) -> list[tuple[int, int]]:
    b = tk.boundaries
    return list(zip(b[:-1], b[1:]))


def fixed_length(
    stream: Stream, window_days: int, min_task_len: int | None = None
) -> Taskification:
    """Split ``stream`` into consecutive windows of ``window_days`` days.

    A trailing partial window shorter than ``min_task_len`` is merged into the
    preceding task; a longer one is kept as a short final task.
    """
    spd = steps_per_day(stream)
    if min_task_len is None:
        min_task_len = spd
    if window_days < 1:
        raise WindowTooShort(f"window must be at least one day, got {window_days}")
    window = window_days * spd
    if window < min_task_len:
        raise WindowTooShort(f"window of {window} steps is below min_task_len={min_task_len}")
    T = stream.t_steps
    bounds = list(range(0, T, window))
    tail = T - bounds[-1]
    if len(bounds) > 1 and tail < min_task_len:
        bounds.pop()
    bounds.append(T)
    if len(bounds) - 1 < 2:
        raise WindowTooLong(
            f"a {window_days}-day window yields fewer than 2 tasks on {T / spd:g} days"
        )
    return Taskification(tuple(bounds), f"{window_days}d", spd)


_SHIFT_SUFFIX = re.compile(r"^(.*)\+Δ(-?\d+)d$")


def _shifted_label(label: str, shift_days: int) -> str:
    m = _SHIFT_SUFFIX.match(label)
    base, total = (m.group(1), int(m.group(2))) if m else (label, 0)
    total += shift_days
    return base if total == 0 else f"{base}+Δ{total}d"


def shift(
    tk: Taskification, shift_days: int, stream: Stream, min_task_len: int | None = None
) -> Taskification:
    """Move every internal boundary by ``shift_days``; endpoints stay put."""
    spd = steps_per_day(stream)
    if shift_days == 0:
        return tk
    offset = int(shift_days) * spd
    b = tk.boundaries
    moved = (0, *(x + offset for x in b[1:-1]), b[-1])
    label = _shifted_label(tk.label, int(shift_days))
    try:
        out = Taskification(moved, label, tk.steps_per_day or spd)
        validate(out, stream, min_task_len)
    except InvalidTaskification as exc:
        raise InvalidShift(f"shift of {shift_days} days is invalid for {tk.label!r}: {exc}") from None
    return out


def _draw_offsets(
    tk: Taskification,
    spec: PerturbationSpec,
    min_task_len: int,
    rng,
) -> tuple[np.ndarray, int]:
    """Draw ``spec.n_samples`` valid offset vectors; returns (offsets, n_rejected)."""
    b = np.asarray(tk.boundaries, dtype=np.int64)
    n_internal = b.size - 2
    out = np.zeros((spec.n_samples, n_internal), dtype=np.int64)
    if n_internal == 0:
        return out, 0
    budget = RETRIES_PER_SAMPLE * spec.n_samples
    rejected = 0
    filled = 0
    while filled < spec.n_samples:
        if rejected >= budget:
            raise NeighborhoodEmpty(
                f"{rejected} rejected draws for {tk.label!r} with delta={spec.delta_steps}; "
                "the perturbation is too large for the interval structure"
            )
        offsets = np.asarray(
            rng.integers(-spec.delta_steps, spec.delta_steps + 1, size=n_internal),
            dtype=np.int64,
        )
        moved = b.copy()
        moved[1:-1] += offsets
        if np.diff(moved).min() >= min_task_len:
            out[filled] = offsets
            filled += 1
        else:
            rejected += 1
    return out, rejected


def perturb(tk: Taskification, offsets, label: str | None = None) -> Taskification:
    b = list(tk.boundaries)
    for i, off in enumerate(offsets, start=1):
        b[i] += int(off)
    return Taskification(tuple(b), label if label is not None else tk.label, tk.steps_per_day)


def sample_neighborhood(
    tk: Taskification,
    spec: PerturbationSpec,
    stream: Stream,
    min_task_len: int | None = None,
    rng=None,
    return_rejected: bool = False,
):
    """Draw random boundary perturbations of ``tk``.

    Each internal boundary moves by an independent uniform integer offset in
    ``[-delta, +delta]``. A draw that breaks ordering or ``min_task_len`` is
    discarded and redrawn in full, so accepted draws are uniform over the
    valid neighborhood.

    Parameters
    ----------
    rng : numpy Generator-like, optional
        Anything with ``integers(low, high, size)``. Defaults to
        ``numpy.random.default_rng(spec.seed)``.
    return_rejected : bool
        Also return the number of rejected draws.
    """
    if min_task_len is None:
        min_task_len = default_min_task_len(stream)
    validate(tk, stream, min_task_len)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    offsets, rejected = _draw_offsets(tk, spec, min_task_len, rng)
    samples = [perturb(tk, row, f"{tk.label}~{i}") for i, row in enumerate(offsets)]
    if return_rejected:
        return samples, rejected
    return samples
