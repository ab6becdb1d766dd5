import datetime as dt
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taskdiag.errors import (
    InvalidShift,
    InvalidTaskification,
    NeighborhoodEmpty,
    WindowTooLong,
    WindowTooShort,
)
from taskdiag.stream import Stream
from taskdiag.taskify import (
    PerturbationSpec,
    Taskification,
    fixed_length,
    sample_neighborhood,
    shift,
    task_intervals,
    validate,
)

from .conftest import make_stream

SPD = 144


def days(n, step=600.0, start=0.0):
    return Stream(np.zeros(n * SPD), step, start)


class ZeroRng:
    def integers(self, low, high, size=None):
        return np.zeros(size, dtype=np.int64)


def test_fixed_length_280_days_44():
    tk = fixed_length(days(280), 44)
    # oracle on the index grid: starts at every multiple of 44 days below 280
    starts = [d * SPD for d in range(0, 280, 44)]
    assert tk.n_tasks == math.ceil(280 / 44) == 7
    assert tk.boundaries == tuple(starts) + (280 * SPD,)
    assert tk.label == "44d"


def test_fixed_length_18_days_9():
    assert fixed_length(days(18), 9).boundaries == (0, 9 * SPD, 18 * SPD)


def test_fixed_length_errors():
    with pytest.raises(WindowTooLong):
        fixed_length(days(280), 300)
    with pytest.raises(WindowTooShort):
        fixed_length(days(10), 0)


def test_short_tail_merged_long_tail_kept():
    s = make_stream(np.zeros(9 * SPD + 100))
    assert fixed_length(s, 3).boundaries == (0, 3 * SPD, 6 * SPD, 9 * SPD + 100)
    s = make_stream(np.zeros(9 * SPD + SPD))
    assert fixed_length(s, 3).boundaries[-2:] == (9 * SPD, 10 * SPD)


def test_uneven_step_rejected():
    with pytest.raises(InvalidTaskification):
        fixed_length(make_stream(np.zeros(100), step=7.0), 1)


def test_taskification_validation():
    with pytest.raises(InvalidTaskification):
        Taskification((1, 5))
    with pytest.raises(InvalidTaskification):
        Taskification((0, 5, 5, 9))
    with pytest.raises(InvalidTaskification):
        validate(Taskification((0, 10)), days(1))
    with pytest.raises(InvalidTaskification):
        validate(Taskification((0, 10, SPD)), days(1))


def test_shift_examples():
    s = days(18)
    tk = fixed_length(s, 9)
    moved = shift(tk, 2, s)
    assert moved.boundaries == (0, 11 * SPD, 18 * SPD)
    assert moved.label == "9d+Δ2d"
    assert shift(tk, 0, s) == tk
    with pytest.raises(InvalidShift):
        shift(Taskification((0, 3 * SPD, 6 * SPD, 9 * SPD)), 4, days(9))


@given(n_days=st.integers(12, 60), window=st.integers(3, 12), d=st.integers(-3, 3))
def test_shift_round_trip(n_days, window, d):
    s = days(n_days)
    try:
        tk = fixed_length(s, window)
        there = shift(tk, d, s)
        back = shift(there, -d, s)
    except (WindowTooLong, InvalidShift):
        return
    assert back == tk


def test_intervals():
    assert task_intervals(Taskification((0, 3, 7))) == [(0, 3), (3, 7)]
    assert task_intervals(Taskification((0, 50))) == [(0, 50)]


def check_tiling(tk, T):
    iv = task_intervals(tk)
    assert iv[0][0] == 0 and iv[-1][1] == T
    assert all(a[1] == b[0] for a, b in zip(iv, iv[1:]))
    assert sum(e - s for s, e in iv) == T


@given(n_days=st.integers(4, 40), window=st.integers(1, 10), seed=st.integers(0, 2**32))
def test_intervals_tile_including_perturbed(n_days, window, seed):
    s = days(n_days)
    try:
        tk = fixed_length(s, window)
    except WindowTooLong:
        return
    check_tiling(tk, s.t_steps)
    spec = PerturbationSpec(delta_steps=SPD // 2, n_samples=5, seed=seed)
    try:
        samples = sample_neighborhood(tk, spec, s)
    except NeighborhoodEmpty:
        return
    for sigma in samples:
        check_tiling(sigma, s.t_steps)
        offsets = np.subtract(sigma.boundaries, tk.boundaries)
        assert offsets[0] == 0 and offsets[-1] == 0
        assert np.abs(offsets).max() <= spec.delta_steps


@pytest.mark.parametrize("window", [9, 30, 44])
def test_weekday_alignment(window):
    # 9, 30 and 44 are all 2 mod 7: task k starts 2k weekdays after the first
    start = dt.datetime(2023, 10, 9, tzinfo=dt.timezone.utc).timestamp()
    s = days(270, start=start)
    tk = fixed_length(s, window)
    first = dt.datetime.fromtimestamp(start, dt.timezone.utc).weekday()
    for k, (lo, _) in enumerate(task_intervals(tk)):
        when = dt.datetime.fromtimestamp(s.start_time + lo * s.step_duration, dt.timezone.utc)
        assert when.weekday() == (first + 2 * k) % 7


def test_degenerate_rng_returns_reference():
    s = days(30)
    tk = fixed_length(s, 9)
    samples = sample_neighborhood(tk, PerturbationSpec(5, 10), s, rng=ZeroRng())
    assert all(x.boundaries == tk.boundaries for x in samples)


def test_offset_frequencies_uniform():
    s = days(4)
    tk = Taskification((0, 2 * SPD, 4 * SPD))
    samples = sample_neighborhood(tk, PerturbationSpec(1, 1000, seed=3), s)
    counts = Counter(x.boundaries[1] - tk.boundaries[1] for x in samples)
    assert set(counts) == {-1, 0, 1}
    for off in (-1, 0, 1):
        assert abs(counts[off] / 1000 - 1 / 3) <= 0.05


def test_one_day_delta_span():
    s = days(12)
    tk = Taskification((0, 4 * SPD, 8 * SPD, 12 * SPD))
    samples = sample_neighborhood(tk, PerturbationSpec(SPD, 400, seed=1), s)
    offs = np.array([np.subtract(x.boundaries, tk.boundaries)[1:-1] for x in samples])
    assert offs.min() >= -144 and offs.max() <= 144
    assert offs.min() < -130 and offs.max() > 130


def test_neighborhood_deterministic():
    s = days(30)
    tk = fixed_length(s, 9)
    spec = PerturbationSpec(SPD, 20, seed=42)
    a = sample_neighborhood(tk, spec, s)
    b = sample_neighborhood(tk, spec, s)
    assert a == b
    c = sample_neighborhood(tk, PerturbationSpec(SPD, 20, seed=43), s)
    assert a != c


def test_rejections_redraw_not_clamp():
    # tasks of 2 days with delta 1.5 days: some draws break min_task_len
    s = days(6)
    tk = Taskification((0, 2 * SPD, 4 * SPD, 6 * SPD))
    samples, rejected = sample_neighborhood(
        tk, PerturbationSpec(3 * SPD // 2, 200, seed=0), s, return_rejected=True
    )
    assert rejected > 0
    assert all(np.diff(x.boundaries).min() >= SPD for x in samples)


def test_neighborhood_empty():
    s = days(2)
    tk = Taskification((0, SPD, 2 * SPD))
    # a one-day task at min_task_len can only move its boundary by 0
    with pytest.raises(NeighborhoodEmpty):
        sample_neighborhood(tk, PerturbationSpec(1, 5), s, rng=OnesRng())


class OnesRng:
    def integers(self, low, high, size=None):
        return np.ones(size, dtype=np.int64)


def test_perturbation_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(0)
    with pytest.raises(ValueError):
        PerturbationSpec(1, 0)


def test_json_round_trip():
    tk = Taskification((0, 10, 30), "x", 144)
    assert Taskification.from_dict(tk.to_dict()) == tk
