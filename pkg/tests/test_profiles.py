import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taskdiag.errors import EmptyProfile, KindMismatch, TooFewTasks
from taskdiag.profiles import (
    PLASTICITY,
    STABILITY,
    BpsReport,
    Profile,
    ProfileDistanceWeights,
    bps,
    combine,
    compute_profiles,
    d_prof,
    format_bps_table,
    plasticity_profile,
    profile_distance,
    profile_w1,
    profiles_from_matrix,
    stability_pair_count,
    stability_profile,
)
from taskdiag.synthetic import SynthSpec, generate
from taskdiag.taskify import PerturbationSpec, Taskification, fixed_length

from .conftest import make_stream

SPD = 144


class ZeroRng:
    def integers(self, low, high, size=None):
        return np.zeros(size, dtype=np.int64)


def noise_stream(days, seed=0):
    return generate(SynthSpec("iid_noise", days * SPD, seed=seed))


def test_constant_stream_profiles_zero():
    s = make_stream(np.full(10 * SPD, 3.0))
    tk = fixed_length(s, 2)
    assert not plasticity_profile(s, tk).values.any()
    assert not stability_profile(s, tk).values.any()


def test_changepoint_plasticity():
    c = 2.5
    T = 3 * SPD
    tk = Taskification((0, SPD, 2 * SPD, T))
    # middle regime exactly covers task 2: tasks look like {0}, {c}, {0}
    inside = generate(SynthSpec("changepoint", T, params={"mu1": 0, "mu2": c, "t_star1": SPD, "t_star2": 2 * SPD - 1}))
    np.testing.assert_array_equal(plasticity_profile(inside, tk).values, [c, c])
    # regime runs to the end: {0}, {c}, {c}
    tail = generate(SynthSpec("changepoint", T, params={"mu1": 0, "mu2": c, "t_star1": SPD, "t_star2": T - 1}))
    np.testing.assert_array_equal(plasticity_profile(tail, tk).values, [0, c])


def test_cardinality_small_cases():
    s = noise_stream(3)
    assert len(plasticity_profile(s, Taskification((0, SPD, 3 * SPD)))) == 1
    assert len(stability_profile(s, Taskification((0, SPD, 2 * SPD, 3 * SPD)))) == 1
    with pytest.raises(TooFewTasks):
        stability_profile(s, Taskification((0, SPD, 3 * SPD)))
    with pytest.raises(TooFewTasks):
        plasticity_profile(s, Taskification((0, 3 * SPD)))
    with pytest.raises(ValueError):
        stability_profile(s, Taskification((0, SPD, 2 * SPD, 3 * SPD)), l_min=1)


@given(k=st.integers(2, 12), l_min=st.integers(2, 6), seed=st.integers(0, 100))
def test_profile_cardinalities(k, l_min, seed):
    rng = np.random.default_rng(seed)
    a = rng.random((k, k))
    a = a + a.T
    np.fill_diagonal(a, 0)
    if k < l_min + 1:
        with pytest.raises(TooFewTasks):
            profiles_from_matrix(a, l_min)
        return
    pl, st_ = profiles_from_matrix(a, l_min)
    assert len(pl) == k - 1
    brute = sum(1 for i in range(1, k + 1) for j in range(i + 1, k + 1) if j - i >= l_min)
    assert len(st_) == brute == stability_pair_count(k, l_min)
    assert (pl.values >= 0).all() and (st_.values >= 0).all()


def test_profiles_match_direct_definitions():
    s = noise_stream(12, seed=4)
    tk = fixed_length(s, 2)
    pl, st_ = compute_profiles(s, tk, l_min=3)
    np.testing.assert_array_equal(pl.values, plasticity_profile(s, tk).values)
    np.testing.assert_array_equal(st_.values, stability_profile(s, tk, l_min=3).values)


def test_periodic_stability():
    period = 2 * SPD
    s = generate(SynthSpec("periodic", 4 * period, params={"period": period}))
    full = Taskification(tuple(range(0, 4 * period + 1, period)))
    assert stability_profile(s, full).values.max() < 1e-9
    half = Taskification(tuple(range(0, 4 * period + 1, period // 2)))
    dists = stability_profile(s, half)
    # gaps 2..7: odd gaps compare opposite half-cycles
    assert dists.values.max() > 1.0
    assert np.sum(dists.values > 1.0) == sum(8 - g for g in (3, 5, 7))


def test_profile_w1():
    a = Profile(PLASTICITY, [0.0, 2.0])
    assert profile_w1(a, a) == 0
    assert profile_w1(Profile(PLASTICITY, [0.0]), Profile(PLASTICITY, [1.25])) == 1.25
    assert profile_w1(a, Profile(PLASTICITY, [1.0, 1.0])) == 1
    with pytest.raises(KindMismatch):
        profile_w1(a, Profile(STABILITY, [0.0, 2.0], 2))
    with pytest.raises(EmptyProfile):
        profile_w1(a, Profile(PLASTICITY, []))


def test_profile_rejects_negative():
    with pytest.raises(ValueError):
        Profile(PLASTICITY, [-1.0])


def test_combine_closed_form():
    assert combine(2.0, 0.0, ProfileDistanceWeights()) == pytest.approx(math.sqrt(2), abs=1e-12)
    with pytest.raises(ValueError):
        ProfileDistanceWeights(0, 1)


@given(x=st.floats(0, 10), dx=st.floats(0.01, 10), y=st.floats(0, 10))
def test_monotone_in_each_component(x, dx, y):
    ref = (Profile(PLASTICITY, [0.0]), Profile(STABILITY, [0.0], 2))
    lo = (Profile(PLASTICITY, [x]), Profile(STABILITY, [y], 2))
    hi = (Profile(PLASTICITY, [x + dx]), Profile(STABILITY, [y], 2))
    w = ProfileDistanceWeights()
    assert profile_distance(ref, hi, w)[2] > profile_distance(ref, lo, w)[2]
    hi_st = (Profile(PLASTICITY, [x]), Profile(STABILITY, [y + dx], 2))
    assert profile_distance(ref, hi_st, w)[2] > profile_distance(ref, lo, w)[2]


def test_d_prof_identity_and_symmetry():
    s = noise_stream(30, seed=9)
    tau, sigma = fixed_length(s, 3), fixed_length(s, 5)
    assert d_prof(s, tau, tau) == 0
    assert d_prof(s, tau, sigma) == pytest.approx(d_prof(s, sigma, tau), abs=1e-12)
    assert d_prof(s, tau, sigma) > 0


def test_bps_constant_stream_exactly_zero():
    s = make_stream(np.full(12 * SPD, 7.0))
    r = bps(s, fixed_length(s, 3), PerturbationSpec(SPD // 2, 8, seed=1))
    assert r.bps_mean == 0 and r.bps_std == 0 and r.bps_max == 0


def test_bps_degenerate_rng_zero():
    s = noise_stream(12, seed=1)
    r = bps(s, fixed_length(s, 3), PerturbationSpec(10, 5), rng=ZeroRng())
    assert not r.bps_values.any()


def test_bps_reproducible_and_consistent():
    s = noise_stream(12, seed=2)
    tk = fixed_length(s, 3)
    spec = PerturbationSpec(SPD // 2, 10, seed=5)
    a, b = bps(s, tk, spec), bps(s, tk, spec)
    assert a.to_dict() == b.to_dict()
    assert a.bps_values.tobytes() == b.bps_values.tobytes()
    a.check_consistency()
    assert a.n_samples == 10 and a.seed == 5 and a.delta_steps == SPD // 2 and a.l_min == 2
    back = BpsReport.from_dict(a.to_dict())
    assert back.to_dict() == a.to_dict()


def test_bps_executor_independent():
    from concurrent.futures import ThreadPoolExecutor

    s = noise_stream(12, seed=2)
    tk = fixed_length(s, 3)
    spec = PerturbationSpec(SPD // 2, 10, seed=5)
    with ThreadPoolExecutor(4) as ex:
        par = bps(s, tk, spec, executor=ex)
    assert par.to_dict() == bps(s, tk, spec).to_dict()


def test_shorter_tasks_more_sensitive_on_noise():
    s = noise_stream(60, seed=8)
    spec = PerturbationSpec(SPD, 16, seed=0)
    short = bps(s, fixed_length(s, 3), spec).bps_mean
    long_ = bps(s, fixed_length(s, 15), spec).bps_mean
    assert short > long_


def test_format_table():
    s = noise_stream(12, seed=2)
    r = bps(s, fixed_length(s, 3), PerturbationSpec(10, 4))
    text = format_bps_table({"3d": r})
    lines = text.splitlines()
    assert [ln.split()[0] for ln in lines[1:]] == ["Plasticity", "Stability", "BPS"]
    assert "±" in lines[3]
