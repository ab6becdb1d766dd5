"""Seeded synthetic streams for the fragility case studies and regime tests.

Noise comes from a small portable generator so the fixtures can be
reproduced from their seeds in any language:

* ``splitmix64``: the k-th output (k = 0, 1, ...) for seed ``s`` mixes
  ``s + (k + 1) * 0x9E3779B97F4A7C15 (mod 2**64)``.
* uniforms: ``(out >> 11) * 2**-53`` in [0, 1).
* normals: sample ``i`` uses uniforms ``u1 = U[2i]``, ``u2 = U[2i + 1]`` and
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)``.

See docs/formats.md for the full write-up.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import InvalidSpec
from .stream import Stream
from .taskify import PerturbationSpec, Taskification

KINDS = ("changepoint", "transient", "periodic", "iid_noise", "piecewise_regimes")
FIXTURE_CASES = ("changepoint", "transient", "periodic")
DEFAULT_STEP = 600.0

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of SplitMix64 started at ``seed``."""
    with np.errstate(over="ignore"):
        k = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(seed % 2**64) + k * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def uniforms(seed: int, n: int) -> np.ndarray:
    return (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def standard_normals(seed: int, n: int) -> np.ndarray:
    u = uniforms(seed, 2 * n)
    u1, u2 = u[0::2], u[1::2]
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    t_steps: int
    seed: int = 0
    params: dict = field(default_factory=dict)
    step_duration: float = DEFAULT_STEP
    start_time: float = 0.0
    series_id: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "t_steps": self.t_steps,
            "seed": self.seed,
            "params": self.params,
            "step_duration": self.step_duration,
            "start_time": self.start_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(
            kind=d["kind"],
            t_steps=int(d["t_steps"]),
            seed=int(d.get("seed", 0)),
            params=dict(d.get("params", {})),
            step_duration=float(d.get("step_duration", DEFAULT_STEP)),
            start_time=float(d.get("start_time", 0.0)),
            series_id=d.get("series_id"),
        )


def _get(params, key, default=None, required=False):
    if key in params:
        return params[key]
    if required:
        raise InvalidSpec(f"missing parameter {key!r}")
    return default


def _check_centers(p, t_steps):
    t1 = int(_get(p, "t_star1", required=True))
    t2 = int(_get(p, "t_star2", required=True))
    if not 0 < t1 < t2 < t_steps:
        raise InvalidSpec(f"need 0 < t_star1 < t_star2 < t_steps, got {t1}, {t2}, {t_steps}")
    return t1, t2


def _nonneg(p, key, default):
    v = float(_get(p, key, default))
    if v < 0 or not math.isfinite(v):
        raise InvalidSpec(f"{key} must be a finite non-negative number, got {v}")
    return v


def _periodic_phase(p, t):
    if "period" in p:
        period = float(p["period"])
        if period <= 0:
            raise InvalidSpec("period must be positive")
    elif "omega" in p:
        omega = float(p["omega"])
        if omega <= 0:
            raise InvalidSpec("omega must be positive")
        period = 2 * math.pi / omega
    else:
        raise InvalidSpec("periodic streams need 'omega' or 'period'")
    if abs(period - round(period)) < 1e-9:
        # integer periods reduce the index first so x[t + P] == x[t] bitwise
        P = int(round(period))
        return 2 * np.pi * (t % P) / P
    return (2 * np.pi / period) * t


def _signal(spec: SynthSpec) -> np.ndarray:
    p = spec.params
    T = spec.t_steps
    t = np.arange(T)
    if spec.kind == "changepoint":
        t1, t2 = _check_centers(p, T)
        mu1 = float(_get(p, "mu1", required=True))
        mu2 = float(_get(p, "mu2", required=True))
        sigma = _nonneg(p, "sigma", 0.0)
        base = np.where((t >= t1) & (t <= t2), mu2, mu1)
        return base + sigma * standard_normals(spec.seed, T)
    if spec.kind == "transient":
        t1, t2 = _check_centers(p, T)
        amp = float(_get(p, "amplitude", required=True))
        eta = float(_get(p, "eta", required=True))
        if not eta > 0:
            raise InvalidSpec(f"eta must be positive, got {eta}")
        background = _get(p, "background", "constant")
        c = float(_get(p, "c", 0.0))
        if background == "constant":
            g = np.full(T, c)
        elif background == "linear":
            g = c + float(_get(p, "slope", 0.0)) * t
        else:
            raise InvalidSpec(f"unknown background {background!r}")
        bumps = amp * (np.exp(-((t - t1) ** 2) / (2 * eta**2)) + np.exp(-((t - t2) ** 2) / (2 * eta**2)))
        return g + bumps + _nonneg(p, "noise_sigma", 0.0) * standard_normals(spec.seed, T)
    if spec.kind == "periodic":
        phase = _periodic_phase(p, t)
        return np.sin(phase) + _nonneg(p, "noise_sigma", 0.0) * standard_normals(spec.seed, T)
    if spec.kind == "iid_noise":
        return float(_get(p, "mean", 0.0)) + _nonneg(p, "sigma", 1.0) * standard_normals(spec.seed, T)
    if spec.kind == "piecewise_regimes":
        means = [float(m) for m in _get(p, "means", required=True)]
        lengths = [int(n) for n in _get(p, "lengths", required=True)]
        if len(means) != len(lengths) or not means:
            raise InvalidSpec("means and lengths must be non-empty and of equal length")
        if min(lengths) < 1 or sum(lengths) != T:
            raise InvalidSpec(f"regime lengths must be positive and sum to t_steps={T}")
        base = np.repeat(means, lengths)
        return base + _nonneg(p, "sigma", 0.0) * standard_normals(spec.seed, T)
    raise InvalidSpec(f"unknown kind {spec.kind!r}; expected one of {KINDS}")


def generate(spec: SynthSpec) -> Stream:
    if spec.t_steps < 2:
        raise InvalidSpec("t_steps must be at least 2")
    if not 0 <= int(spec.seed) < 2**64:
        raise InvalidSpec("seed must fit in 64 unsigned bits")
    return Stream(
        values=_signal(spec)[:, None],
        step_duration=spec.step_duration,
        start_time=spec.start_time,
        channel_names=("x",),
        series_id=spec.series_id or f"{spec.kind}-{spec.seed}",
    )


def load_fixtures() -> dict:
    """The versioned fixture file shipped with the package."""
    text = resources.files("taskdiag").joinpath("data/fixtures.json").read_text()
    return json.loads(text)


def fixture_config(case: str, overrides: dict | None = None) -> dict:
    """Fixture entry for ``case`` with ``overrides`` merged into its generator params."""
    fixtures = load_fixtures()
    if case not in fixtures["cases"]:
        raise InvalidSpec(f"unknown fixture {case!r}; have {sorted(fixtures['cases'])}")
    cfg = copy.deepcopy(fixtures["cases"][case])
    cfg["version"] = fixtures["version"]
    if overrides:
        cfg["spec"]["params"].update(overrides)
    return cfg


def fixture_perturbation(case: str) -> PerturbationSpec:
    p = fixture_config(case)["perturbation"]
    return PerturbationSpec(p["delta_steps"], p["n_samples"], p["seed"])


def fragile_fixture(case: str, overrides: dict | None = None):
    """Return ``(stream, fragile_taskification, robust_taskification)`` for a case study."""
    if case not in FIXTURE_CASES:
        raise InvalidSpec(f"fragile fixtures exist for {FIXTURE_CASES}, not {case!r}")
    cfg = fixture_config(case, overrides)
    spec = SynthSpec.from_dict({**cfg["spec"], "series_id": f"fixture-{case}"})
    stream = generate(spec)
    spd = int(round(86400 / spec.step_duration))
    fragile = Taskification(tuple(cfg["fragile"]), f"{case}-fragile", spd)
    robust = Taskification(tuple(cfg["robust"]), f"{case}-robust", spd)
    return stream, fragile, robust


def window_fixture(overrides: dict | None = None):
    """Piecewise-regime stream used for the window-length ordering check.

    Returns ``(stream, cfg)``; ``cfg`` carries ``windows``, ``shift_days`` and
    the perturbation settings.
    """
    cfg = fixture_config("window_sensitivity", overrides)
    spec = SynthSpec.from_dict({**cfg["spec"], "series_id": "fixture-window_sensitivity"})
    return generate(spec), cfg
