"""Plasticity and stability profiles, the profile distance and BPS."""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from .distance import discrepancy, matrix_from_distributions, task_distributions, wasserstein1
from .errors import EmptyProfile, KindMismatch, TooFewTasks
from .stream import ChannelSelector, Stream
from .taskify import (
    PerturbationSpec,
    Taskification,
    _draw_offsets,
    default_min_task_len,
    perturb,
    validate,
)

PLASTICITY = "plasticity"
STABILITY = "stability"
DEFAULT_L_MIN = 2
# how the Plasticity/Stability rows of a BPS report are obtained
ROW_INTERPRETATION = "perturbation-averaged D_pl and D_st between reference and perturbed profiles"


@dataclass(frozen=True)
class Profile:
    kind: str
    values: np.ndarray
    l_min: int | None = None

    def __post_init__(self):
        if self.kind not in (PLASTICITY, STABILITY):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if (v < 0).any():
            raise ValueError("profile values must be non-negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def to_dict(self) -> dict:
        return {"kind": self.kind, "l_min": self.l_min, "values": self.values.tolist()}


@dataclass(frozen=True)
class ProfileDistanceWeights:
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")


def stability_pair_count(n_tasks: int, l_min: int) -> int:
    return sum(n_tasks - gap for gap in range(l_min, n_tasks))


def profiles_from_matrix(m: np.ndarray, l_min: int = DEFAULT_L_MIN) -> tuple[Profile, Profile]:
    """Split a task distance matrix into its plasticity and stability profiles."""
    K = m.shape[0]
    if K < 2:
        raise TooFewTasks(f"plasticity profile needs at least 2 tasks, got {K}")
    if K < l_min + 1:
        raise TooFewTasks(f"stability profile with l_min={l_min} needs {l_min + 1} tasks, got {K}")
    pl = np.diagonal(m, offset=1)
    st = np.concatenate([np.diagonal(m, offset=g) for g in range(l_min, K)])
    return Profile(PLASTICITY, pl), Profile(STABILITY, st, l_min)


def _check_l_min(l_min: int) -> None:
    if int(l_min) < 2:
        raise ValueError(f"l_min must be >= 2 to exclude immediate neighbours, got {l_min}")


def plasticity_profile(stream: Stream, tk: Taskification, selector: ChannelSelector | None = None) -> Profile:
    if tk.n_tasks < 2:
        raise TooFewTasks(f"plasticity profile needs at least 2 tasks, got {tk.n_tasks}")
    dists = task_distributions(stream, tk, selector)
    return Profile(PLASTICITY, [discrepancy(a, b) for a, b in zip(dists, dists[1:])])


def stability_profile(
    stream: Stream,
    tk: Taskification,
    selector: ChannelSelector | None = None,
    l_min: int = DEFAULT_L_MIN,
) -> Profile:
    _check_l_min(l_min)
    K = tk.n_tasks
    if K < l_min + 1:
        raise TooFewTasks(f"stability profile with l_min={l_min} needs {l_min + 1} tasks, got {K}")
    dists = task_distributions(stream, tk, selector)
    vals = [discrepancy(dists[i], dists[j]) for i in range(K) for j in range(i + l_min, K)]
    return Profile(STABILITY, vals, l_min)


def profile_w1(a: Profile, b: Profile) -> float:
    if a.kind != b.kind:
        raise KindMismatch(f"cannot compare a {a.kind} profile with a {b.kind} profile")
    if len(a) == 0 or len(b) == 0:
        raise EmptyProfile("profile distance needs non-empty profiles")
    return wasserstein1(a.values, b.values)


def combine(d_pl: float, d_st: float, weights: ProfileDistanceWeights) -> float:
    return math.sqrt(weights.alpha * d_pl**2 + weights.beta * d_st**2)


def compute_profiles(
    stream: Stream,
    tk: Taskification,
    selector: ChannelSelector | None = None,
    l_min: int = DEFAULT_L_MIN,
    executor: Executor | None = None,
) -> tuple[Profile, Profile]:
    _check_l_min(l_min)
    m = matrix_from_distributions(task_distributions(stream, tk, selector), executor)
    return profiles_from_matrix(m, l_min)


def profile_distance(pa: tuple[Profile, Profile], pb: tuple[Profile, Profile], weights) -> tuple[float, float, float]:
    """Return ``(D_pl, D_st, D_prof)`` for two ``(plasticity, stability)`` pairs."""
    d_pl = profile_w1(pa[0], pb[0])
    d_st = profile_w1(pa[1], pb[1])
    return d_pl, d_st, combine(d_pl, d_st, weights)


def d_prof(
    stream: Stream,
    tau: Taskification,
    sigma: Taskification,
    weights: ProfileDistanceWeights | None = None,
    selector: ChannelSelector | None = None,
    l_min: int = DEFAULT_L_MIN,
) -> float:
    """Profile distance ``sqrt(alpha * D_pl**2 + beta * D_st**2)`` between two taskifications."""
    weights = weights or ProfileDistanceWeights()
    pa = compute_profiles(stream, tau, selector, l_min)
    pb = compute_profiles(stream, sigma, selector, l_min)
    return profile_distance(pa, pb, weights)[2]


def _std(x: np.ndarray) -> float:
    return float(np.std(x)) if x.size > 1 else 0.0


@dataclass(frozen=True)
class BpsReport:
    """Boundary-profile sensitivity of one taskification.

    Means and stds are over the sampled perturbations (population std); the
    per-sample values are kept so tail statistics can be recomputed.
    """

    label: str
    plasticity_values: np.ndarray
    stability_values: np.ndarray
    bps_values: np.ndarray
    n_samples: int
    seed: int
    delta_steps: int
    l_min: int
    alpha: float = 0.5
    beta: float = 0.5
    rejected_draws: int = 0
    n_tasks: int = 0
    interpretation: str = ROW_INTERPRETATION

    @property
    def plasticity_mean(self) -> float:
        return float(np.mean(self.plasticity_values))

    @property
    def plasticity_std(self) -> float:
        return _std(self.plasticity_values)

    @property
    def stability_mean(self) -> float:
        return float(np.mean(self.stability_values))

    @property
    def stability_std(self) -> float:
        return _std(self.stability_values)

    @property
    def bps_mean(self) -> float:
        return float(np.mean(self.bps_values))

    @property
    def bps_std(self) -> float:
        return _std(self.bps_values)

    @property
    def bps_max(self) -> float:
        return float(np.max(self.bps_values))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "plasticity": {"mean": self.plasticity_mean, "std": self.plasticity_std},
            "stability": {"mean": self.stability_mean, "std": self.stability_std},
            "bps": {"mean": self.bps_mean, "std": self.bps_std, "max": self.bps_max},
            "n_samples": self.n_samples,
            "seed": self.seed,
            "delta_steps": self.delta_steps,
            "l_min": self.l_min,
            "alpha": self.alpha,
            "beta": self.beta,
            "n_tasks": self.n_tasks,
            "rejected_draws": self.rejected_draws,
            "interpretation": self.interpretation,
            "samples": {
                "plasticity": self.plasticity_values.tolist(),
                "stability": self.stability_values.tolist(),
                "bps": self.bps_values.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BpsReport":
        s = d["samples"]
        return cls(
            label=d["label"],
            plasticity_values=np.asarray(s["plasticity"], dtype=float),
            stability_values=np.asarray(s["stability"], dtype=float),
            bps_values=np.asarray(s["bps"], dtype=float),
            n_samples=d["n_samples"],
            seed=d["seed"],
            delta_steps=d["delta_steps"],
            l_min=d["l_min"],
            alpha=d.get("alpha", 0.5),
            beta=d.get("beta", 0.5),
            rejected_draws=d.get("rejected_draws", 0),
            n_tasks=d.get("n_tasks", 0),
            interpretation=d.get("interpretation", ROW_INTERPRETATION),
        )

    def check_consistency(self, tol: float = 1e-12) -> None:
        """Raise if the stored BPS samples disagree with the stored D_pl/D_st samples."""
        w = ProfileDistanceWeights(self.alpha, self.beta)
        expect = np.sqrt(w.alpha * self.plasticity_values**2 + w.beta * self.stability_values**2)
        if not np.allclose(expect, self.bps_values, rtol=0, atol=tol):
            raise ValueError(f"BPS samples of {self.label!r} are inconsistent with D_pl/D_st")


def bps(
    stream: Stream,
    tk: Taskification,
    spec: PerturbationSpec,
    weights: ProfileDistanceWeights | None = None,
    selector: ChannelSelector | None = None,
    l_min: int = DEFAULT_L_MIN,
    min_task_len: int | None = None,
    executor: Executor | None = None,
    rng=None,
) -> BpsReport:
    """Boundary-profile sensitivity: mean D_prof between ``tk`` and random perturbations.

    Offsets for all perturbations are drawn up front from a generator seeded
    with ``spec.seed``, so results do not depend on how the per-sample work is
    scheduled on ``executor``.
    """
    weights = weights or ProfileDistanceWeights()
    _check_l_min(l_min)
    if min_task_len is None:
        min_task_len = default_min_task_len(stream)
    validate(tk, stream, min_task_len)
    ref = compute_profiles(stream, tk, selector, l_min)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    # K is fixed under boundary perturbation, so every accepted draw keeps
    # enough tasks for the stability profile; only ordering/length rejections occur.
    offsets, rejected = _draw_offsets(tk, spec, min_task_len, rng)

    def one(row):
        sigma = perturb(tk, row)
        return profile_distance(ref, compute_profiles(stream, sigma, selector, l_min), weights)

    if executor is not None:
        results = list(executor.map(one, offsets))
    else:
        results = [one(row) for row in offsets]
    res = np.asarray(results, dtype=float).reshape(-1, 3)
    return BpsReport(
        label=tk.label,
        plasticity_values=res[:, 0],
        stability_values=res[:, 1],
        bps_values=res[:, 2],
        n_samples=spec.n_samples,
        seed=int(spec.seed),
        delta_steps=int(spec.delta_steps),
        l_min=int(l_min),
        alpha=weights.alpha,
        beta=weights.beta,
        rejected_draws=int(rejected),
        n_tasks=tk.n_tasks,
    )


def format_bps_table(reports: dict[str, BpsReport]) -> str:
    """Plain-text table with rows Plasticity/Stability/BPS and one column per taskification."""
    cols = list(reports)
    rows = [
        ("Plasticity", lambda r: (r.plasticity_mean, r.plasticity_std)),
        ("Stability", lambda r: (r.stability_mean, r.stability_std)),
        ("BPS", lambda r: (r.bps_mean, r.bps_std)),
    ]
    cells = [[f"{m:.6g} ± {s:.6g}" for m, s in (get(reports[c]) for c in cols)] for _, get in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(cols)]
    lines = ["".ljust(10) + "  " + "  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    for (name, _), r in zip(rows, cells):
        lines.append(name.ljust(10) + "  " + "  ".join(v.rjust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)
