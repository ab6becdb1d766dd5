"""Discrepancies between task-level empirical distributions."""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from .errors import (
    ChannelMismatch,
    DimMismatch,
    Downsample,
    EmptyDistribution,
    EmptyInterval,
    InvalidTaskification,
    UnknownChannel,
)
from .stream import ChannelSelector, Stream
from .taskify import Taskification, task_intervals


@dataclass(frozen=True)
class EmpiricalDist:
    """Sorted sample multiset of a task-level distribution."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if s.size == 0:
            raise EmptyDistribution("empirical distribution needs at least one sample")
        if not np.isfinite(s).all():
            raise ValueError("empirical distribution samples must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, EmpiricalDist):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    def __hash__(self):
        return hash(self.samples.tobytes())


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, zero-diagonal, non-negative K x K matrix."""

    entries: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"distance matrix must be square, got {m.shape}")
        if (m < 0).any():
            raise ValueError("distance matrix entries must be non-negative")
        if not np.array_equal(m, m.T):
            raise ValueError("distance matrix must be symmetric")
        if np.diag(m).any():
            raise ValueError("distance matrix must have a zero diagonal")
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def dims(self) -> int:
        return self.entries.shape[0]

    def to_dict(self) -> dict:
        return {"dims": self.dims, "labels": self.labels, "entries": self.entries.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DistanceMatrix":
        labels = d.get("labels")
        return cls(np.asarray(d["entries"], dtype=float), tuple(labels) if labels else None)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.entries, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "DistanceMatrix":
        return cls(np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float)))


def _resolve_columns(stream: Stream, selector: ChannelSelector | None) -> list[int]:
    if selector is None:
        if stream.n_channels != 1:
            raise UnknownChannel(
                f"{stream.series_id!r} has {stream.n_channels} channels; "
                "pick one or select all channels explicitly"
            )
        return [0]
    if selector.mode == "all":
        return list(range(stream.n_channels))
    if selector.channel not in stream.channel_names:
        raise UnknownChannel(f"no channel {selector.channel!r} in {stream.series_id!r}")
    return [stream.channel_names.index(selector.channel)]


def task_distribution(stream: Stream, interval, selector: ChannelSelector | None = None):
    """Empirical distribution of the selected samples over ``[start, end)``.

    Returns one :class:`EmpiricalDist`, or a list of them (one per channel)
    when ``selector`` selects all channels of a multichannel stream.
    """
    start, end = int(interval[0]), int(interval[1])
    if not 0 <= start < end <= stream.t_steps:
        raise EmptyInterval(f"interval [{start}, {end}) is empty or outside [0, {stream.t_steps})")
    cols = _resolve_columns(stream, selector)
    dists = [EmpiricalDist(stream.values[start:end, c]) for c in cols]
    if selector is not None and selector.mode == "all" and stream.n_channels > 1:
        return dists
    return dists[0]


def wasserstein1(p: EmpiricalDist, q: EmpiricalDist) -> float:
    """First-order Wasserstein distance between two empirical distributions.

    Integrates ``|F_p^-1(u) - F_q^-1(u)|`` over ``u`` in (0, 1). Both quantile
    functions are piecewise constant with jumps at ``i/n`` and ``j/m``; on the
    merged grid (kept in integer units of ``1/(n*m)``) the integral is an exact
    weighted sum.
    """
    if isinstance(p, EmpiricalDist):
        a = p.samples
    else:
        a = np.sort(np.asarray(p, dtype=float).ravel())
    if isinstance(q, EmpiricalDist):
        b = q.samples
    else:
        b = np.sort(np.asarray(q, dtype=float).ravel())
    n, m = a.size, b.size
    if n == 0 or m == 0:
        raise EmptyDistribution("wasserstein1 needs non-empty distributions")
    if n == m:
        return float(np.mean(np.abs(a - b)))
    # breakpoints k/(n*m): i/n -> i*m, j/m -> j*n
    grid = np.union1d(np.arange(1, n + 1, dtype=np.int64) * m, np.arange(1, m + 1, dtype=np.int64) * n)
    widths = np.diff(grid, prepend=0)
    # on (grid[k-1], grid[k]] the quantile index is ceil(u*n) - 1 = ceil(grid[k] / m) - 1
    ia = -(-grid // m) - 1
    ib = -(-grid // n) - 1
    return float(np.dot(widths, np.abs(a[ia] - b[ib])) / (n * m))


def sliced_w1(p, q) -> float:
    """Mean of per-channel :func:`wasserstein1` over matching channel lists."""
    if isinstance(p, EmpiricalDist):
        p = [p]
    if isinstance(q, EmpiricalDist):
        q = [q]
    if len(p) != len(q) or not p:
        raise ChannelMismatch(f"channel counts differ: {len(p)} vs {len(q)}")
    return float(np.mean([wasserstein1(a, b) for a, b in zip(p, q)]))


def discrepancy(p, q) -> float:
    """W1 for univariate task distributions, sliced W1 for channel lists."""
    if isinstance(p, EmpiricalDist) and isinstance(q, EmpiricalDist):
        return wasserstein1(p, q)
    return sliced_w1(p, q)


def task_distributions(stream: Stream, tk: Taskification, selector: ChannelSelector | None = None):
    if tk.t_steps != stream.t_steps:
        raise InvalidTaskification(
            f"taskification covers {tk.t_steps} steps but stream has {stream.t_steps}"
        )
    return [task_distribution(stream, iv, selector) for iv in task_intervals(tk)]


def matrix_from_distributions(dists, executor: Executor | None = None) -> np.ndarray:
    K = len(dists)
    cells = [(i, j) for i in range(K) for j in range(i + 1, K)]

    def cell(ij):
        return discrepancy(dists[ij[0]], dists[ij[1]])

    values = list(executor.map(cell, cells)) if executor is not None else [cell(c) for c in cells]
    m = np.zeros((K, K))
    for (i, j), v in zip(cells, values):
        m[i, j] = m[j, i] = v
    return m


def pairwise_matrix(
    stream: Stream,
    tk: Taskification,
    selector: ChannelSelector | None = None,
    executor: Executor | None = None,
) -> DistanceMatrix:
    """Task-to-task discrepancy matrix ``M[i, j] = d(P_i, P_j)``.

    The optional executor spreads the upper-triangle cells across workers;
    the result does not depend on scheduling.
    """
    dists = task_distributions(stream, tk, selector)
    labels = tuple(f"{tk.label}#{k + 1}" for k in range(tk.n_tasks))
    return DistanceMatrix(matrix_from_distributions(dists, executor), labels)


def _linear_resample(n_src: int, n_dst: int) -> np.ndarray:
    """Weight matrix (n_dst x n_src) mapping cell centers affinely with edge clamping."""
    pos = (np.arange(n_dst) + 0.5) * n_src / n_dst - 0.5
    pos = np.clip(pos, 0, n_src - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n_src - 1)
    frac = pos - lo
    w = np.zeros((n_dst, n_src))
    w[np.arange(n_dst), lo] += 1 - frac
    w[np.arange(n_dst), hi] += frac
    return w


def upsample_matrix(m: DistanceMatrix, target_dim: int) -> DistanceMatrix:
    """Bilinear upsampling to ``target_dim`` followed by symmetrization and a zeroed diagonal."""
    if target_dim < m.dims:
        raise Downsample(f"target_dim {target_dim} is smaller than {m.dims}")
    if target_dim == m.dims:
        return m
    w = _linear_resample(m.dims, target_dim)
    up = w @ m.entries @ w.T
    up = 0.5 * (up + up.T)
    np.fill_diagonal(up, 0.0)
    return DistanceMatrix(np.maximum(up, 0.0))


def matrix_mse(a: DistanceMatrix, b: DistanceMatrix) -> float:
    if a.dims != b.dims:
        raise DimMismatch(f"matrix dims differ: {a.dims} vs {b.dims}")
    return float(np.mean((a.entries - b.entries) ** 2))


def abs_difference(a: DistanceMatrix, b: DistanceMatrix) -> np.ndarray:
    if a.dims != b.dims:
        raise DimMismatch(f"matrix dims differ: {a.dims} vs {b.dims}")
    return np.abs(a.entries - b.entries)


def compare_matrices(matrices: dict[str, DistanceMatrix], target_dim: int | None = None) -> dict:
    """Upsample every matrix to a common size and compare each pair.

    Returns ``{"target_dim": n, "pairs": [{"a", "b", "mse", "abs_diff"}, ...]}``
    with pairs in insertion order of ``matrices``.
    """
    if target_dim is None:
        target_dim = max(m.dims for m in matrices.values())
    up = {k: upsample_matrix(m, target_dim) for k, m in matrices.items()}
    keys = list(up)
    pairs = []
    for i, ka in enumerate(keys):
        for kb in keys[i + 1:]:
            pairs.append(
                {
                    "a": ka,
                    "b": kb,
                    "mse": matrix_mse(up[ka], up[kb]),
                    "abs_diff": abs_difference(up[ka], up[kb]),
                }
            )
    return {"target_dim": target_dim, "upsampled": up, "pairs": pairs}
