"""Regression-adapted continual-learning metrics from a results matrix.

``m[i, j]`` is the error (e.g. MSE) on task ``j`` after training through task
``i`` (0-based here). Lower is better, so forgetting is measured against the
*minimum* earlier error rather than the maximum accuracy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedRow, MissingEntry, TooFew

AVERAGE_FINAL = "final"
AVERAGE_LOWER_TRIANGLE = "lower_triangle"


@dataclass(frozen=True)
class ResultsMatrix:
    m: np.ndarray
    name: str = ""

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"results matrix must be square, got shape {m.shape}")
        if m.shape[0] < 2:
            raise TooFew("a results matrix needs at least 2 tasks")
        lower = np.tril(np.ones_like(m, dtype=bool))
        if np.isnan(m[lower]).any():
            i, j = np.argwhere(np.isnan(m) & lower)[0]
            raise MissingEntry(f"missing entry M[{i + 1},{j + 1}] in the lower triangle")
        if (m[~np.isnan(m)] < 0).any():
            raise ValueError("results matrix entries must be non-negative")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @property
    def t_tasks(self) -> int:
        return self.m.shape[0]


def forgetting(rm: ResultsMatrix) -> float:
    """Mean over tasks j < T of ``M[T, j] - min_{j <= k < T} M[k, j]``; may be negative."""
    m, T = rm.m, rm.t_tasks
    f = [m[T - 1, j] - m[j : T - 1, j].min() for j in range(T - 1)]
    return float(np.mean(f))


def backward_transfer(rm: ResultsMatrix) -> float:
    m, T = rm.m, rm.t_tasks
    return float(np.mean([m[j, j] - m[T - 1, j] for j in range(T - 1)]))


def average_mse(rm: ResultsMatrix, mode: str = AVERAGE_FINAL) -> float:
    """Final-model mean over all tasks, or the mean of the whole lower triangle."""
    if mode == AVERAGE_FINAL:
        return float(np.mean(rm.m[-1]))
    if mode == AVERAGE_LOWER_TRIANGLE:
        return float(np.mean(rm.m[np.tril_indices(rm.t_tasks)]))
    raise ValueError(f"unknown averaging mode {mode!r}")


def cross_taskification_std(values) -> float:
    """Sample standard deviation (n - 1 denominator)."""
    x = np.asarray(list(values), dtype=float)
    if x.size < 2:
        raise TooFew("need at least 2 values for a sample standard deviation")
    return float(np.std(x, ddof=1))


def metrics(rm: ResultsMatrix, mode: str = AVERAGE_FINAL) -> dict:
    return {
        "average_mse": average_mse(rm, mode),
        "bwt": backward_transfer(rm),
        "forgetting": forgetting(rm),
        "t_tasks": rm.t_tasks,
        "average_mode": mode,
    }


def load_results_csv(path) -> ResultsMatrix:
    """Read ``after_task,task_1,...,task_T`` rows; empty upper-triangle cells allowed."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise TooFew(f"{path}: no result rows")
    header = [h.strip() for h in rows[0]]
    T = len(header) - 1
    if header[0] != "after_task" or T < 2:
        raise MalformedRow(f"{path}: header must be after_task,task_1..task_T")
    m = np.full((T, T), np.nan)
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != T + 1:
            raise MalformedRow(f"{path}:{lineno}: expected {T + 1} cells")
        try:
            i = int(row[0]) - 1
        except ValueError:
            raise MalformedRow(f"{path}:{lineno}: bad after_task {row[0]!r}") from None
        if not 0 <= i < T or i in seen:
            raise MalformedRow(f"{path}:{lineno}: after_task {i + 1} out of range or repeated")
        seen.add(i)
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell:
                try:
                    m[i, j] = float(cell)
                except ValueError:
                    raise MalformedRow(f"{path}:{lineno}: bad number {cell!r}") from None
    return ResultsMatrix(m, path.stem)


def write_results_csv(rm: ResultsMatrix, path) -> None:
    T = rm.t_tasks
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["after_task", *(f"task_{j + 1}" for j in range(T))])
        for i in range(T):
            w.writerow([i + 1, *("" if math.isnan(v) else repr(float(v)) for v in rm.m[i])])


def std_table(results: dict[str, ResultsMatrix], mode: str = AVERAGE_FINAL) -> dict:
    """Per-matrix metrics plus their sample std across matrices (taskifications)."""
    per = {name: metrics(rm, mode) for name, rm in results.items()}
    out = {"per_matrix": per}
    if len(per) >= 2:
        out["std"] = {
            key: cross_taskification_std(p[key] for p in per.values())
            for key in ("average_mse", "bwt", "forgetting")
        }
    return out
