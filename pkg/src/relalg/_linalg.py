"""Numeric rank and kernel helpers used at generic probe points."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import EvaluationError, Expr, eval_numeric, probe_point

# probe points per generic-rank computation
GENERIC_SAMPLES = 3
RANK_RTOL = 1e-9


def rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))


def null_space(m: np.ndarray, cols: int | None = None) -> np.ndarray:
    """Orthonormal basis of the kernel, as columns."""
    cols = m.shape[1] if cols is None else cols
    if m.size == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(m)
    r = 0 if s.size == 0 or s[0] == 0.0 else int(np.sum(s > RANK_RTOL * s[0]))
    return vt[r:].T.copy()


def sample_points(names: Sequence[str], seed: int, count: int = GENERIC_SAMPLES) -> list[dict]:
    rng = random.Random(seed)
    return [probe_point(names, rng) for _ in range(count)]


def evaluate(rows: Sequence[Sequence[Expr]], point: Mapping[str, object]) -> np.ndarray:
    data = [[0.0 if e == 0 else eval_numeric(e, point) for e in row] for row in rows]
    if not data:
        return np.zeros((0, 0))
    return np.array(data, dtype=float)


@dataclass
class GenericRank:
    value: int
    ranks: list[int] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return len(set(self.ranks)) <= 1


def generic_rank(rows: Sequence[Sequence[Expr]], names: Sequence[str], seed: int, samples: int = GENERIC_SAMPLES) -> GenericRank:
    """Rank of an expression matrix at ``samples`` random points.

    Points where evaluation fails are redrawn.
    """
    rng = random.Random(seed)
    ranks = []
    attempts = 0
    while len(ranks) < samples and attempts < 10 * samples:
        attempts += 1
        point = probe_point(names, rng)
        try:
            ranks.append(rank(evaluate(rows, point)))
        except EvaluationError:
            continue
    if not ranks:
        raise EvaluationError("no valid probe point found")
    return GenericRank(max(ranks), ranks)
