"""Core domain records: observation triplets, dataset splits, seeded RNG.

All records are immutable value types safe to share across threads. A data
point is the triplet (w, x, y): upstream features, intermediate
representation, and the scalar target, plus an optional integer time index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InsufficientData, WindowTooShort

# 64-bit unsigned seed; identical seeds give bit-identical generated data.
Seed = int


def make_rng(seed: Seed) -> np.random.Generator:
    """Deterministic generator for the given seed."""
    return np.random.default_rng(seed)


def spawn_seeds(seed: Seed, n: int) -> list[Seed]:
    """Derive n independent child seeds, deterministically."""
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(n)]


@dataclass(frozen=True)
class TripletPoint:
    """One observation (w, x, y) with an optional time index.

    w and x are dense 1-d float arrays; y is a finite scalar. Arrays are
    treated as immutable after construction.
    """

    w: np.ndarray
    x: np.ndarray
    y: float
    t: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class AuxiliaryPoint:
    """A triplet extended with second-stage auxiliary features x_aux."""

    base: TripletPoint
    x_aux: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "x_aux", np.asarray(self.x_aux, dtype=float))


@dataclass(frozen=True)
class SplitDataset:
    """Three disjoint ordered slices: train (fitting), conf (scores),
    cal (parameter selection)."""

    train: tuple[TripletPoint, ...]
    conf: tuple[TripletPoint, ...]
    cal: tuple[TripletPoint, ...]


def split_dataset(
    points: Sequence[TripletPoint], n_train: int, n_conf: int, n_cal: int
) -> SplitDataset:
    """Contiguous, time-respecting split into train/conf/cal prefixes.

    Raises InsufficientData when the requested counts exceed the input.
    """
    total = n_train + n_conf + n_cal
    if min(n_train, n_conf, n_cal) < 0:
        raise InsufficientData("split sizes must be nonnegative")
    if total > len(points):
        raise InsufficientData(
            f"requested {total} points but only {len(points)} available"
        )
    train = tuple(points[:n_train])
    conf = tuple(points[n_train : n_train + n_conf])
    cal = tuple(points[n_train + n_conf : total])
    return SplitDataset(train=train, conf=conf, cal=cal)


def sliding_window(
    points: Sequence[TripletPoint], t: int, k: int, conf_ratio: float = 0.5
) -> SplitDataset:
    """Window of the k most recent observations before index t.

    The window [t-k, t-1] is split into conf (older part) and cal (recent
    part) by conf_ratio; train is empty since models are pre-fit.
    """
    if t < k:
        raise WindowTooShort(f"need {k} points of history, have {t}")
    window = points[t - k : t]
    n_conf = int(round(k * conf_ratio))
    return SplitDataset(
        train=(),
        conf=tuple(window[:n_conf]),
        cal=tuple(window[n_conf:]),
    )


def w_matrix(points: Sequence[TripletPoint]) -> np.ndarray:
    return np.stack([p.w for p in points]) if points else np.zeros((0, 0))


def x_matrix(points: Sequence[TripletPoint]) -> np.ndarray:
    return np.stack([p.x for p in points]) if points else np.zeros((0, 0))


def y_vector(points: Sequence[TripletPoint]) -> np.ndarray:
    return np.array([p.y for p in points], dtype=float)
