"""Dataset splitting, sliding windows, and seed determinism."""

import numpy as np
import pytest

from stagecp.core import (
    TripletPoint,
    make_rng,
    sliding_window,
    spawn_seeds,
    split_dataset,
)
from stagecp.errors import InsufficientData, WindowTooShort


def points(n):
    return [
        TripletPoint(w=np.array([float(i)]), x=np.array([2.0 * i]), y=3.0 * i, t=i)
        for i in range(n)
    ]


class TestSplitDataset:
    def test_basic_split_sizes_and_order(self):
        split = split_dataset(points(10), 5, 3, 2)
        assert [len(split.train), len(split.conf), len(split.cal)] == [5, 3, 2]
        assert [p.t for p in split.train] == [0, 1, 2, 3, 4]
        assert [p.t for p in split.conf] == [5, 6, 7]
        assert [p.t for p in split.cal] == [8, 9]

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            split_dataset(points(10), 5, 3, 3)

    def test_degenerate_split(self):
        split = split_dataset(points(6), 6, 0, 0)
        assert len(split.train) == 6
        assert split.conf == ()
        assert split.cal == ()

    def test_slices_disjoint_and_prefix(self):
        pts = points(20)
        rng = make_rng(11)
        for _ in range(50):
            sizes = rng.integers(0, 7, size=3)
            total = int(sizes.sum())
            split = split_dataset(pts, *map(int, sizes))
            ids = [p.t for p in split.train + split.conf + split.cal]
            assert ids == list(range(total))
            assert len(set(ids)) == len(ids)


class TestSlidingWindow:
    def test_half_split_indices(self):
        split = sliding_window(points(200), t=100, k=100, conf_ratio=0.5)
        assert [p.t for p in split.conf] == list(range(0, 50))
        assert [p.t for p in split.cal] == list(range(50, 100))
        assert split.train == ()

    def test_full_history_window(self):
        split = sliding_window(points(40), t=40, k=40)
        assert len(split.conf) + len(split.cal) == 40

    def test_window_too_short(self):
        with pytest.raises(WindowTooShort):
            sliding_window(points(200), t=10, k=100)


class TestSeeds:
    def test_same_seed_same_draws(self):
        a = make_rng(123).normal(size=1000)
        b = make_rng(123).normal(size=1000)
        assert np.array_equal(a, b)

    def test_spawned_seeds_distinct_and_stable(self):
        s1 = spawn_seeds(7, 10)
        s2 = spawn_seeds(7, 10)
        assert s1 == s2
        assert len(set(s1)) == 10
