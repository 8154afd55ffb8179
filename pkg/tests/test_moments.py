import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hbload.moments import (
    DegenerateSample,
    InsufficientData,
    MomentAccumulator,
    WindowAccumulator,
    accumulate,
    accumulated_trajectory,
    batch_moments,
    merge,
    window_push,
    window_trajectory,
)

from conftest import two_pass

values = st.lists(st.floats(min_value=250, max_value=3000, allow_nan=False), min_size=4, max_size=80)


def close(summary, ref, rtol=1e-9, stol=1e-7):
    mean, std, skew, kurt = ref
    assert summary.mean == pytest.approx(mean, rel=rtol)
    assert summary.std == pytest.approx(std, rel=rtol)
    assert summary.skewness == pytest.approx(skew, rel=stol, abs=stol)
    assert summary.kurtosis == pytest.approx(kurt, rel=stol)


class TestExamples:
    def test_one_to_five(self):
        expect = (3.0, math.sqrt(2.0), 0.0, 1.7)
        acc = MomentAccumulator()
        for v in [1, 2, 3, 4, 5]:
            acc.push(v)
        close(acc.summary(), expect, 1e-15, 1e-15)
        close(batch_moments([1, 2, 3, 4, 5]), expect, 1e-15, 1e-15)
        assert acc.summary().excess_kurtosis == pytest.approx(-1.3)

    def test_merge_example(self):
        a = MomentAccumulator().extend([1, 2])
        b = MomentAccumulator().extend([3, 4, 5])
        m = merge(a, b).summary()
        assert m.n == 5
        close(m, (3.0, math.sqrt(2.0), 0.0, 1.7), 1e-15, 1e-14)

    def test_too_few(self):
        acc = MomentAccumulator().extend([1, 2, 3])
        with pytest.raises(InsufficientData):
            acc.summary()
        with pytest.raises(InsufficientData):
            batch_moments([1, 2, 3])

    def test_constant_is_degenerate(self):
        acc = MomentAccumulator().extend([800.0] * 10)
        assert acc.is_degenerate
        with pytest.raises(DegenerateSample):
            acc.summary()
        with pytest.raises(DegenerateSample):
            batch_moments([800.0] * 10)

    def test_functional_accumulate_leaves_input(self):
        a = MomentAccumulator().extend([1.0, 2.0, 3.0])
        b = accumulate(a, 4.0)
        assert a.n == 3 and b.n == 4


class TestAccumulator:
    @settings(max_examples=100, deadline=None)
    @given(values)
    def test_push_matches_oracle(self, xs):
        if np.ptp(xs) == 0:
            return
        acc = MomentAccumulator()
        for v in xs:
            acc.push(v)
        close(acc.summary(), two_pass(xs), 1e-9, 1e-6)

    @settings(max_examples=100, deadline=None)
    @given(values, st.data())
    def test_merge_equals_concatenation(self, xs, data):
        if np.ptp(xs) == 0:
            return
        k = data.draw(st.integers(0, len(xs)))
        m = merge(MomentAccumulator().extend(xs[:k]), MomentAccumulator().extend(xs[k:]))
        close(m.summary(), two_pass(xs), 1e-9, 1e-6)

    @settings(max_examples=60, deadline=None)
    @given(values, st.data())
    def test_merge_associative(self, xs, data):
        if np.ptp(xs) == 0:
            return
        i = data.draw(st.integers(0, len(xs)))
        j = data.draw(st.integers(i, len(xs)))
        a, b, c = (MomentAccumulator().extend(p) for p in (xs[:i], xs[i:j], xs[j:]))
        left = merge(merge(a, b), c).summary()
        right = merge(a, merge(b, c)).summary()
        close(left, (right.mean, right.std, right.skewness, right.kurtosis), 1e-12, 1e-8)

    @settings(max_examples=60, deadline=None)
    @given(values, st.floats(0.1, 10.0), st.floats(-1000, 1000))
    def test_affine_invariance(self, xs, a, b):
        x = np.asarray(xs)
        if np.ptp(x) < 1e-3 * np.abs(x).max():
            return
        s = batch_moments(x)
        t = batch_moments(a * x + b)
        assert t.mean == pytest.approx(a * s.mean + b, rel=1e-9)
        assert t.std == pytest.approx(a * s.std, rel=1e-9)
        assert t.skewness == pytest.approx(s.skewness, abs=1e-6)
        assert t.kurtosis == pytest.approx(s.kurtosis, rel=1e-6)
        u = batch_moments(-x)
        assert u.skewness == pytest.approx(-s.skewness, abs=1e-9)
        assert u.kurtosis == pytest.approx(s.kurtosis, rel=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(values)
    def test_permutation_invariance(self, xs):
        if np.ptp(xs) == 0:
            return
        a = MomentAccumulator().extend(xs).summary()
        b = MomentAccumulator().extend(xs[::-1]).summary()
        close(a, (b.mean, b.std, b.skewness, b.kurtosis), 1e-12, 1e-8)

    @settings(max_examples=60, deadline=None)
    @given(values)
    def test_kurtosis_bound(self, xs):
        if np.ptp(xs) == 0:
            return
        s = batch_moments(xs)
        assert s.kurtosis >= s.skewness**2 + 1 - 1e-9

    def test_large_offset_stability(self, rng):
        # offset/std of 1e6, far beyond physiological data
        x = 1e6 + rng.standard_normal(10_000)
        acc = MomentAccumulator()
        for v in x[:2000]:
            acc.push(v)
        acc.extend(x[2000:])
        close(acc.summary(), two_pass(x), 1e-9, 1e-6)


class TestWindow:
    def test_fifo_example(self):
        w = WindowAccumulator(4)
        for v in [1, 2, 3, 4, 5, 6]:
            w.push(v)
        close(w.summary(), two_pass([3, 4, 5, 6]), 1e-14, 1e-12)
        assert w.full

    def test_functional_push(self):
        w = WindowAccumulator(4)
        w2 = window_push(w, 1.0)
        assert len(w) == 0 and len(w2) == 1

    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            WindowAccumulator(3)

    def test_degenerate_window(self):
        w = WindowAccumulator(4)
        for v in [1, 2, 5, 5, 5, 5]:
            w.push(v)
        assert w.is_degenerate
        with pytest.raises(DegenerateSample):
            w.summary()
        w.push(6)
        assert not w.is_degenerate

    @settings(max_examples=60, deadline=None)
    @given(values, st.integers(4, 20))
    def test_window_matches_batch(self, xs, cap):
        w = WindowAccumulator(cap)
        for i, v in enumerate(xs):
            w.push(v)
            tail = xs[max(0, i + 1 - cap): i + 1]
            if len(tail) >= 4 and np.ptp(tail) > 0:
                close(w.summary(), two_pass(tail), 1e-9, 1e-6)

    def test_long_stream_drift(self, rng):
        x = rng.uniform(250, 3000, 20_000)
        w = WindowAccumulator(100)
        for v in x:
            w.push(v)
        close(w.summary(), two_pass(x[-100:]), 1e-10, 1e-8)


class TestTrajectories:
    def test_accumulated_points(self, rng):
        x = rng.uniform(250, 3000, 500)
        tr = accumulated_trajectory(x)
        assert tr.index[0] == 3 and tr.index[-1] == 499 and len(tr) == 497
        for i in (3, 10, 250, 499):
            k = int(np.flatnonzero(tr.index == i)[0])
            close(tr[k].summary, two_pass(x[: i + 1]))

    def test_stride(self, rng):
        x = rng.uniform(250, 3000, 103)
        tr = accumulated_trajectory(x, stride=10)
        np.testing.assert_array_equal(tr.index, np.arange(9, 103, 10))
        win = window_trajectory(x, 20, stride=10)
        np.testing.assert_array_equal(win.index, np.arange(19, 103, 10))

    def test_window_points(self, rng):
        x = rng.uniform(250, 3000, 9000)
        tr = window_trajectory(x, 100)
        assert len(tr) == 9000 - 99
        for i in (99, 100, 4194, 4195, 8999):
            k = int(np.flatnonzero(tr.index == i)[0])
            close(tr[k].summary, two_pass(x[i - 99 : i + 1]))

    def test_window_equals_accumulated_when_full(self, rng):
        x = rng.uniform(250, 3000, 100)
        a = accumulated_trajectory(x)
        w = window_trajectory(x, 100)
        assert len(w) == 1
        assert w.kurtosis[0] == pytest.approx(a.kurtosis[-1], rel=1e-12)

    def test_timestamps_follow_series(self):
        from hbload.ingest import series_from_intervals

        s = series_from_intervals(np.tile([700.0, 900.0, 800.0, 1000.0], 30))
        tr = accumulated_trajectory(s)
        np.testing.assert_array_equal(tr.t, s.t[tr.index])
        assert tr.shifted(5.0).t[0] == pytest.approx(tr.t[0] + 5.0)

    def test_degenerate_side_channel(self):
        x = np.r_[np.full(150, 800.0), np.linspace(700, 900, 50)]
        acc = accumulated_trajectory(x)
        assert acc.degenerate_index.tolist() == list(range(3, 150))
        assert acc.index[0] == 150
        win = window_trajectory(x, 100)
        assert win.degenerate_index.tolist() == list(range(99, 150))

    def test_rejects(self):
        with pytest.raises(ValueError):
            accumulated_trajectory([])
        with pytest.raises(ValueError):
            accumulated_trajectory([1, 2, 3, 4], stride=0)
        with pytest.raises(ValueError):
            window_trajectory(np.arange(50.0), 100)
        with pytest.raises(ValueError):
            window_trajectory(np.arange(50.0), 3)
