import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from freezeout.errors import ConfigurationError
from freezeout.schedule import (STRATEGIES, LayerSchedule, ScheduleParams, ScheduleStrategy,
                                compute_t_schedule, cosine_lr, dump_schedule, freeze_iteration,
                                initial_lrs, is_frozen, layer_schedules, lr_at,
                                write_schedule_csv)

t0s = st.floats(0.01, 1.0)
layers = st.integers(1, 40)
strategies = st.sampled_from(STRATEGIES)


def params(t0=0.5, layers=5, strategy="linear-unscaled", alpha=0.1):
    return ScheduleParams(t0, alpha, layers, ScheduleStrategy.from_name(strategy))


class TestStrategy:
    def test_four_combinations(self):
        assert sorted(s.name for s in STRATEGIES) == [
            "cubic-scaled", "cubic-unscaled", "linear-scaled", "linear-unscaled"]

    @pytest.mark.parametrize("bad", ["quadratic-scaled", "linear", "cubic-sorta", ""])
    def test_rejects_unknown(self, bad):
        with pytest.raises(ConfigurationError):
            ScheduleStrategy.from_name(bad)

    def test_round_trip(self):
        for s in STRATEGIES:
            assert ScheduleStrategy.from_name(s.name) == s


class TestTSchedule:
    def test_linear_example(self):
        assert compute_t_schedule(params()) == [0.5, 0.625, 0.75, 0.875, 1.0]

    def test_cubic_t0_half(self):
        assert compute_t_schedule(params(strategy="cubic-unscaled"))[0] == 0.125

    def test_cubic_t0_point_eight(self):
        assert compute_t_schedule(params(t0=0.8, strategy="cubic-scaled"))[0] == 0.512

    def test_single_layer(self):
        for s in STRATEGIES:
            assert compute_t_schedule(ScheduleParams(0.3, 0.1, 1, s)) == [1.0]

    @pytest.mark.parametrize("t0", [-0.1, 1.01])
    def test_t0_out_of_range(self, t0):
        with pytest.raises(ConfigurationError):
            params(t0=t0)

    def test_t0_zero(self):
        with pytest.raises(ConfigurationError):
            params(t0=0.0, strategy="cubic-scaled")
        with pytest.warns(UserWarning):
            p = params(t0=0.0, strategy="linear-unscaled")
        assert compute_t_schedule(p)[0] == 0.0

    def test_needs_a_layer(self):
        with pytest.raises(ConfigurationError):
            params(layers=0)

    @given(t0s, layers, strategies)
    def test_monotone_and_ends_at_one(self, t0, n, strategy):
        ts = compute_t_schedule(ScheduleParams(t0, 0.1, n, strategy))
        assert len(ts) == n
        assert ts[-1] == 1.0
        assert all(a <= b for a, b in zip(ts, ts[1:]))
        assert all(0 < t <= 1 for t in ts)

    @given(t0s, layers)
    def test_cubic_is_cube_of_linear(self, t0, n):
        lin = compute_t_schedule(ScheduleParams(t0, 0.1, n, ScheduleStrategy("linear", False)))
        cub = compute_t_schedule(ScheduleParams(t0, 0.1, n, ScheduleStrategy("cubic", False)))
        for c, l in zip(cub, lin):
            assert c == pytest.approx(l ** 3, rel=1e-15)

    @given(t0s, layers)
    def test_cubic_never_later_than_linear(self, t0, n):
        lin = compute_t_schedule(ScheduleParams(t0, 0.1, n, ScheduleStrategy("linear", False)))
        cub = compute_t_schedule(ScheduleParams(t0, 0.1, n, ScheduleStrategy("cubic", False)))
        assert all(c <= l for c, l in zip(cub, lin))

    @given(layers, strategies)
    def test_t0_one_never_freezes(self, n, strategy):
        p = ScheduleParams(1.0, 0.1, n, strategy)
        assert compute_t_schedule(p) == [1.0] * n
        assert initial_lrs(p, compute_t_schedule(p)) == [0.1] * n


class TestInitialLrs:
    def test_unscaled(self):
        p = params()
        assert initial_lrs(p, compute_t_schedule(p)) == [0.1] * 5

    def test_scaled_value(self):
        assert initial_lrs(params(strategy="linear-scaled"), [0.512, 1.0]) == [0.1953125, 0.1]

    def test_scaled_rejects_zero(self):
        with pytest.raises(ConfigurationError):
            initial_lrs(params(strategy="linear-scaled"), [0.0, 1.0])

    @given(t0s, layers, st.sampled_from(["linear-scaled", "cubic-scaled"]),
           st.floats(1e-4, 10.0))
    def test_scaled_product_is_base_lr(self, t0, n, name, alpha):
        for s in layer_schedules(ScheduleParams(t0, alpha, n, ScheduleStrategy.from_name(name))):
            assert s.alpha_0 * s.t_i == pytest.approx(alpha, rel=1e-14)


class TestLrAt:
    def test_start_mid_end(self):
        s = LayerSchedule(0.6, 0.3)
        assert lr_at(s, 0.0) == 0.3
        assert lr_at(s, 0.3) == pytest.approx(0.15, abs=1e-15)
        assert lr_at(s, 0.6) == 0.0
        assert lr_at(s, 0.9) == 0.0

    def test_matches_plain_cosine_for_last_layer(self):
        s = LayerSchedule(1.0, 0.1)
        for t in np.linspace(0, 0.999, 50):
            assert lr_at(s, t) == cosine_lr(0.1, t)

    @given(st.floats(0.01, 1.0), st.floats(1e-3, 5.0), st.lists(st.floats(0, 1), min_size=2, max_size=20))
    def test_non_negative_and_non_increasing(self, t_i, a0, ts):
        s = LayerSchedule(t_i, a0)
        ts = sorted(ts)
        vals = [lr_at(s, t) for t in ts]
        assert all(v >= 0 for v in vals)
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))

    def test_continuous_at_freeze_time(self):
        s = LayerSchedule(0.4, 1.0)
        assert lr_at(s, 0.4 - 1e-9) < 1e-15


class TestIsFrozen:
    def test_boundaries(self):
        assert not is_frozen(LayerSchedule(0.5, 0.1), 0.499)
        assert is_frozen(LayerSchedule(0.5, 0.1), 0.5)
        last = LayerSchedule(1.0, 0.1)
        assert not any(is_frozen(last, k / 1000) for k in range(1000))
        assert is_frozen(last, 1.0)

    @given(st.floats(0.0, 1.0), st.integers(1, 5000))
    def test_freeze_iteration_agrees_with_is_frozen(self, t_i, n):
        k = freeze_iteration(t_i, n)
        assert k == n or is_frozen(LayerSchedule(t_i, 1.0), k / n)
        assert k == 0 or not is_frozen(LayerSchedule(t_i, 1.0), (k - 1) / n)

    @given(st.floats(0.0, 1.0), st.integers(1, 5000))
    def test_freeze_iteration_is_ceil(self, t_i, n):
        assert freeze_iteration(t_i, n) == math.ceil(t_i * n)


class TestEqualDistance:
    @pytest.mark.parametrize("name", ["linear-scaled", "cubic-scaled"])
    def test_scaled_curves_integrate_to_half_alpha(self, name):
        alpha = 0.1
        for s in layer_schedules(params(t0=0.5, layers=5, strategy=name, alpha=alpha)):
            t = np.linspace(0.0, s.t_i, 100_000)
            area = np.trapezoid([lr_at(s, v) for v in t], t)
            assert abs(area - alpha / 2) / (alpha / 2) < 1e-6

    def test_unscaled_curves_do_not(self):
        areas = []
        for s in layer_schedules(params(strategy="linear-unscaled")):
            t = np.linspace(0.0, s.t_i, 10_001)
            areas.append(np.trapezoid([lr_at(s, v) for v in t], t))
        assert areas == sorted(areas) and areas[0] < areas[-1]


class TestDump:
    def test_layer0_hits_zero_at_500(self):
        rows = dump_schedule(params(), 1000)
        lr0 = [lr for k, t, i, lr, f in rows if i == 0]
        assert lr0.index(0.0) == 500
        assert all(v > 0 for v in lr0[:500])

    def test_cubic_layer0_hits_zero_at_125(self):
        rows = dump_schedule(params(strategy="cubic-unscaled"), 1000)
        lr0 = [lr for k, t, i, lr, f in rows if i == 0]
        assert lr0.index(0.0) == 125

    def test_single_layer_is_plain_cosine(self):
        rows = dump_schedule(params(layers=1), 100)
        assert [lr for *_, lr, _ in rows] == [cosine_lr(0.1, k / 100) for k in range(100)]
        assert not any(f for *_, f in rows)

    def test_rows_and_frozen_flag(self):
        rows = dump_schedule(params(), 1000)
        assert len(rows) == 5000
        for k, t, i, lr, frozen in rows:
            assert t == k / 1000
            assert frozen == (lr == 0.0 and i < 4)

    def test_csv_format(self):
        text = write_schedule_csv(dump_schedule(params(t0=0.8, strategy="cubic-scaled"), 10))
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["iteration", "t", "layer_index", "lr", "frozen"]
        assert len(rows) == 51
        assert rows[1] == ["0", "0.0", "0", "0.1953125", "0"]
        assert {r[4] for r in rows[1:]} <= {"0", "1"}
