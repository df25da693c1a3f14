import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mixedtraffic.observe import LayoutError
from mixedtraffic.rewards import (
    RewardParams,
    headway,
    reward_bottleneck,
    reward_desired_velocity,
    reward_intersection,
    reward_merge,
    reward_ring,
)

P = RewardParams()


class TestRing:
    def test_mean_velocity_no_action(self):
        assert reward_ring(np.full(22, 5.0), 0.0, P) == 5.0

    def test_action_penalty(self):
        assert reward_ring(np.full(22, 5.0), 0.5, P) == pytest.approx(3.0)
        assert reward_ring(np.full(22, 5.0), -0.5, P) == pytest.approx(3.0)

    def test_all_stopped(self):
        assert reward_ring(np.zeros(22), 0.0, P) == 0.0

    def test_wrong_size_rejected(self):
        with pytest.raises(LayoutError):
            reward_ring(np.zeros(21), 0.0, P)

    def test_linear_in_mean_velocity_and_action(self):
        r0 = reward_ring(np.full(22, 2.0), 0.2, P)
        r1 = reward_ring(np.full(22, 4.0), 0.2, P)
        r2 = reward_ring(np.full(22, 6.0), 0.2, P)
        assert r2 - r1 == pytest.approx(r1 - r0)
        a0 = reward_ring(np.full(22, 5.0), 0.1, P)
        a1 = reward_ring(np.full(22, 5.0), 0.2, P)
        a2 = reward_ring(np.full(22, 5.0), 0.3, P)
        assert a2 - a1 == pytest.approx(a1 - a0)


class TestDesiredVelocity:
    def test_at_target(self):
        assert reward_desired_velocity(np.full(14, 10.0), 10.0) == 1.0

    def test_all_stopped(self):
        assert reward_desired_velocity(np.zeros(14), 10.0) == 0.0

    def test_half_speed(self):
        assert reward_desired_velocity(np.full(14, 5.0), 10.0) == pytest.approx(0.5)

    @given(
        st.lists(st.floats(0.0, 30.0), min_size=1, max_size=30),
        st.floats(1.0, 20.0),
    )
    def test_bounded_unit_interval(self, velocities, v_des):
        r = reward_desired_velocity(np.array(velocities), v_des)
        assert 0.0 <= r <= 1.0

    @given(st.lists(st.floats(0.0, 9.0), min_size=2, max_size=20))
    def test_moving_toward_target_never_hurts(self, velocities):
        v = np.array(velocities)
        base = reward_desired_velocity(v, 10.0)
        closer = reward_desired_velocity(v + 0.5 * (10.0 - v), 10.0)
        assert closer >= base - 1e-12

    def test_one_iff_at_target(self):
        v = np.full(5, 10.0)
        v[2] = 9.99
        assert reward_desired_velocity(v, 10.0) < 1.0


class TestIntersection:
    def test_all_at_limit_is_zero(self):
        v = np.full(6, 10.0)
        assert reward_intersection(37.0, v, np.full(6, 10.0), 0, P) == 0.0

    def test_half_limit_case(self):
        v = np.full(4, 5.0)
        r = reward_intersection(100.0, v, np.full(4, 10.0), 0, P)
        assert r == pytest.approx(-50.0, abs=1e-4)

    def test_standstill_penalty(self):
        v = np.full(6, 10.0)
        assert reward_intersection(10.0, v, np.full(6, 10.0), 3, P) == pytest.approx(-0.6)

    def test_never_positive(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 20))
            v = rng.uniform(0, 10, n)
            r = reward_intersection(
                float(rng.uniform(0, 40)), v, np.full(n, 10.0), int(rng.integers(0, 5)), P
            )
            assert r <= 1e-12

    def test_empty_world(self):
        assert reward_intersection(10.0, np.zeros(0), np.zeros(0), 0, P) == 0.0


class TestMerge:
    def test_no_penalty_at_target(self):
        r = reward_merge(np.full(10, 10.0), [1.5, 2.0], P)
        assert r == 1.0

    def test_small_headway_penalty(self):
        # desired-velocity part is exactly 1, one RV at 0.5 s headway
        r = reward_merge(np.full(10, 10.0), [0.5], P)
        assert r == pytest.approx(1.0 - 0.1 * 0.5)

    def test_all_stopped_far_apart(self):
        # stopped vehicles have huge time headways under the floor rule
        h = headway(25.0, 0.0)
        assert h == 250.0
        assert reward_merge(np.zeros(10), [h, h], P) == 0.0

    def test_headway_floor(self):
        assert headway(10.0, 0.05) == pytest.approx(100.0)
        assert headway(10.0, 5.0) == pytest.approx(2.0)


class TestBottleneck:
    def test_four_exits_in_window(self):
        assert reward_bottleneck([1.0, 3.0, 5.0, 9.9], 10.0, 10.0) == pytest.approx(1440.0)

    def test_no_exits(self):
        assert reward_bottleneck([], 10.0, 10.0) == 0.0

    def test_window_boundary_half_open(self):
        # an exit exactly at now-window is excluded; exactly at now included
        assert reward_bottleneck([0.0], 10.0, 10.0) == 0.0
        assert reward_bottleneck([10.0], 10.0, 10.0) == pytest.approx(360.0)

    def test_disjoint_windows_sum_to_total(self, rng):
        times = sorted(rng.uniform(0, 100, 57))
        total = sum(
            round(reward_bottleneck(times, w_end, 10.0) * 10.0 / 3600.0)
            for w_end in range(10, 101, 10)
        )
        assert total == 57
