import random

import pytest

from tracewatt.callgraph import MethodInterval, method_intervals
from tracewatt.energy import (
    AttributionError,
    PowerFormatError,
    PowerProfile,
    PowerSample,
    TestEnergyRecord,
    aggregate_samples,
    attribute,
    integrate,
    parse_power,
    shift_profile,
    write_power,
)
from tracewatt.trace import MethodId

from conftest import random_call_tree

M = MethodId("com.app", "C", "m")


def _profile(samples, rate=20000.0) -> PowerProfile:
    return PowerProfile(
        "com.app.S::t", 0, rate, tuple(PowerSample(t, p) for t, p in samples)
    )


def _constant(power_mw, t_end_us, step=50.0):
    n = int(t_end_us / step) + 1
    return _profile([(i * step, power_mw) for i in range(n)])


class TestParsePower:
    def test_two_samples(self):
        profile = parse_power("#power v1;a.B::m;2;20000\n0;100.0\n50;100.0\n")
        assert profile.test_name == "a.B::m"
        assert profile.sample_index == 2
        assert profile.nominal_rate_hz == 20000.0
        assert profile.samples == (PowerSample(0.0, 100.0), PowerSample(50.0, 100.0))

    def test_duplicate_timestamp_rejected(self):
        with pytest.raises(PowerFormatError, match="not after"):
            parse_power("#power v1;a.B::m;0;20000\n0;1.0\n0;2.0\n")

    def test_empty_sample_section(self):
        profile = parse_power("#power v1;a.B::m;0;20000\n")
        assert profile.samples == ()
        with pytest.raises(AttributionError):
            integrate(profile, 0.0, 1.0)

    def test_negative_power_rejected(self):
        with pytest.raises(PowerFormatError, match="negative power"):
            parse_power("#power v1;a.B::m;0;20000\n0;-1.0\n")

    def test_malformed_line_number(self):
        with pytest.raises(PowerFormatError) as exc:
            parse_power("#power v1;a.B::m;0;20000\n0;1.0\nnope\n")
        assert exc.value.line == 3

    def test_round_trip_random_profiles(self):
        rng = random.Random(808)
        for _ in range(50):
            t = 0.0
            samples = []
            for _ in range(rng.randrange(2, 40)):
                t += rng.random() * 100 + 0.01
                samples.append((t, round(rng.random() * 500, 6)))
            profile = _profile(samples, rate=rng.choice([20000.0, 5000.0]))
            assert parse_power(write_power(profile)) == profile


class TestIntegrate:
    def test_constant_power_window(self):
        profile = _constant(100.0, 20000.0)
        assert integrate(profile, 0.0, 10000.0) == pytest.approx(1.0, rel=1e-9)

    def test_linear_ramp_is_exact(self):
        profile = _profile([(0.0, 0.0), (10000.0, 100.0)])
        assert integrate(profile, 0.0, 10000.0) == pytest.approx(0.5, rel=1e-9)

    def test_window_outside_range(self):
        profile = _constant(100.0, 1000.0)
        with pytest.raises(AttributionError, match="outside sampled range"):
            integrate(profile, -5.0, 5.0)
        with pytest.raises(AttributionError, match="outside sampled range"):
            integrate(profile, 500.0, 2000.0)

    def test_degenerate_window(self):
        profile = _constant(100.0, 1000.0)
        with pytest.raises(AttributionError, match="bad window"):
            integrate(profile, 10.0, 10.0)

    def test_additivity(self):
        rng = random.Random(5)
        for _ in range(50):
            samples = []
            t = 0.0
            for _ in range(rng.randrange(2, 60)):
                samples.append((t, rng.random() * 300))
                t += rng.random() * 80 + 1
            profile = _profile(samples)
            t_first, t_last = samples[0][0], samples[-1][0]
            a = rng.uniform(t_first, t_last)
            c = rng.uniform(a, t_last)
            b = rng.uniform(a, c)
            if not a < b < c:
                continue
            whole = integrate(profile, a, c)
            split = integrate(profile, a, b) + integrate(profile, b, c)
            assert split == pytest.approx(whole, rel=1e-9, abs=1e-15)

    def test_matches_closed_form_on_piecewise_linear(self):
        # oracle: integrate each linear segment p(t) = m t + c analytically
        rng = random.Random(6)
        for _ in range(50):
            samples = []
            t = 0.0
            for _ in range(rng.randrange(2, 40)):
                samples.append((t, rng.random() * 200))
                t += rng.random() * 50 + 1
            profile = _profile(samples)
            a = rng.uniform(samples[0][0], samples[-1][0] - 0.5)
            b = rng.uniform(a + 0.001, samples[-1][0])
            expected = 0.0
            for (t0, p0), (t1, p1) in zip(samples, samples[1:]):
                lo, hi = max(a, t0), min(b, t1)
                if hi <= lo:
                    continue
                slope = (p1 - p0) / (t1 - t0)
                intercept = p0 - slope * t0
                expected += slope / 2 * (hi * hi - lo * lo) + intercept * (hi - lo)
            expected *= 1e-6
            assert integrate(profile, a, b) == pytest.approx(expected, rel=1e-9, abs=1e-15)


class TestAttribute:
    def test_constant_power_parent_child(self):
        profile = _constant(100.0, 20000.0)
        intervals = [
            MethodInterval(M, 1, 0, 10_000_000, 0),
            MethodInterval(MethodId("com.app", "C", "child"), 1, 2_000_000, 4_000_000, 1),
        ]
        records = attribute(intervals, profile)
        assert records[0].energy_mj_inclusive == pytest.approx(1.0, rel=1e-9)
        assert records[1].energy_mj_inclusive == pytest.approx(0.4, rel=1e-9)
        assert records[0].energy_mj_exclusive == pytest.approx(0.6, rel=1e-9)
        assert records[0].avg_power_mw == pytest.approx(100.0, rel=1e-9)

    def test_zero_duration_leaf(self):
        profile = _constant(100.0, 1000.0)
        records = attribute([MethodInterval(M, 1, 5000, 0, 0)], profile)
        assert records[0].energy_mj_inclusive == 0.0
        assert records[0].energy_mj_exclusive == 0.0
        assert records[0].avg_power_mw == 0.0

    def test_siblings_tiling_parent_leave_zero_exclusive(self):
        profile = _constant(200.0, 2000.0)
        parent = MethodInterval(M, 1, 0, 1_000_000, 0)
        left = MethodInterval(M, 1, 0, 500_000, 1)
        right = MethodInterval(M, 1, 500_000, 500_000, 1)
        records = attribute([parent, left, right], profile)
        assert records[0].energy_mj_exclusive == pytest.approx(0.0, abs=1e-12)

    def test_interval_outside_profile(self):
        profile = _constant(100.0, 1000.0)
        with pytest.raises(AttributionError, match="outside sampled range"):
            attribute([MethodInterval(M, 1, 0, 5_000_000, 0)], profile)

    def test_conservation_on_random_trees(self):
        rng = random.Random(77)
        for _ in range(50):
            tree = random_call_tree(rng, max_nodes=40)
            intervals = method_intervals(tree)
            if not intervals:
                continue
            end_ns = max(iv.t_start_ns + iv.duration_ns for iv in intervals)
            profile = _profile(
                [(t * 10.0, 50.0 + (t % 7) * 13.0) for t in range(end_ns // 10_000 + 2)]
            )
            records = attribute(intervals, profile)
            total_exclusive = sum(r.energy_mj_exclusive for r in records)
            roots_inclusive = sum(
                r.energy_mj_inclusive
                for r, iv in zip(records, intervals)
                if iv.depth == 0
            )
            assert total_exclusive == pytest.approx(roots_inclusive, rel=1e-6, abs=1e-12)


class TestAggregateSamples:
    def _record(self, energy, power=10.0, duration=5.0, name="a.B::t", rev="1.0"):
        return TestEnergyRecord(name, rev, energy, power, duration, 1)

    def test_single_record_identity(self):
        record = self._record(1.5)
        out = aggregate_samples([record])
        assert out.energy_mj == 1.5
        assert out.n_samples_averaged == 1

    def test_arithmetic_mean(self):
        out = aggregate_samples([self._record(1.0), self._record(3.0)])
        assert out.energy_mj == 2.0
        assert out.n_samples_averaged == 2

    def test_median_option(self):
        records = [self._record(1.0), self._record(2.0), self._record(30.0)]
        assert aggregate_samples(records, method="median").energy_mj == 2.0

    def test_mixed_test_names_rejected(self):
        with pytest.raises(ValueError, match="mixed test names"):
            aggregate_samples([self._record(1.0), self._record(2.0, name="a.B::u")])

    def test_mixed_revisions_rejected(self):
        with pytest.raises(ValueError, match="mixed revisions"):
            aggregate_samples([self._record(1.0), self._record(2.0, rev="2.0")])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_samples([])


def test_shift_profile_moves_clock():
    profile = _profile([(0.0, 1.0), (50.0, 2.0)])
    shifted = shift_profile(profile, 25.0)
    assert [s.t_us for s in shifted.samples] == [25.0, 75.0]
    assert shift_profile(profile, 0.0) is profile


def test_unit_sanity_constant_power():
    # P mW over d ms must give exactly P*d/1000 mJ
    for power, d_ms in [(1.0, 1.0), (250.0, 8.0), (3.3, 12.0)]:
        profile = _constant(power, d_ms * 1000 + 100)
        energy = integrate(profile, 0.0, d_ms * 1000)
        assert energy == pytest.approx(power * d_ms / 1000.0, rel=1e-12)
