from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from fastdata.sketches import (
    AdaptableDampedReservoir,
    AmortizedMaintenanceCounter,
    DecayDriver,
    PeriodSampleFolder,
    SpaceSaving,
    SubperiodAverager,
)


class TestAdrBasics:
    def test_fill_phase_retains_everything(self):
        adr = AdaptableDampedReservoir(5, seed=0)
        for x in range(5):
            adr.observe(float(x))
        assert adr.weight == 5.0
        assert sorted(adr.sample()) == [0.0, 1.0, 2.0, 3.0, 4.0]

    def test_overweight_items_always_inserted(self):
        # after decay pushes c_w below k, insertion probability clamps to 1
        adr = AdaptableDampedReservoir(5, decay_rate=0.8, seed=0)
        for x in range(5):
            adr.observe(float(x))
        adr.decay()  # c_w = 1.0 < k
        adr.observe(99.0)
        assert 99.0 in adr.sample()

    def test_zero_weight_leaves_cw(self):
        adr = AdaptableDampedReservoir(2, seed=0)
        adr.observe(1.0, w=0.0)
        assert adr.weight == 0.0
        assert len(adr) == 1

    def test_negative_weight_rejected(self):
        adr = AdaptableDampedReservoir(2, seed=0)
        with pytest.raises(ValueError):
            adr.observe(1.0, w=-1.0)

    def test_decay_examples(self):
        adr = AdaptableDampedReservoir(4, decay_rate=0.5, seed=0)
        adr.weight = 100.0
        adr.decay()
        assert adr.weight == 50.0

        adr = AdaptableDampedReservoir(4, decay_rate=0.0, seed=0)
        adr.weight = 100.0
        adr.decay()
        assert adr.weight == 100.0

        adr = AdaptableDampedReservoir(4, decay_rate=0.1, seed=0)
        adr.weight = 100.0
        adr.decay()
        adr.decay()
        assert adr.weight == pytest.approx(81.0)

    def test_decay_never_changes_contents(self):
        adr = AdaptableDampedReservoir(3, decay_rate=0.5, seed=1)
        adr.observe_many(np.arange(10.0))
        before = adr.sample()
        adr.decay()
        assert np.array_equal(adr.sample(), before)

    def test_quantile_examples(self):
        adr = AdaptableDampedReservoir(200, seed=0)
        adr.observe_many(np.arange(1.0, 101.0))
        assert adr.quantile(0.99) == 99.0

        single = AdaptableDampedReservoir(4, seed=0)
        single.observe(7.0)
        assert single.quantile(0.5) == 7.0

    def test_quantile_empty_rejected(self):
        with pytest.raises(ValueError):
            AdaptableDampedReservoir(4, seed=0).quantile(0.5)


class TestAdrWeightConservation:
    def test_exact_replay_power_of_two(self):
        # r = 0.5 and integer weights keep float arithmetic exact
        adr = AdaptableDampedReservoir(4, decay_rate=0.5, seed=0)
        expected = Fraction(0)
        for step, w in enumerate([1, 2, 4, 1, 8, 2, 1]):
            adr.observe(0.0, float(w))
            expected += w
            if step % 2 == 1:
                adr.decay()
                expected *= Fraction(1, 2)
        assert adr.weight == float(expected)

    def test_replay_general_floats(self):
        rng = np.random.default_rng(3)
        adr = AdaptableDampedReservoir(8, decay_rate=0.13, seed=0)
        weights, decays_after = [], []
        for _ in range(200):
            w = float(rng.random())
            adr.observe(0.0, w)
            weights.append(w)
            decays_after.append(0)
            if rng.random() < 0.3:
                adr.decay()
                decays_after = [d + 1 for d in decays_after]
        expected = sum(w * 0.87**d for w, d in zip(weights, decays_after))
        assert adr.weight == pytest.approx(expected, rel=1e-12)


class TestAdrBulk:
    def test_bulk_weight_matches_scalar(self):
        a = AdaptableDampedReservoir(10, seed=5)
        b = AdaptableDampedReservoir(10, seed=5)
        xs = np.arange(500.0)
        ws = np.linspace(0.1, 2.0, 500)
        a.observe_many(xs, ws)
        for x, w in zip(xs, ws):
            b.observe(float(x), float(w))
        assert a.weight == pytest.approx(b.weight, rel=1e-12)
        assert len(a) == len(b) == 10

    def test_bulk_inclusion_probability_uniform(self):
        # every item's inclusion probability is k/n without decay
        k, n, trials = 10, 200, 3000
        hits = np.zeros(n)
        for t in range(trials):
            adr = AdaptableDampedReservoir(k, seed=t)
            adr.observe_many(np.arange(float(n)))
            hits[adr.sample().astype(int)] += 1
        freq = hits / trials
        expected = k / n
        # 5-sigma band on a binomial proportion
        band = 5 * np.sqrt(expected * (1 - expected) / trials)
        assert np.all(np.abs(freq - expected) < band)

    @pytest.mark.parametrize("k", [100, 1000, 20000])
    def test_quantile_rank_error_envelope(self, k):
        # empirical check of the rank-error envelope sqrt(ln(2/delta)/(2k))
        # at delta = 1%: at most ~1 excursion in 50 seeded trials
        delta = 0.01
        envelope = np.sqrt(np.log(2 / delta) / (2 * k))
        failures = 0
        for trial in range(50):
            rng = np.random.default_rng(trial)
            adr = AdaptableDampedReservoir(k, seed=trial)
            adr.observe_many(rng.random(max(5 * k, 50_000)))
            for q in (0.5, 0.9, 0.99):
                if abs(adr.quantile(q) - q) > envelope:
                    failures += 1
        assert failures <= 1

    def test_tuple_decayed_matches_scalar_loop(self):
        retention = 0.995
        adr = AdaptableDampedReservoir(6, decay_rate=1 - retention, seed=5)
        xs = np.arange(400.0)
        adr.observe_many_tuple_decayed(xs)
        cw = 0.0
        for _ in xs:
            cw = retention * cw + 1.0
        assert adr.weight == pytest.approx(cw, rel=1e-9)


def trace_amc(stable_size: int, events: list) -> AmortizedMaintenanceCounter:
    amc = AmortizedMaintenanceCounter(stable_size, size_bound_factor=1e9)
    for event in events:
        if event == "maintain":
            amc.maintain()
        elif isinstance(event, tuple) and event[0] == "decay":
            amc.decay(event[1])
        else:
            amc.observe(*event)
    return amc


class TestAmc:
    def test_fresh_observe(self):
        amc = trace_amc(4, [("a", 1.0)])
        assert amc.counts == {"a": 1.0}

    def test_new_item_gets_carry_over(self):
        amc = trace_amc(4, [("a", 1.0)])
        amc.carry_over = 3.0
        amc.observe("b", 1.0)
        assert amc.counts["b"] == 4.0

    def test_existing_item_increments(self):
        amc = trace_amc(4, [("a", 4.0), ("a", 2.0)])
        assert amc.counts["a"] == 6.0

    def test_maintain_hand_trace(self):
        amc = trace_amc(2, [("a", 3.0), ("b", 2.0), ("c", 1.0), "maintain"])
        assert amc.counts == {"a": 3.0, "b": 2.0}
        assert amc.carry_over == 1.0

    def test_maintain_no_removal_keeps_carry(self):
        amc = trace_amc(2, [("a", 3.0), ("b", 2.0)])
        amc.carry_over = 9.0
        amc.maintain()
        assert amc.counts == {"a": 3.0, "b": 2.0}
        assert amc.carry_over == 9.0

    def test_fresh_maintain_leaves_zero_carry(self):
        amc = trace_amc(2, [("a", 3.0), ("b", 2.0)])
        amc.maintain()
        assert amc.carry_over == 0.0

    def test_maintain_idempotent(self):
        amc = trace_amc(2, [("a", 3.0), ("b", 2.0), ("c", 1.0), "maintain"])
        snapshot = (dict(amc.counts), amc.carry_over)
        amc.maintain()
        assert (dict(amc.counts), amc.carry_over) == snapshot

    def test_decay_scales_counts(self):
        amc = trace_amc(4, [("a", 10.0), ("decay", 0.99)])
        assert amc.counts["a"] == pytest.approx(9.9)

    def test_decay_identity_retention(self):
        amc = trace_amc(4, [("a", 10.0), ("b", 1.0), ("decay", 1.0)])
        assert amc.counts == {"a": 10.0, "b": 1.0}

    def test_decay_then_prune(self):
        amc = trace_amc(2, [("a", 3.0), ("b", 2.0), ("c", 4.0), ("decay", 0.5)])
        # after halving: a=1.5, b=1.0, c=2.0 -> keep c, a; w = 1.0
        assert amc.counts == {"c": 2.0, "a": 1.5}
        assert amc.carry_over == 1.0

    def test_tie_break_keeps_earliest(self):
        amc = trace_amc(1, [("a", 2.0), ("b", 2.0), "maintain"])
        assert list(amc.counts) == ["a"]

    def test_estimate_unseen_zero_carry(self):
        amc = trace_amc(4, [])
        assert amc.estimate("never") == 0.0

    def test_estimate_unseen_uses_carry(self):
        amc = trace_amc(2, [("a", 3.0), ("b", 2.0), ("c", 1.0), "maintain"])
        assert amc.estimate("c") == 1.0

    def test_frequent_full_fraction_pigeonhole(self):
        amc = trace_amc(10, [("a", 5.0), ("b", 3.0), ("c", 2.0)])
        assert len(amc.frequent(1.0)) <= 1

    def test_size_bound_triggers_maintenance(self):
        amc = AmortizedMaintenanceCounter(2, size_bound_factor=2.0)
        for item in "abcdefgh":
            amc.observe(item, 1.0)
        assert len(amc) <= 4


class TestAmcVersusExactCounter:
    @pytest.mark.parametrize("kind", ["zipf", "uniform"])
    def test_overshoot_bounded(self, kind):
        rng = np.random.default_rng(11)
        n = 60_000
        if kind == "zipf":
            stream = rng.zipf(1.3, size=n)
        else:
            stream = rng.integers(2_000, size=n)
        amc = AmortizedMaintenanceCounter(500)
        exact: dict[int, float] = {}
        for pos, item in enumerate(stream.tolist(), 1):
            amc.observe(item)
            exact[item] = exact.get(item, 0.0) + 1.0
            if pos % 10_000 == 0:
                amc.decay(0.95)
                for key in exact:
                    exact[key] *= 0.95
                # carry-over bounded by eps * decayed total weight
                assert amc.carry_over <= (1 / 500) * amc.total_weight + 1e-9
        for item, true_count in exact.items():
            overshoot = amc.estimate(item) - true_count
            assert overshoot <= amc.max_carry_over + 1e-9
            if item in amc.counts:
                assert overshoot >= -1e-9

    def test_total_weight_tracks_decayed_stream(self):
        amc = AmortizedMaintenanceCounter(4)
        amc.observe("a", 2.0)
        amc.observe("b", 3.0)
        amc.decay(0.5)
        assert amc.total_weight == pytest.approx(2.5)


class TestSpaceSaving:
    def test_eviction_inherits_count(self):
        ss = SpaceSaving(2)
        for item in ("a", "b", "c"):
            ss.observe(item)
        assert ss.estimate("c") == 2.0
        assert ss.errors["c"] == 1.0
        assert len(ss) == 2

    def test_all_distinct_exact(self):
        ss = SpaceSaving(10)
        for item in range(10):
            ss.observe(item)
        assert all(ss.estimate(i) == 1.0 for i in range(10))

    def test_heavy_item_always_present(self):
        # classic guarantee: frequency > W/m implies presence
        rng = np.random.default_rng(2)
        for trial in range(20):
            m = 8
            stream = rng.integers(50, size=400).tolist()
            heavy = int(rng.integers(50))
            stream += [heavy] * 80  # > W/m of the total
            rng.shuffle(stream)
            ss = SpaceSaving(m)
            exact: dict[int, int] = {}
            for item in stream:
                ss.observe(item)
                exact[item] = exact.get(item, 0) + 1
            total = len(stream)
            for item, count in exact.items():
                if count > total / m:
                    assert item in ss.counts
            # overshoot bound W/m
            for item, est in ss.counts.items():
                assert est - exact.get(item, 0) <= total / m + 1e-9

    def test_agreement_with_amc_on_undecayed_stream(self):
        rng = np.random.default_rng(7)
        stream = rng.zipf(1.5, size=30_000)
        stable = 200
        amc = AmortizedMaintenanceCounter(stable)
        ss = SpaceSaving(stable)
        exact: dict[int, int] = {}
        for item in stream.tolist():
            amc.observe(item)
            ss.observe(item)
            exact[item] = exact.get(item, 0) + 1
        total = len(stream)
        eps = 1 / stable
        for item, count in exact.items():
            if count >= 2 * eps * total:
                amc_hits = {i for i, _ in amc.frequent(2 * eps * 0.5)}
                ss_hits = {i for i, _ in ss.frequent(2 * eps * 0.5)}
                assert item in amc_hits
                assert item in ss_hits


class TestDecayDriver:
    def test_tick_exactly_at_period(self):
        driver = DecayDriver(period_points=100_000)
        fired_at = []
        for i in range(1, 200_001):
            if driver.advance(1):
                fired_at.append(i)
        assert fired_at == [100_000, 200_000]

    def test_batch_spanning_periods(self):
        driver = DecayDriver(period_points=10)
        assert driver.advance(25) == 2
        assert driver.advance(5) == 1

    def test_time_ticks_without_arrivals(self):
        driver = DecayDriver(period_seconds=1.0)
        assert driver.advance(0, to_time=3.5) == 3

    def test_exactly_one_period_kind(self):
        with pytest.raises(ValueError):
            DecayDriver()
        with pytest.raises(ValueError):
            DecayDriver(period_points=10, period_seconds=1.0)


class TestPeriodPolicies:
    def test_period_sample_folded_and_cleared(self):
        adr = AdaptableDampedReservoir(8, decay_rate=0.5, seed=0)
        folder = PeriodSampleFolder(adr, seed=1)
        folder.observe_many(np.arange(100.0))
        assert len(adr) == 0
        folder.tick()
        assert len(adr) == 8
        assert len(folder.period) == 0
        # folded with unit weights: one period contributes at most k weight
        assert adr.weight == 8.0

    def test_burst_period_contributes_equal_weight(self):
        adr = AdaptableDampedReservoir(8, decay_rate=0.5, seed=0)
        folder = PeriodSampleFolder(adr, seed=1)
        folder.observe_many(np.arange(10.0))
        folder.tick()
        quiet_weight = adr.weight
        folder.observe_many(np.arange(10_000.0))  # arrival spike
        folder.tick()
        assert adr.weight == pytest.approx(quiet_weight * 0.5 + 8.0)

    def test_subperiod_average_inserted(self):
        adr = AdaptableDampedReservoir(4, seed=0)
        averager = SubperiodAverager(adr)
        for x in (1.0, 2.0, 3.0):
            averager.observe(x)
        averager.close_subperiod()
        assert adr.sample().tolist() == [2.0]
        assert adr.weight == 1.0

    def test_empty_subperiod_inserts_nothing(self):
        adr = AdaptableDampedReservoir(4, seed=0)
        SubperiodAverager(adr).close_subperiod()
        assert len(adr) == 0
