"""Trace analytics: slot classes, complete intervals, throughput accounting."""

import numpy as np
import pytest

from contend.core import ParamSet, RateFunction, eval_f
from contend.engine import SlotOutcome, SlotRecord, Trace, run_trial
from contend.analysis import (
    CompleteInterval,
    TraceCorruption,
    build_complete_intervals,
    classify_slots,
    count_active,
    success_curve,
    throughput_report,
    truncated_length,
)

G16 = RateFunction(kind="constant", value=16.0)
F2 = RateFunction(kind="constant", value=2.0)


from _synth import synthetic_trace


class TestCountActive:
    def test_empty_trace(self):
        tr = synthetic_trace(5, {}, {}, [0] * 5)
        assert count_active(tr, 5) == 0

    def test_one_shot_node(self):
        tr = synthetic_trace(1, {0: 1}, {1: 0}, [1])
        assert count_active(tr, 1) == 1

    def test_span_from_arrival_to_success(self):
        counts = [0, 0, 1, 1, 1, 1, 1, 0]
        tr = synthetic_trace(8, {0: 3}, {7: 0}, counts)
        assert count_active(tr, 8) == 5  # slots 3..7

    def test_rejects_t_beyond_horizon(self):
        tr = synthetic_trace(3, {}, {}, [0, 0, 0])
        with pytest.raises(ValueError):
            count_active(tr, 4)


class TestClassifySlots:
    def test_lone_node_triple_slot(self):
        tr = synthetic_trace(1, {0: 1}, {1: 0}, [1])
        cls = classify_slots(tr)[0]
        assert cls.beginning and cls.ending and cls.transition

    def test_successes_three_and_six(self):
        arrivals = {i: 1 for i in range(5)}
        tr = synthetic_trace(6, arrivals, {3: 0, 6: 1}, [5, 5, 5, 4, 4, 4])
        cls = classify_slots(tr)
        assert [c.transition for c in cls] == [False, False, True, False, False, True]

    def test_successes_three_and_five(self):
        # slot 5: last transition is 3, 5-3 even, and a success sits in [1, 4]
        arrivals = {i: 1 for i in range(5)}
        tr = synthetic_trace(6, arrivals, {3: 0, 5: 1}, [5, 5, 5, 4, 4, 4])
        cls = classify_slots(tr)
        assert cls[2].transition and not cls[4].transition

    def test_parity_gap_rule(self):
        # successes at 3 and 6 with an extra success at 4: {s in [4,5]: 6-s even} = {4}
        arrivals = {i: 1 for i in range(6)}
        tr = synthetic_trace(6, arrivals, {3: 0, 4: 1, 6: 2}, [6, 6, 6, 5, 4, 4])
        cls = classify_slots(tr)
        assert cls[2].transition
        assert not cls[5].transition  # success at 4 blocks condition (2)

    def test_ending_requires_single_active(self):
        tr = synthetic_trace(2, {0: 1, 1: 1}, {2: 0}, [2, 2])
        cls = classify_slots(tr)
        assert not cls[1].ending
        tr2 = synthetic_trace(2, {0: 1}, {2: 0}, [1, 1])
        assert classify_slots(tr2)[1].ending

    def test_pure_replay(self):
        tr = run_trial(
            {"name": "three_phase"},
            {"name": "random_jam", "rate": 0.2, "script": {"kind": "uniform", "n": 10}},
            200,
            4,
        )
        a = classify_slots(tr)
        b = classify_slots(tr)
        assert a == b


class TestCompleteIntervals:
    def test_lone_node_single_interval(self):
        tr = synthetic_trace(1, {0: 1}, {1: 0}, [1])
        ivs = build_complete_intervals(tr)
        assert [(iv.start, iv.end, iv.kind) for iv in ivs] == [(1, 1, "begin_to_transition")]
        assert ivs[0].successes == 1 and ivs[0].new_arrivals == 1

    def test_three_and_six_split(self):
        arrivals = {i: 1 for i in range(5)}
        tr = synthetic_trace(6, arrivals, {3: 0, 6: 1}, [5, 5, 5, 4, 4, 4])
        ivs = build_complete_intervals(tr)
        assert [(iv.start, iv.end, iv.kind) for iv in ivs] == [
            (1, 3, "begin_to_transition"),
            (4, 6, "transition_to_transition"),
        ]
        assert ivs[0].new_arrivals == 5 and ivs[1].new_arrivals == 0

    def test_no_arrivals_no_intervals(self):
        tr = synthetic_trace(10, {}, {}, [0] * 10)
        assert build_complete_intervals(tr) == []

    def test_ending_closes_transition_segment(self):
        # transition at 2; successes at 4 and 6 both miss the transition
        # conditions (even gap to r=2, or an intervening same-parity
        # success), so the last node's lone departure at 6 ends the segment
        tr = synthetic_trace(6, {0: 1, 1: 1, 2: 1}, {2: 0, 4: 1, 6: 2}, [3, 3, 2, 2, 1, 1])
        classes = classify_slots(tr)
        assert classes[3].transition is False and classes[5].transition is False
        assert classes[5].ending
        ivs = build_complete_intervals(tr, classes)
        assert [(iv.start, iv.end, iv.kind) for iv in ivs] == [
            (1, 2, "begin_to_transition"),
            (3, 6, "transition_to_ending"),
        ]
        assert ivs[1].successes == 2

    def test_corruption_detected(self):
        records = [
            SlotRecord(1, frozenset({0, 1}), False, (0, 1), SlotOutcome(0), 2),
        ]
        bad = Trace(records=records, arrivals={0: 1, 1: 1}, departures={0: 1}, horizon=1)
        with pytest.raises(TraceCorruption):
            build_complete_intervals(bad)

    def test_p2_start_counts_as_new_arrival(self):
        # node 1 arrives in the first interval and starts phase 2 in the second
        arrivals = {0: 1, 1: 1}
        tr = synthetic_trace(6, arrivals, {2: 0, 6: 1}, [2, 2, 1, 1, 1, 1])
        tr.p2_start = {1: 3}
        ivs = build_complete_intervals(tr)
        assert [(iv.start, iv.end) for iv in ivs] == [(1, 2), (3, 6)]
        assert ivs[0].new_arrivals == 2
        assert ivs[1].new_arrivals == 1  # node 1 again, via its phase-2 start


class TestTruncatedLength:
    def test_short_interval_truncates_to_zero(self):
        # every complete interval closes with a success, and 1 is never
        # below l/(32*c*c3*(t0+2)) at desk scale
        iv = CompleteInterval("begin_to_transition", 1, 1, new_arrivals=1, jams=0, successes=1)
        assert truncated_length(iv, ParamSet(), F2, G16) == 0

    def test_heavy_jamming_truncates(self):
        iv = CompleteInterval("transition_to_transition", 1, 1000, new_arrivals=0, jams=900, successes=1)
        assert truncated_length(iv, ParamSet(), F2, G16) == 0

    def test_many_successes_truncate(self):
        iv = CompleteInterval("transition_to_transition", 1, 1000, new_arrivals=0, jams=0, successes=999)
        assert truncated_length(iv, ParamSet(), F2, G16) == 0

    def test_long_quiet_interval_survives(self):
        p = ParamSet()
        l = 200_000  # above 32*c*c3*(t0+2) = 135168
        iv = CompleteInterval("transition_to_transition", 1, l, new_arrivals=0, jams=0, successes=1)
        assert truncated_length(iv, p, F2, G16) == l

    def test_threshold_arithmetic(self):
        p = ParamSet()
        assert 32 * p.c * p.c3 * (p.t0 + 2) == 135168


class TestThroughputReport:
    def test_empty(self):
        tr = synthetic_trace(4, {}, {}, [0] * 4)
        rep = throughput_report(tr, 4, F2, G16)
        assert rep.n_t == 0 and rep.d_t == 0 and rep.bound == 0 and rep.satisfied

    def test_bound_arithmetic(self):
        arrivals = {i: 1 for i in range(10)}
        active = [1] * 64 + [0] * (1024 - 64)
        tr = synthetic_trace(1024, arrivals, {}, active, jams=range(1, 6))
        rep = throughput_report(tr, 1024, F2, G16)
        assert rep.n_t == 10 and rep.d_t == 5
        assert rep.bound == pytest.approx(10 * 2.0 + 5 * 16.0)
        assert rep.active_slots == 64 and rep.satisfied
        violated = synthetic_trace(1024, arrivals, {}, [1] * 101 + [0] * 923, jams=range(1, 6))
        assert not throughput_report(violated, 1024, F2, G16).satisfied

    def test_jam_everything_bound(self):
        tr = synthetic_trace(1000, {0: 1}, {}, [1] * 1000, jams=range(1, 1001))
        rep = throughput_report(tr, 1000, F2, G16)
        assert rep.active_slots == 1000
        assert rep.bound == pytest.approx(2.0 + 1000 * 16.0)
        assert rep.satisfied  # bound >= 1000

    def test_monotone_in_f_and_g(self):
        tr = run_trial(
            {"name": "bexp"},
            {"name": "random_jam", "rate": 0.5, "script": {"kind": "batch", "n": 5, "slot": 1}},
            300,
            2,
        )
        small = throughput_report(tr, 300, lambda x: 0.01, lambda x: 0.01)
        big = throughput_report(tr, 300, F2, G16)
        if small.satisfied:
            assert big.satisfied


class TestSuccessCurve:
    def test_flat_zero(self):
        tr = synthetic_trace(4, {0: 1}, {}, [1] * 4)
        assert success_curve(tr) == [(1, 0), (2, 0), (3, 0), (4, 0)]

    def test_jumps(self):
        arrivals = {0: 1, 1: 1, 2: 1}
        tr = synthetic_trace(6, arrivals, {3: 0, 6: 1}, [3, 3, 3, 2, 2, 2])
        curve = success_curve(tr)
        assert curve[2] == (3, 1) and curve[5] == (6, 2)

    def test_final_value_matches_departures(self):
        tr = run_trial(
            {"name": "batch", "h": {"kind": "data"}},
            {"name": "none", "script": {"kind": "uniform", "n": 12}},
            200,
            6,
        )
        assert success_curve(tr)[-1][1] == len(tr.departures)


class TestInvariantsOnEngineTraces:
    """Small sibling of the acceptance analyzer suite."""

    def _random_trace(self, seed):
        rng = np.random.default_rng(seed)
        protocols = [
            {"name": "three_phase"},
            {"name": "bexp"},
            {"name": "batch", "h": {"kind": "data"}},
            {"name": "fixed", "schedule": {"kind": "harmonic"}},
        ]
        adversaries = [
            {"name": "none", "script": {"kind": "batch", "n": int(rng.integers(1, 20)), "slot": 1}},
            {"name": "none", "script": {"kind": "uniform", "n": int(rng.integers(1, 25))}},
            {"name": "random_jam", "rate": float(rng.uniform(0, 0.6)), "script": {"kind": "uniform", "n": 10}},
            {"name": "adaptive_probe", "d_max": 4, "script": {"kind": "batch", "n": 6, "slot": 2}},
            {"name": "theorem3"},
        ]
        horizon = int(rng.integers(16, 257))
        return run_trial(
            protocols[int(rng.integers(len(protocols)))],
            adversaries[int(rng.integers(len(adversaries)))],
            horizon,
            int(rng.integers(0, 2**32)),
        )

    def test_interval_invariants(self):
        for seed in range(60):
            trace = self._random_trace(seed)
            classes = classify_slots(trace)
            intervals = build_complete_intervals(trace, classes)
            active = {r.slot for r in trace.records if r.active_count >= 1}
            succ = {r.slot for r in trace.records if r.outcome.success}
            trans = {r.slot for (r, c) in zip(trace.records, classes) if c.transition}
            # transition subset of success subset. of active
            assert trans <= succ <= active
            # intervals disjoint, each closing on a success
            covered = set()
            for iv in intervals:
                span = set(range(iv.start, iv.end + 1))
                assert not (span & covered)
                covered |= span
                assert iv.end in succ
                assert span <= active
            # coverage: active slots at or before the last closing slot are covered
            last_end = max((iv.end for iv in intervals), default=0)
            assert {s for s in active if s <= last_end} == covered
