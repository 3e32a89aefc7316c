import math

import numpy as np
import pytest

from posturekit.core import (
    DailyFile,
    DataError,
    Event,
    EventLog,
    PostureLabel,
    Segment,
    TriaxialSeries,
    grid_to_runs,
    labels_to_grid,
    vector_magnitude,
)

import oracles

SIT, STAND, STEP = PostureLabel.SIT, PostureLabel.STAND, PostureLabel.STEP


def make_series(x, y, z, rate=30.0, start=0.0):
    return TriaxialSeries(x, y, z, sample_rate_hz=rate, start_time=start)


class TestVectorMagnitude:
    def test_pythagorean_triple(self):
        s = make_series([3.0], [4.0], [0.0])
        assert vector_magnitude(s)[0] == pytest.approx(5.0)

    def test_zero_vector(self):
        s = make_series([0.0], [0.0], [0.0])
        assert vector_magnitude(s)[0] == 0.0

    def test_unit_diagonal(self):
        s = make_series([1.0], [1.0], [1.0])
        assert vector_magnitude(s)[0] == pytest.approx(math.sqrt(3.0), abs=1e-7)

    def test_axis_permutation_and_sign_invariance(self):
        rng = np.random.default_rng(0)
        x, y, z = rng.normal(size=(3, 50))
        base = vector_magnitude(make_series(x, y, z))
        for perm in ((y, z, x), (z, x, y), (y, x, z)):
            assert np.allclose(vector_magnitude(make_series(*perm)), base)
        assert np.allclose(vector_magnitude(make_series(-x, y, -z)), base)


class TestLabelsToGrid:
    def test_single_event(self):
        log = EventLog((Event(0.0, 0.3, SIT),))
        assert labels_to_grid(log, 0.1).tolist() == [0, 0, 0]

    def test_abutting_events(self):
        log = EventLog((Event(0.0, 0.2, SIT), Event(0.2, 0.1, STAND)))
        assert labels_to_grid(log, 0.1).tolist() == [0, 0, 1]

    def test_midpoint_rule_off_grid_boundary(self):
        # Boundary at 0.25 s: cell [0.2, 0.3) has midpoint 0.25, which the
        # second event covers (half-open events).
        log = EventLog((Event(0.0, 0.3, SIT), Event(0.3, 0.2, STEP)))
        # independent check via the brute-force midpoint scanner
        want = oracles.rasterize_midpoints([(0.0, 0.3, 0), (0.3, 0.2, 2)], 0.1)
        got = labels_to_grid(log, 0.1).tolist()
        assert got == want == [0, 0, 0, 2, 2]

    def test_matches_bruteforce_on_random_logs(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            t, events = 0.0, []
            for _ in range(rng.integers(1, 8)):
                dur = round(float(rng.integers(1, 30)) * 0.1, 6)
                events.append((t, dur, int(rng.integers(0, 3))))
                t = round(t + dur, 6)
            log = EventLog(tuple(Event(s, d, PostureLabel(l)) for s, d, l in events))
            for res in (0.1, 0.05, 1.0 / 30.0):
                if round(t / res) < 1:
                    continue
                got = labels_to_grid(log, res).tolist()
                assert got == oracles.rasterize_midpoints(events, res)

    def test_empty_log_rejected(self):
        with pytest.raises(DataError, match="empty event log"):
            labels_to_grid(EventLog(()), 0.1)

    def test_incompatible_resolution_rejected(self):
        log = EventLog((Event(0.0, 1.0, SIT),))
        with pytest.raises(DataError, match="resolution"):
            labels_to_grid(log, 0.07)

    def test_rasterize_then_reconstruct_recovers_boundaries(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            t, events = 0.0, []
            label = int(rng.integers(0, 3))
            for _ in range(rng.integers(2, 6)):
                dur = round(float(rng.integers(3, 40)) * 0.1, 6)
                events.append(Event(t, dur, PostureLabel(label)))
                t = round(t + dur, 6)
                label = (label + 1 + int(rng.integers(0, 2))) % 3
            log = EventLog(tuple(events))
            res = 0.1
            runs = grid_to_runs(labels_to_grid(log, res))
            assert len(runs) == len(events)
            for (a, b, v), ev in zip(runs, events):
                assert v == int(ev.label)
                assert abs(a * res - (ev.start_time - log.start_time)) <= res


class TestTypes:
    def test_series_validation(self):
        with pytest.raises(DataError):
            make_series([1.0], [1.0, 2.0], [1.0])
        with pytest.raises(DataError):
            make_series([], [], [])
        with pytest.raises(DataError):
            make_series([np.nan], [0.0], [0.0])
        with pytest.raises(DataError):
            TriaxialSeries([1.0], [1.0], [1.0], sample_rate_hz=0.0)

    def test_series_immutable(self):
        s = make_series([1.0, 2.0], [0.0, 0.0], [0.0, 0.0])
        with pytest.raises(ValueError):
            s.x[0] = 9.0

    def test_segment_validation(self):
        with pytest.raises(DataError):
            Segment(5, 5)
        with pytest.raises(DataError):
            Segment(-1, 3)
        assert Segment(0, 3).n_samples == 3

    def test_event_log_validation(self):
        with pytest.raises(DataError, match="abut"):
            EventLog((Event(0.0, 0.5, SIT), Event(0.6, 0.5, STAND)))
        with pytest.raises(DataError, match="granularity"):
            EventLog((Event(0.0, 0.05, SIT),))
        with pytest.raises(DataError, match="multiple"):
            EventLog((Event(0.0, 0.25, SIT),))

    def test_event_log_crop_snaps_to_grid(self):
        log = EventLog((Event(10.0, 2.0, SIT), Event(12.0, 1.0, STEP)))
        cropped = log.crop(10.97, 12.54)
        assert cropped.events[0].start_time == pytest.approx(11.0)
        assert cropped.events[-1].end_time == pytest.approx(12.5)
        assert cropped.total_duration_s == pytest.approx(1.5)

    def test_daily_file_truth_coverage(self):
        s = make_series(np.ones(30), np.ones(30), np.ones(30), rate=30.0, start=0.0)
        good = EventLog((Event(0.0, 1.0, SIT),))
        DailyFile("p", 1, s, good)
        bad = EventLog((Event(0.0, 0.5, SIT),))
        with pytest.raises(DataError, match="cover"):
            DailyFile("p", 1, s, bad)
        with pytest.raises(DataError, match="epoch_index"):
            DailyFile("p", 0, s, good)
