import numpy as np
import pytest

from dmpkit import rnn
from dmpkit import transients as tr
from dmpkit.errors import InputFileError
from dmpkit.trajectory import Trajectory


def ramp_signal(n=200, n_ch=2):
    return np.arange(n * n_ch, dtype=float).reshape(n, n_ch)


class TestWindows:
    def test_positive_window_span(self):
        s = ramp_signal()
        w = tr.positive_window(s, 50, 5, 3)
        assert w.shape == (9, 2)
        np.testing.assert_array_equal(w, s[45:54])

    def test_positive_window_out_of_range(self):
        s = ramp_signal(20)
        assert tr.positive_window(s, 2, 5, 3) is None
        assert tr.positive_window(s, 18, 1, 3) is None

    def test_negatives_tile_backwards(self):
        s = ramp_signal()
        wins = tr.negative_windows(s, 100, 2, 1, 4)
        assert len(wins) == 4
        starts = [int(w[0, 0] // 2) for w in wins]
        assert starts == [94, 90, 86, 82]
        # non-overlapping and before the positive window
        rows = np.concatenate([w[:, 0] for w in wins])
        assert len(np.unique(rows)) == len(rows)
        assert rows.max() < s[98, 0]

    def test_negatives_run_out(self):
        wins = tr.negative_windows(ramp_signal(), 10, 1, 1, 50)
        assert len(wins) == 3

    def test_dataset_ratio(self):
        recs = tr.synth_transients(tr.SynthConfig(n_recordings=4, seed=3))
        data = tr.build_dataset(recs, 2, 1, r=20)
        assert data.n_positive == 4
        assert data.n_negative == 80
        assert data.r == 20
        assert data.X.shape[1:] == (4, 7)

    def test_split_by_recording(self):
        recs = list(range(7))
        train, test = tr.split_half(recs)
        assert train == [0, 2, 4, 6] and test == [1, 3, 5]


class TestSynth:
    def test_deterministic(self):
        a = tr.synth_transients(tr.SynthConfig(n_recordings=3, seed=5))
        b = tr.synth_transients(tr.SynthConfig(n_recordings=3, seed=5))
        for x, y in zip(a, b):
            assert x.torque.samples.tobytes() == y.torque.samples.tobytes()
            assert x.peaks == y.peaks

    def test_layout(self):
        recs = tr.synth_transients(tr.SynthConfig(n_recordings=5, seed=0))
        for rec in recs:
            n = rec.torque.n_samples
            assert n == 1501 and rec.torque.n_channels == 7
            assert rec.torque.dt == 0.004
            (p,) = rec.peaks
            assert 0.75 * n <= p < n - 12 - tr.MAX_WINDOW

    def test_transient_at_peak(self):
        base = tr.SynthConfig(n_recordings=2, seed=2)
        plain = tr.synth_transients(tr.SynthConfig(**{**base.__dict__, "transient_amp": 0.0}))
        spiked = tr.synth_transients(base)
        for a, b in zip(plain, spiked):
            diff = b.torque.samples - a.torque.samples
            p = b.peaks[0]
            assert np.all(diff[:p] == 0) and np.all(diff[p + 12 :] == 0)
            assert np.argmax(np.abs(diff).sum(axis=1)) == p

    def test_shape(self):
        s = tr.transient_shape(12)
        assert s[0] == 1.0
        assert np.all(np.abs(s[1:]) < 1.0)

    def test_no_signal_no_skill(self):
        recs = tr.synth_transients(tr.SynthConfig(n_recordings=20, seed=4, transient_amp=0.0))
        train, test = tr.split_half(recs)
        _, m, _ = tr.train_and_score(train, test, 1, 1, 5, rnn.TrainConfig(steps=300))
        assert m.f1 < 0.6

    def test_file_round_trip(self, tmp_path):
        recs = tr.synth_transients(tr.SynthConfig(n_recordings=2, seed=1))
        tr.write_recordings(recs, tmp_path)
        back = tr.read_recordings(tmp_path)
        for a, b in zip(recs, back):
            np.testing.assert_array_equal(a.torque.samples, b.torque.samples)
            assert a.peaks == b.peaks

    def test_empty_dir(self, tmp_path):
        with pytest.raises(InputFileError):
            tr.read_recordings(tmp_path)


class TestSweep:
    def test_terminates_perfect(self, sweep_result):
        res = sweep_result
        assert res.perfect
        assert res.rows[-1].final
        assert res.rows[-1].metrics.f1 == 1.0
        assert res.rows[-1].r == 100
        assert res.n_post <= 3

    def test_search_order(self, sweep_result):
        rows = [r for r in sweep_result.rows if not r.final]
        grow = [r for r in rows if r.n_pre == r.n_post]
        assert [r.n_pre for r in grow] == list(range(1, len(grow) + 1))
        assert grow[-1].metrics.f1 == 1.0
        assert all(r.metrics.f1 < 1.0 for r in grow[:-1])
        # the shrink phase stops at the first imperfect n_post
        shrink = rows[len(grow):]
        assert all(r.metrics.f1 == 1.0 for r in shrink[:-1])

    def test_sweep_deterministic(self):
        recs = tr.synth_transients(tr.SynthConfig(n_recordings=6, seed=7))
        cfg = rnn.TrainConfig(steps=50)
        a = tr.sweep_window(recs, r=5, final_r=10, max_window=2, config=cfg)
        b = tr.sweep_window(recs, r=5, final_r=10, max_window=2, config=cfg)
        assert a.model.to_json() == b.model.to_json()
        assert [r.as_dict() for r in a.rows] == [r.as_dict() for r in b.rows]


class TestDetection:
    def test_one_detection_per_transient(self, sweep_result, fresh_recordings):
        model = sweep_result.model
        for rec in fresh_recordings:
            (p,) = rec.peaks
            hits = tr.detect_indices(model, rec.torque)
            assert len(hits) == 1
            assert p <= hits[0] <= p + model.n_post + round(tr.REFRACTORY / rec.torque.dt)

    def test_noise_only_stream(self, sweep_result, noise_stream):
        assert noise_stream.n_samples >= 10_000
        assert tr.detect_stream(sweep_result.model, noise_stream) == []

    def test_short_stream(self, sweep_result):
        T = sweep_result.model.T
        stream = Trajectory(np.zeros((T - 1, 7)), 0.004)
        assert tr.detect_stream(sweep_result.model, stream) == []

    def test_causality(self, sweep_result, fresh_recordings):
        model = sweep_result.model
        rec = fresh_recordings[0]
        hits = tr.detect_indices(model, rec.torque)
        cut = hits[0]
        scrambled = rec.torque.samples.copy()
        scrambled[cut + 1 :] = np.random.default_rng(0).normal(scale=50.0, size=scrambled[cut + 1 :].shape)
        again = tr.detect_indices(model, Trajectory(scrambled, rec.torque.dt))
        assert again[0] == cut
        p1 = tr.window_probabilities(model, rec.torque.samples)
        p2 = tr.window_probabilities(model, scrambled)
        np.testing.assert_array_equal(p1[: cut + 1], p2[: cut + 1])

    def test_refractory(self):
        model = rnn.RnnModel(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((2, 1)), np.zeros(1),
                             np.array([1.0, 0.0]), 0, 0)
        # constant positive output: one report per refractory period
        stream = Trajectory(np.zeros((501, 1)), 0.004)
        assert tr.detect_indices(model, stream) == [0, 126, 252, 378]
