import json

import numpy as np
import pytest

from dmpkit import config, plotting, sim, control as ctl, transients as tr
from dmpkit.errors import ConfigError, InputFileError
from dmpkit.trajectory import Trajectory, read_csv, write_csv


class TestCsv:
    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        traj = Trajectory(rng.normal(size=(30, 3)), 0.004)
        write_csv(traj, tmp_path / "a.csv")
        back, names = read_csv(tmp_path / "a.csv")
        assert names == ["ch0", "ch1", "ch2"]
        assert back.samples.tobytes() == traj.samples.tobytes()
        assert back.dt == pytest.approx(0.004, rel=1e-12)

    @pytest.mark.parametrize("text", [
        "t,ch0\n0,1\n",
        "x,ch0\n0,1\n1,2\n",
        "t,ch0\n0,1\n0.1,2,3\n",
        "t,ch0\n0,1\n0.1,nan\n",
        "t,ch0\n0,1\n0.1,2\n0.3,3\n",
        "t,ch0\n0,1\n0,2\n",
    ])
    def test_rejects(self, tmp_path, text):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(InputFileError):
            read_csv(p)

    def test_missing(self, tmp_path):
        with pytest.raises(InputFileError):
            read_csv(tmp_path / "none.csv")

    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            Trajectory(np.zeros((0, 1)), 0.01)
        with pytest.raises(ValueError):
            Trajectory(np.zeros(3), 0.0)
        t = Trajectory(np.zeros(3), 0.5)
        assert t.n_channels == 1 and t.duration == 1.0
        with pytest.raises(ValueError):
            t.samples[0, 0] = 1.0


class TestConfig:
    def test_defaults(self):
        cfg = config.load_config()
        assert cfg["controller"]["k_p"] == 25.0
        assert cfg["dmp"]["n_basis"] == 30
        assert cfg["detector"]["final_r"] == 100.0

    def test_toml_and_json_agree(self, tmp_path):
        (tmp_path / "c.toml").write_text("[controller]\nk_c = 500\n[sim]\nseed = 4\n")
        (tmp_path / "c.json").write_text(json.dumps({"controller": {"k_c": 500}, "sim": {"seed": 4}}))
        a = config.load_config(tmp_path / "c.toml")
        b = config.load_config(tmp_path / "c.json")
        assert a == b
        assert a["controller"]["k_c"] == 500.0 and a["sim"]["seed"] == 4

    @pytest.mark.parametrize("over", [
        {"nope": {}},
        {"sim": {"nope": 1}},
        {"sim": {"seed": 1.5}},
        {"controller": {"k_p": "high"}},
        {"controller": {"feedforward_enabled": 1}},
        {"sim": 3},
    ])
    def test_rejects(self, over):
        with pytest.raises(ConfigError):
            config.merge_config(over)

    def test_unparseable(self, tmp_path):
        (tmp_path / "c.toml").write_text("[[[")
        with pytest.raises(ConfigError):
            config.load_config(tmp_path / "c.toml")

    def test_seed_resolution(self, monkeypatch):
        monkeypatch.delenv(config.SEED_ENV, raising=False)
        assert config.resolve_seed(None, 7) == 7
        monkeypatch.setenv(config.SEED_ENV, "3")
        assert config.resolve_seed(None, 7) == 3
        assert config.resolve_seed(9, 7) == 9
        monkeypatch.setenv(config.SEED_ENV, "x")
        with pytest.raises(ConfigError):
            config.resolve_seed(None, 7)


def test_figures_written(tmp_path):
    d = sim.default_dmp()
    res = sim.run_scenario(d, ctl.Gains.proposed(), sim.NoiseConfig(seed=0), sim.Perturbation(sim.Kind.STOP), duration=4.0)
    plotting.plot_scenario(res, tmp_path / "s.png", "stop")
    y = sim.min_jerk([0.0], [1.0], 1.0, 0.004)
    plotting.plot_merge(y, Trajectory(y.samples[100:], 0.004), y, tmp_path / "m.png")
    plotting.plot_trajectory(y, tmp_path / "t.png", reference=y)
    rows = [tr.SweepRow(1, 1, 20.0, tr.rnn.DetectorMetrics(20, 500, 0, 5))]
    plotting.plot_sweep(rows, tmp_path / "w.png")
    stream = Trajectory(np.zeros((50, 7)), 0.004)
    plotting.plot_detection(stream, np.linspace(0, 1, 50), [0.1], tmp_path / "d.png")
    for name in "smtwd":
        assert (tmp_path / f"{name}.png").stat().st_size > 1000
