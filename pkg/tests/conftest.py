import numpy as np
import pytest

from dmpkit import sim
from dmpkit.trajectory import Trajectory

DT = 0.004


def min_jerk(y0, g, duration, dt=DT):
    return sim.min_jerk(y0, g, duration, dt)


@pytest.fixture
def demo_1d():
    return min_jerk([0.0], [0.5], 2.0)


@pytest.fixture
def demo_2d():
    t = np.arange(0, 2.0 + DT / 2, DT)
    s = t / 2.0
    shape = 10 * s**3 - 15 * s**4 + 6 * s**5
    y = np.column_stack([0.3 * shape, 0.1 + 0.2 * shape + 0.05 * np.sin(np.pi * shape)])
    return Trajectory(y, DT)


SWEEP_SEED = 1


@pytest.fixture(scope="session")
def sweep_result():
    """Window search on the default synthetic set; shared because it trains a dozen models."""
    import time

    from dmpkit import transients as tr

    t0 = time.perf_counter()
    recs = tr.synth_transients(tr.SynthConfig(seed=SWEEP_SEED))
    res = tr.sweep_window(recs)
    res.elapsed = time.perf_counter() - t0
    return res


@pytest.fixture(scope="session")
def fresh_recordings():
    """New recordings from the same transient signature as the sweep data."""
    from dmpkit import transients as tr

    return tr.synth_transients(tr.SynthConfig(n_recordings=10, seed=SWEEP_SEED + 100, signature_seed=SWEEP_SEED))


@pytest.fixture(scope="session")
def noise_stream():
    from dmpkit import transients as tr

    cfg = tr.SynthConfig(n_recordings=1, duration=40.0, seed=SWEEP_SEED + 200, signature_seed=SWEEP_SEED, with_transient=False)
    return tr.synth_transients(cfg)[0].torque
