import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmpkit import correction as cr
from dmpkit import dmp as dm
from dmpkit.trajectory import Trajectory

from conftest import DT, min_jerk


def traj(a):
    return Trajectory(np.asarray(a, dtype=float), DT)


def pgd_oracle(y_dr, a, d, lam, tol=1e-10, max_iter=200000):
    """Projected gradient descent; the constraint set pins the last two samples."""
    y = y_dr.astype(float).copy()
    y[-1], y[-2] = a, a - d
    d2 = cr.second_difference(len(y))
    lip = 2 * (1 + 16 * lam)
    for _ in range(max_iter):
        g = 2 * (y - y_dr) + 2 * lam * d2.T @ (d2 @ y)
        g[-2:] = 0.0
        if np.max(np.abs(g)) < tol:
            break
        y = y - g / lip
    return y


def nullspace_oracle(y_dr, a, d, lam):
    """Dense equality-constrained least squares via a null-space basis of C."""
    m = len(y_dr)
    c = np.zeros((2, m))
    c[0, -1] = 1.0
    c[1, -1], c[1, -2] = 1.0, -1.0
    rhs = np.array([a, d])
    y_p = np.linalg.lstsq(c, rhs, rcond=None)[0]
    _, _, vt = np.linalg.svd(c)
    null = vt[2:].T
    d2 = cr.second_difference(m)
    A = np.vstack([np.eye(m), np.sqrt(lam) * d2]) @ null
    b = np.concatenate([y_dr - y_p, -np.sqrt(lam) * d2 @ y_p])
    z = np.linalg.lstsq(A, b, rcond=None)[0]
    return y_p + null @ z


class TestFindSplit:
    def test_line(self):
        y_d = traj(np.arange(11.0))
        assert cr.find_split(y_d, [6.2]) == 7  # prefix keeps samples 0..6

    def test_brute_force(self):
        rng = np.random.default_rng(3)
        y_d = traj(rng.normal(size=(40, 3)))
        p = rng.normal(size=3)
        dist = [np.linalg.norm(s - p) for s in y_d.samples]
        assert cr.find_split(y_d, p) == int(np.argmin(dist)) + 1

    def test_first_sample(self):
        y_d = traj([[0.5, 0.1], [0.7, 0.2], [0.9, 0.3]])
        assert cr.find_split(y_d, [0.5, 0.1]) == 1

    def test_tie_smallest_index(self):
        y_d = traj([0.0, 1.0, 2.0, 1.0, 0.0])
        assert cr.find_split(y_d, [1.5]) == 2


class TestSmoothPrefix:
    def test_affine_feasible_unchanged(self):
        y = np.linspace(0.0, 1.9, 20)
        y_dr = traj(y)
        y_cr = traj([1.9, 2.0, 2.1])
        out = cr.smooth_prefix(y_dr, y_cr, 1.0)
        np.testing.assert_allclose(out.samples[:, 0], y, atol=1e-12)

    def test_lambda_zero(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=15)
        out = cr.smooth_prefix(traj(y), traj([2.0, 2.5]), 0.0).samples[:, 0]
        np.testing.assert_allclose(out[:-2], y[:-2], atol=1e-12)
        assert out[-1] == 2.0 and out[-2] == 1.5
        np.testing.assert_allclose(out, nullspace_oracle(y, 2.0, 0.5, 0.0), atol=1e-12)

    @pytest.mark.parametrize("lam", [0.3, 1.0, 25.0])
    def test_nullspace_oracle(self, lam):
        rng = np.random.default_rng(1)
        y = np.cumsum(rng.normal(size=30))
        out = cr.smooth_prefix(traj(y), traj([1.0, 1.2]), lam).samples[:, 0]
        np.testing.assert_allclose(out, nullspace_oracle(y, 1.0, 0.2, lam), atol=1e-9)

    def test_projected_gradient_oracle(self):
        rng = np.random.default_rng(7)
        y = rng.normal(size=20)
        out = cr.smooth_prefix(traj(y), traj([0.4, 0.1]), 1.0).samples[:, 0]
        ref = pgd_oracle(y, 0.4, -0.3, 1.0)
        f_out = cr.smoothing_objective(y, out, 1.0)
        f_ref = cr.smoothing_objective(y, ref, 1.0)
        assert abs(f_out - f_ref) <= 1e-8
        assert f_out <= f_ref + 1e-12

    def test_channels_solved_independently(self):
        rng = np.random.default_rng(2)
        y = rng.normal(size=(12, 2))
        ycr = np.array([[0.0, 1.0], [0.1, 0.9]])
        both = cr.smooth_prefix(traj(y), traj(ycr), 2.0).samples
        for ch in range(2):
            one = cr.smooth_prefix(traj(y[:, ch]), traj(ycr[:, ch]), 2.0).samples[:, 0]
            np.testing.assert_allclose(both[:, ch], one, atol=1e-13)

    def test_too_short(self):
        with pytest.raises(ValueError):
            cr.smooth_prefix(traj([0.0, 1.0]), traj([1.0, 2.0]), 1.0)

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            cr.smooth_prefix(traj([0.0, 1.0, 2.0]), traj([1.0, 2.0]), -1.0)

    def test_nonfinite_input(self):
        with pytest.raises(ValueError):
            cr.smooth_prefix(traj([0.0, np.nan, 2.0, 3.0]), traj([1.0, 2.0]), 1.0)


def overshoot_pair():
    """Deficient reach that overshoots the goal, and a correction hooking back in."""
    t = np.arange(0, 2.0 + DT / 2, DT)
    s = t / 2.0
    shape = 10 * s**3 - 15 * s**4 + 6 * s**5
    y_d = np.column_stack([1.2 * shape, 0.4 * shape + 0.15 * np.sin(np.pi * shape)])
    # the operator grabs the arm at 60% of the path, a little off the deficient path
    k0 = int(0.6 * len(t))
    start = y_d[k0] + np.array([0.01, -0.008])
    goal = np.array([1.0, 0.4])
    u = np.linspace(0, 1, 180)
    blend = 10 * u**3 - 15 * u**4 + 6 * u**5
    hook = start + np.outer(blend, goal - start) + np.outer(np.sin(np.pi * u), [0.0, -0.03])
    return traj(y_d), traj(hook)


def max_jump(y):
    return np.max(np.linalg.norm(np.diff(y, axis=0), axis=1))


class TestMerge:
    def test_continuity_on_overshoot(self):
        y_d, y_cr = overshoot_pair()
        res = cr.merge(cr.CorrectionInput(y_d, y_cr))
        bound = 1.5 * max(max_jump(y_d.samples), max_jump(y_cr.samples))
        assert max_jump(res.merged.samples) <= bound
        # naive splicing without smoothing would exceed it
        naive = np.vstack([y_d.samples[: res.split_index], y_cr.samples])
        assert max_jump(naive) > bound

    def test_junction_exact(self):
        y_d, y_cr = overshoot_pair()
        res = cr.merge(cr.CorrectionInput(y_d, y_cr))
        ym = res.modified_prefix.samples
        a, b = y_cr.samples[0], y_cr.samples[1]
        assert np.array_equal(ym[-1], a)
        assert np.linalg.norm((ym[-1] - ym[-2]) - (b - a)) <= 1e-10 * max(1.0, np.linalg.norm(b - a))

    def test_retention(self):
        y_d, y_cr = overshoot_pair()
        res = cr.merge(cr.CorrectionInput(y_d, y_cr))
        tail = res.merged.samples[-(y_cr.n_samples - 1):]
        assert tail.tobytes() == y_cr.samples[1:].tobytes()
        assert res.merged.n_samples == res.split_index + y_cr.n_samples - 1

    def test_noop_correction(self):
        y_d = min_jerk([0.0, 0.0], [0.6, 0.3], 2.0)
        m0 = 300
        y_cr = Trajectory(y_d.samples[m0 - 1:], DT)
        res, new = cr.merge_and_refit(cr.CorrectionInput(y_d, y_cr), tau=2.0)
        assert res.split_index == m0
        # the curved prefix is only nudged by the curvature penalty
        np.testing.assert_allclose(res.merged.samples, y_d.samples, atol=1e-4 * np.ptp(y_d.samples))
        out = dm.rollout(new, y_d.duration, DT)
        rmse = np.sqrt(np.mean((out.samples - y_d.samples) ** 2))
        assert rmse < 0.02 * np.ptp(y_d.samples)

    def test_refit_reaches_new_goal(self):
        y_d, y_cr = overshoot_pair()
        res, new = cr.merge_and_refit(cr.CorrectionInput(y_d, y_cr))
        np.testing.assert_array_equal(new.goal, y_cr.samples[-1])
        out = dm.rollout(new, 3 * new.tau, DT)
        assert np.linalg.norm(out.samples[-1] - y_cr.samples[-1]) < 1e-2 * np.linalg.norm(new.goal - new.start)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            cr.CorrectionInput(traj(np.zeros((5, 2))), traj(np.zeros((3, 1))))
        with pytest.raises(ValueError):
            cr.CorrectionInput(traj(np.zeros(5)), Trajectory(np.zeros(3), 0.01))


prefixes = st.lists(st.floats(-2, 2), min_size=4, max_size=25).map(np.array)


@settings(max_examples=40, deadline=None)
@given(y=prefixes, a=st.floats(-2, 2), d=st.floats(-0.5, 0.5), lam=st.floats(0, 1e3))
def test_constraints_exact(y, a, d, lam):
    out = cr.smooth_prefix(traj(y), traj([a, a + d]), lam).samples[:, 0]
    assert out[-1] == a
    assert abs((out[-1] - out[-2]) - d) <= 1e-10 * max(1.0, abs(d), abs(a))


@settings(max_examples=30, deadline=None)
@given(y=prefixes, lams=st.lists(st.floats(0.01, 100), min_size=2, max_size=5))
def test_monotone_smoothing(y, lams):
    rough = []
    for lam in sorted(lams):
        out = cr.smooth_prefix(traj(y), traj([0.0, 0.1]), lam).samples[:, 0]
        rough.append(np.sum(np.diff(out, 2) ** 2))
    assert all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(rough, rough[1:]))


@settings(max_examples=20, deadline=None)
@given(y=prefixes)
def test_fidelity_vanishing_lambda(y):
    out = cr.smooth_prefix(traj(y), traj([0.0, 0.1]), 1e-9).samples[:, 0]
    assert np.max(np.abs(out[:-2] - y[:-2])) < 1e-6
