import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprauth.errors import ConfigurationError, DomainError, GridError
from exprauth.schedule import (
    TimestepGrid,
    forward_diffuse,
    make_linear_schedule,
    sample_timesteps,
)


def running_product_oracle(betas):
    # independent of np.cumprod: explicit loop
    out = []
    acc = 1.0
    for b in betas:
        acc *= 1.0 - b
        out.append(acc)
    return out


class TestMakeLinearSchedule:
    def test_single_step(self):
        s = make_linear_schedule(T=1, beta_start=0.1, beta_end=0.1)
        assert s.alpha_bars == pytest.approx([0.9])

    def test_four_steps_against_running_product(self):
        s = make_linear_schedule(T=4, beta_start=0.1, beta_end=0.4)
        assert np.allclose(s.betas, [0.1, 0.2, 0.3, 0.4])
        # frozen values from the running-product oracle
        assert np.allclose(s.alpha_bars, [0.9, 0.72, 0.504, 0.3024])
        assert np.allclose(s.alpha_bars, running_product_oracle(s.betas))

    def test_default_schedule_properties(self):
        s = make_linear_schedule()
        assert s.T == 1000
        assert np.all(np.diff(s.alpha_bars) < 0)
        assert np.all((s.alpha_bars > 0) & (s.alpha_bars < 1))
        assert 0 < s.alpha_bars[-1] < 1e-3
        assert s.alpha_bars[0] == pytest.approx(1 - s.betas[0])
        assert np.allclose(s.alpha_bars, running_product_oracle(s.betas))

    @pytest.mark.parametrize("kwargs", [
        dict(T=0),
        dict(beta_start=0.0),
        dict(beta_start=0.5, beta_end=0.4),
        dict(beta_end=1.0),
    ])
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ConfigurationError):
            make_linear_schedule(**{"T": 10, "beta_start": 1e-4,
                                    "beta_end": 0.02, **kwargs})


class TestForwardDiffuse:
    def setup_method(self):
        self.sched = make_linear_schedule(T=100, beta_start=1e-3, beta_end=0.05)

    def test_zero_noise(self):
        z = np.random.default_rng(0).normal(size=(5, 53))
        out = forward_diffuse(z, 10, np.zeros_like(z), self.sched)
        assert np.allclose(out, np.sqrt(self.sched.alpha_bars[9]) * z)

    def test_zero_signal(self):
        eps = np.random.default_rng(1).normal(size=(5, 53))
        out = forward_diffuse(np.zeros_like(eps), 42, eps, self.sched)
        assert np.allclose(out, np.sqrt(1 - self.sched.alpha_bars[41]) * eps)

    def test_t_out_of_range(self):
        z = np.zeros((2, 53))
        for t in (0, 101):
            with pytest.raises(DomainError):
                forward_diffuse(z, t, z, self.sched)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            forward_diffuse(np.zeros((2, 53)), 1, np.zeros((3, 53)), self.sched)

    def test_monte_carlo_moments(self):
        # per-element mean ~ sqrt(ab) z, variance ~ 1 - ab within 3 sigma
        rng = np.random.default_rng(7)
        z = rng.normal(size=4)
        n = 100_000
        for t in (1, 50, 100):
            eps = rng.standard_normal((n, 4))
            out = forward_diffuse(np.broadcast_to(z, (n, 4)), t, eps, self.sched)
            ab = self.sched.alpha_bars[t - 1]
            se_mean = np.sqrt((1 - ab) / n)
            assert np.all(np.abs(out.mean(axis=0) - np.sqrt(ab) * z) < 3 * se_mean)
            se_var = (1 - ab) * np.sqrt(2.0 / (n - 1))
            assert np.all(np.abs(out.var(axis=0, ddof=1) - (1 - ab)) < 3 * se_var)

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3),
           t=st.integers(min_value=1, max_value=100))
    @settings(max_examples=30, deadline=None)
    def test_affine_in_signal_and_noise(self, a, b, t):
        rng = np.random.default_rng(3)
        z1, z2, eps = rng.normal(size=(3, 6, 53))
        lhs = forward_diffuse(a * z1 + b * z2, t, eps, self.sched)
        zero = np.zeros_like(eps)
        rhs = (a * forward_diffuse(z1, t, zero, self.sched)
               + b * forward_diffuse(z2, t, zero, self.sched)
               + np.sqrt(1 - self.sched.alpha_bars[t - 1]) * eps)
        assert np.allclose(lhs, rhs)


class TestSampleTimesteps:
    def test_degenerate_range(self):
        assert sample_timesteps(TimestepGrid(5, 5), 1) == [5]

    def test_paper_grid(self):
        pts = sample_timesteps(TimestepGrid(201, 800), 60)
        assert len(pts) == 60
        assert pts[0] == 201 and pts[-1] == 800
        assert all(b > a for a, b in zip(pts, pts[1:]))

    def test_equally_spaced_deterministic(self):
        g = TimestepGrid(10, 500)
        assert sample_timesteps(g, 17) == sample_timesteps(g, 17)

    def test_collision_raises(self):
        with pytest.raises(GridError):
            sample_timesteps(TimestepGrid(1, 5), 10)

    def test_uniform_histogram_chi2(self):
        from scipy.stats import chisquare
        rng = np.random.default_rng(11)
        g = TimestepGrid(1, 1000, mode="uniform-random")
        draws = sample_timesteps(g, 100_000, rng)
        counts = np.bincount(np.array(draws), minlength=1001)[1:]
        _, p = chisquare(counts)
        assert p > 0.01
        assert min(draws) >= 1 and max(draws) <= 1000

    def test_invalid_bounds(self):
        with pytest.raises(GridError):
            TimestepGrid(10, 5)
        with pytest.raises(GridError):
            TimestepGrid(0, 5)
