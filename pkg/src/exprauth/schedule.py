"""Diffusion noise schedule, forward process, and timestep selection.

Timesteps are 1-indexed: t ranges over {1..T}. The cumulative product
alpha_bar_t is prod_{s<=t} (1 - beta_s), so alpha_bar_1 = 1 - beta_1.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, GridError


@dataclass(frozen=True)
class NoiseSchedule:
    """Immutable per-step noise scales and their running products."""

    T: int
    betas: np.ndarray        # shape (T,), betas[i] is beta_{i+1}
    alpha_bars: np.ndarray   # shape (T,), alpha_bars[i] is alpha_bar_{i+1}

    def alpha_bar(self, t):
        """alpha_bar at 1-indexed timestep t (scalar or integer array)."""
        t = np.asarray(t)
        if np.any((t < 1) | (t > self.T)):
            raise DomainError(f"timestep out of range [1, {self.T}]")
        return self.alpha_bars[t - 1]


def make_linear_schedule(T=1000, beta_start=1e-4, beta_end=0.02):
    """Linear beta schedule from beta_start to beta_end over T steps.

    Defaults are the canonical DDPM endpoints; both are configurable.
    """
    if T < 1:
        raise ConfigurationError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigurationError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bars = np.cumprod(1.0 - betas)
    sched = NoiseSchedule(T=int(T), betas=betas, alpha_bars=alpha_bars)
    betas.setflags(write=False)
    alpha_bars.setflags(write=False)
    return sched


def forward_diffuse(z, t, eps, schedule):
    """Corrupt z at timestep t: sqrt(ab_t) * z + sqrt(1 - ab_t) * eps.

    z and eps must have identical shapes. Works elementwise, so z may be
    a single (L, 53) sequence or any batch thereof.
    """
    z = np.asarray(z, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if z.shape != eps.shape:
        raise DomainError(f"eps shape {eps.shape} must equal z shape {z.shape}")
    ab = schedule.alpha_bar(t)
    return np.sqrt(ab) * z + np.sqrt(1.0 - ab) * eps


@dataclass(frozen=True)
class TimestepGrid:
    """Inclusive timestep range with a sampling mode.

    Modes: "uniform-random" draws i.i.d. integers from [t_start, t_end];
    "equally-spaced" produces a deterministic grid including both endpoints.
    """

    t_start: int
    t_end: int
    mode: str = "equally-spaced"
    points: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.t_start < 1 or self.t_end < self.t_start:
            raise GridError(f"invalid grid bounds [{self.t_start}, {self.t_end}]")
        if self.mode not in ("uniform-random", "equally-spaced"):
            raise GridError(f"unknown grid mode {self.mode!r}")


def equally_spaced_points(t_start, t_end, n):
    """n strictly increasing integers from t_start to t_end inclusive.

    Points are rounded from the ideal real-valued grid; a rounding
    collision (duplicate integer) raises GridError.
    """
    if n < 1:
        raise GridError(f"n must be >= 1, got {n}")
    if n == 1:
        if t_start != t_end:
            raise GridError("n=1 grid requires t_start == t_end")
        return [int(t_start)]
    ideal = t_start + np.arange(n) * (t_end - t_start) / (n - 1)
    pts = [int(round(x)) for x in ideal]
    if len(set(pts)) != n:
        raise GridError(
            f"{n} equally spaced points collide after rounding in [{t_start}, {t_end}]"
        )
    return pts


def sample_timesteps(grid, n, rng=None):
    """Draw n timesteps from the grid.

    uniform-random mode requires an np.random.Generator; equally-spaced
    mode is deterministic and ignores rng.
    """
    if n < 1:
        raise GridError(f"n must be >= 1, got {n}")
    if grid.mode == "equally-spaced":
        return equally_spaced_points(grid.t_start, grid.t_end, n)
    if rng is None:
        raise GridError("uniform-random sampling requires an rng")
    return [int(t) for t in rng.integers(grid.t_start, grid.t_end + 1, size=n)]
