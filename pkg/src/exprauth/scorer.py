"""Content-agnostic authentication scoring.

The authentication score of a clip is the ratio of two diffusion
reconstruction errors evaluated on a shared set of (timestep, noise)
samples: the numerator uses the subject-personalized predictor, the
denominator the base predictor without identity conditioning. The
denominator adapts the scale to the clip's content, so the ratio
reflects identity mismatch rather than how hard the clip is to denoise.
Both predictors are guided blends of unconditional, audio-conditional,
and identity-conditional noise predictions.

Timesteps are drawn from a truncated grid (default 60 equally spaced
points in [201, 800]); extreme timesteps blur the difference between
the two errors and are excluded.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import (
    DegenerateModelError,
    InputError,
    InsufficientDataError,
    ScoringError,
)
from .schedule import TimestepGrid, sample_timesteps


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance strengths for the audio and identity conditions."""

    s_a: float = 0.5
    s_c: float = 0.25


@dataclass(frozen=True)
class ScoringConfig:
    """Timestep grid, noise draws per timestep, and RNG seed."""

    t_start: int = 201
    t_end: int = 800
    num_timesteps: int = 60
    grid_mode: str = "equally-spaced"
    noise_count: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.noise_count < 1:
            raise InputError("noise_count must be >= 1")
        if self.num_timesteps < 1:
            raise InputError("num_timesteps must be >= 1")

    def grid(self):
        return TimestepGrid(self.t_start, self.t_end, self.grid_mode)


@dataclass
class AuthScore:
    """Ratio score with its per-(t, draw) diagnostics."""

    value: float
    numerator_mean: float      # mean adapted error (d2)
    denominator_mean: float    # mean unadapted error (d1)
    timesteps: list
    d1_samples: np.ndarray     # (num_timesteps, noise_count)
    d2_samples: np.ndarray


@dataclass(frozen=True)
class DecisionRule:
    """Subject-specific Gaussian threshold mu + k * sigma."""

    mu: float
    sigma: float
    k: float = 2.0

    @property
    def threshold(self):
        return self.mu + self.k * self.sigma


def guided_denoise(z_t, t, audio, base, adapter=None, guidance=GuidanceConfig()):
    """Guided noise prediction.

    eps_sa = eps(uncond) + s_a * (eps(audio) - eps(uncond)); with an
    adapter the result adds s_c * (eps(audio, adapter) - eps(audio)).
    s_a = s_c = 1 recovers the fully conditional branch; 0, 0 the
    unconditional one.
    """
    eps_u = base(z_t, t, None, None)
    eps_a = base(z_t, t, audio, None)
    out = eps_u + guidance.s_a * (eps_a - eps_u)
    if adapter is not None:
        eps_full = base(z_t, t, audio, adapter)
        out = out + guidance.s_c * (eps_full - eps_a)
    return out


def _sample_errors(z, audio, base, adapter, cfg, guidance, schedule,
                   per_frame=False):
    """Squared noise-prediction errors on a shared (t, eps) sample set.

    Returns (timesteps, d1, d2[, d1_frames, d2_frames]): d1 uses the
    audio-guided base predictor, d2 additionally applies the adapter
    term. Both are evaluated on identical samples (common random
    numbers), which makes the ratio exact when the adapter is neutral
    and suppresses its variance otherwise.
    """
    z = np.asarray(z, dtype=np.float64)
    L, F = z.shape
    rng = np.random.default_rng([cfg.seed, 7])
    ts = sample_timesteps(cfg.grid(), cfg.num_timesteps, rng)
    n_t, n_eps = len(ts), cfg.noise_count
    eps = rng.standard_normal((n_t, n_eps, L, F))

    audio_t = torch.from_numpy(
        np.ascontiguousarray(np.asarray(audio, dtype=np.float32))
    ).unsqueeze(0).expand(n_eps, L, -1)

    d1 = np.empty((n_t, n_eps))
    d2 = np.empty((n_t, n_eps)) if adapter is not None else None
    d1_frames = np.empty((n_t, n_eps, L)) if per_frame else None
    d2_frames = np.empty((n_t, n_eps, L)) if per_frame and adapter is not None else None

    with torch.no_grad():
        for i, t in enumerate(ts):
            ab = schedule.alpha_bar(t)
            z_t = np.sqrt(ab) * z + np.sqrt(1.0 - ab) * eps[i]
            z_t_t = torch.from_numpy(z_t.astype(np.float32))
            t_t = torch.full((n_eps,), int(t), dtype=torch.long)

            eps_u = base(z_t_t, t_t, None, None)
            eps_a = base(z_t_t, t_t, audio_t, None)
            den_pred = (eps_u + guidance.s_a * (eps_a - eps_u)).numpy().astype(np.float64)
            err1 = (eps[i] - den_pred) ** 2
            frames1 = err1.sum(axis=2)          # (n_eps, L)
            d1[i] = frames1.sum(axis=1)
            if per_frame:
                d1_frames[i] = frames1

            if adapter is not None:
                eps_full = base(z_t_t, t_t, audio_t, adapter)
                num_pred = den_pred + guidance.s_c * (
                    eps_full.numpy().astype(np.float64)
                    - eps_a.numpy().astype(np.float64)
                )
                err2 = (eps[i] - num_pred) ** 2
                frames2 = err2.sum(axis=2)
                d2[i] = frames2.sum(axis=1)
                if per_frame:
                    d2_frames[i] = frames2

    for arr in (d1, d2):
        if arr is not None and not np.isfinite(arr).all():
            raise ScoringError("non-finite reconstruction errors")
    if per_frame:
        return ts, d1, d2, d1_frames, d2_frames
    return ts, d1, d2


def reconstruction_distance(z, audio, base, adapter, cfg, guidance, schedule):
    """Mean squared noise-prediction error over the scoring sample set.

    With an adapter this is the personalized (numerator) distance;
    without, the base (denominator) distance.
    """
    _, d1, d2 = _sample_errors(z, audio, base, adapter, cfg, guidance, schedule)
    return float(d2.mean()) if adapter is not None else float(d1.mean())


def authenticate(z, audio, base, adapter, cfg, guidance, schedule):
    """Ratio of adapted to unadapted mean reconstruction error.

    Lower values indicate the clip's talking identity matches the
    personalized subject. Requires a subject adapter.
    """
    if adapter is None:
        raise InputError("authenticate requires a personalized adapter")
    ts, d1, d2 = _sample_errors(z, audio, base, adapter, cfg, guidance, schedule)
    den = float(d1.mean())
    num = float(d2.mean())
    if den <= 0.0:
        raise DegenerateModelError("denominator reconstruction error is zero")
    value = num / den
    if not np.isfinite(value):
        raise ScoringError("non-finite authentication score")
    return AuthScore(
        value=value,
        numerator_mean=num,
        denominator_mean=den,
        timesteps=list(ts),
        d1_samples=d1,
        d2_samples=d2,
    )


def moving_average(series, window):
    """Centered moving average with edge truncation."""
    if window < 1:
        raise InputError("window must be >= 1")
    series = np.asarray(series, dtype=np.float64)
    h = (window - 1) // 2
    out = np.empty_like(series)
    n = len(series)
    for i in range(n):
        lo = max(0, i - h)
        hi = min(n, i + (window - h))
        out[i] = series[lo:hi].mean()
    return out


def temporal_scores(z, audio, base, adapter, cfg, guidance, schedule, window=15):
    """Per-frame ratio series (smoothed) and its mean.

    Per frame: squared errors summed over the 53 channels, averaged over
    the shared sample set, ratio of adapted to unadapted, then a
    centered moving average of the given window.
    """
    if adapter is None:
        raise InputError("temporal scoring requires a personalized adapter")
    _, _, _, d1_frames, d2_frames = _sample_errors(
        z, audio, base, adapter, cfg, guidance, schedule, per_frame=True
    )
    num_f = d2_frames.mean(axis=(0, 1))
    den_f = d1_frames.mean(axis=(0, 1))
    if np.any(den_f <= 0.0):
        raise DegenerateModelError("per-frame denominator error is zero")
    series = moving_average(num_f / den_f, window)
    return series, float(series.mean())


def fit_decision_rule(validation_scores, k=2.0):
    """Gaussian threshold from real validation scores: mu + k * sigma."""
    values = [s.value if isinstance(s, AuthScore) else float(s)
              for s in validation_scores]
    if len(values) < 2:
        raise InsufficientDataError(
            f"need >= 2 validation scores, got {len(values)}"
        )
    mu = float(np.mean(values))
    sigma = float(np.std(values, ddof=1))
    return DecisionRule(mu=mu, sigma=sigma, k=float(k))


def decide(score, rule):
    """'fake' iff the score exceeds the threshold; ties resolve to 'real'."""
    value = score.value if isinstance(score, AuthScore) else float(score)
    return "fake" if value > rule.threshold else "real"
