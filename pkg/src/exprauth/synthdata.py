"""Synthetic persona corpus and curation-stage operations.

A persona is a deterministic, seed-derived audio-to-expression mapping:
a linear response matrix, a style bias, temporal smoothing, and a set of
idiosyncratic oscillations. Genuine clips apply a persona's own mapping
to a smooth random audio process; forged clips reuse the target's audio
content but render expressions with a different actor's mapping. This
gives the diffusion model a learnable audio-expression correlation and a
measurable notion of talking identity, with forgery difficulty tunable
through inter-persona distance.

The module also carries the curation skeleton used on real footage:
shape singularization, iterative coefficient refinement against a
pluggable objective, and the duration/quality keep-or-drop predicate.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InputError, NumericError
from .model import EXPRESSION_DIM

_PERSONA_STREAM = 101
_AUDIO_STREAM = 202
_NOISE_STREAM = 303


@dataclass(frozen=True)
class PersonaSpec:
    """Seed-derived identity parameters of an audio-to-expression map."""

    persona_id: str
    seed: int
    response: np.ndarray      # (D, 53) linear audio response
    bias: np.ndarray          # (53,) style offset
    smoothing: float          # AR(1) coefficient in [0, 1)
    osc_amp: np.ndarray       # (53,) oscillation amplitudes
    osc_freq: np.ndarray      # (53,) oscillation frequencies [Hz]
    osc_phase: np.ndarray     # (53,) oscillation phases
    noise_level: float


@dataclass
class Clip:
    """One synthetic clip: frame-synchronous audio features and expressions."""

    audio: np.ndarray         # (L, D)
    expressions: np.ndarray   # (L, 53)
    clip_id: str = ""
    persona_id: str = ""      # subject the clip claims to show
    actor_id: str = ""        # persona whose mapping produced the expressions
    is_fake: bool = False


def generate_persona(seed, audio_dim=16, noise_level=0.05, persona_id=None):
    """Deterministic persona from a seed; distinct seeds are far apart."""
    rng = np.random.default_rng([int(seed), _PERSONA_STREAM])
    response = rng.normal(size=(audio_dim, EXPRESSION_DIM)) / np.sqrt(audio_dim)
    bias = 0.3 * rng.normal(size=EXPRESSION_DIM)
    smoothing = float(rng.uniform(0.2, 0.7))
    active = rng.random(EXPRESSION_DIM) < 0.3
    osc_amp = 0.25 * rng.uniform(0.5, 1.0, EXPRESSION_DIM) * active
    osc_freq = rng.uniform(0.5, 3.0, EXPRESSION_DIM)
    osc_phase = rng.uniform(0.0, 2.0 * np.pi, EXPRESSION_DIM)
    return PersonaSpec(
        persona_id=persona_id or f"persona{seed:04d}",
        seed=int(seed),
        response=response,
        bias=bias,
        smoothing=smoothing,
        osc_amp=osc_amp,
        osc_freq=osc_freq,
        osc_phase=osc_phase,
        noise_level=float(noise_level),
    )


def _audio_process(audio_seed, L, audio_dim):
    """Smooth random audio-feature process; depends on content seed only."""
    rng = np.random.default_rng([int(audio_seed), _AUDIO_STREAM])
    w = 5
    raw = rng.normal(size=(L + w - 1, audio_dim))
    kernel = np.ones(w) / w
    smooth = np.stack(
        [np.convolve(raw[:, d], kernel, mode="valid") for d in range(audio_dim)],
        axis=1,
    )
    return smooth * np.sqrt(w)  # restore roughly unit variance


def _render_expressions(persona, audio, audio_seed, frame_rate):
    L = audio.shape[0]
    drive = audio @ persona.response + persona.bias
    # AR(1) temporal smoothing with the persona's coefficient
    rho = persona.smoothing
    y = np.empty_like(drive)
    y[0] = drive[0]
    for l in range(1, L):
        y[l] = rho * y[l - 1] + (1.0 - rho) * drive[l]
    frames = np.arange(L)[:, None] / frame_rate
    osc = persona.osc_amp * np.sin(
        2.0 * np.pi * persona.osc_freq * frames + persona.osc_phase
    )
    noise_rng = np.random.default_rng(
        [persona.seed, int(audio_seed), _NOISE_STREAM]
    )
    noise = persona.noise_level * noise_rng.normal(size=(L, EXPRESSION_DIM))
    return y + osc + noise


def synthesize_clip(persona, audio_seed, L, frame_rate=25):
    """Genuine clip: the persona's own mapping applied to fresh audio."""
    if L < 1:
        raise InputError(f"L must be >= 1, got {L}")
    audio = _audio_process(audio_seed, L, persona.response.shape[0])
    expr = _render_expressions(persona, audio, audio_seed, frame_rate)
    return Clip(
        audio=audio,
        expressions=expr,
        clip_id=f"{persona.persona_id}-a{audio_seed}",
        persona_id=persona.persona_id,
        actor_id=persona.persona_id,
        is_fake=False,
    )


def forge_clip(target, actor, audio_seed, L, frame_rate=25):
    """Forged clip: the target's audio content rendered with the actor's
    talking identity. forge_clip(x, x, ...) equals synthesize_clip(x, ...)."""
    if L < 1:
        raise InputError(f"L must be >= 1, got {L}")
    audio = _audio_process(audio_seed, L, target.response.shape[0])
    expr = _render_expressions(actor, audio, audio_seed, frame_rate)
    return Clip(
        audio=audio,
        expressions=expr,
        clip_id=f"{target.persona_id}-a{audio_seed}-by-{actor.persona_id}",
        persona_id=target.persona_id,
        actor_id=actor.persona_id,
        is_fake=actor.persona_id != target.persona_id,
    )


# ---------------------------------------------------------------------------
# curation-stage operations

@dataclass
class FlameSequence:
    """3DMM coefficient trajectory: shape, expression, and pose blocks."""

    shape: np.ndarray        # (S,) shared, or (L, S) before singularization
    expression: np.ndarray   # (L, 50)
    pose: np.ndarray         # (L, P); jaw is the last 3 columns

    def shape_is_shared(self):
        return self.shape.ndim == 1


@dataclass
class RefinementObjective:
    """Pluggable curation objective returning (value, gradients).

    fn maps a FlameSequence to (scalar value, FlameSequence of gradients
    with matching block shapes). The concrete perceptual losses used on
    real footage plug in here.
    """

    fn: Callable[[FlameSequence], tuple]
    name: str = "objective"


def singularize_shape(shapes):
    """Mean shape across frames; assign it to the whole clip."""
    shapes = np.asarray(shapes, dtype=np.float64)
    if shapes.size == 0:
        raise InputError("empty shape sequence")
    return shapes.mean(axis=0)


def refine_coeffs(init, obj, iters=10, lr=5e-5, betas=(0.9, 0.999), eps=1e-8):
    """Adaptive-gradient refinement of (shared shape, expressions, poses).

    Runs `iters` Adam steps of the objective. The shape block stays a
    single shared vector throughout.
    """
    if not init.shape_is_shared():
        raise InputError("refine_coeffs requires a singularized (shared) shape")
    params = FlameSequence(
        shape=init.shape.astype(np.float64).copy(),
        expression=init.expression.astype(np.float64).copy(),
        pose=init.pose.astype(np.float64).copy(),
    )
    blocks = ("shape", "expression", "pose")
    m = {b: np.zeros_like(getattr(params, b)) for b in blocks}
    v = {b: np.zeros_like(getattr(params, b)) for b in blocks}
    b1, b2 = betas
    for step in range(1, iters + 1):
        value, grads = obj.fn(params)
        if not np.isfinite(value):
            raise NumericError(f"objective {obj.name!r} returned non-finite value")
        for b in blocks:
            g = np.asarray(getattr(grads, b), dtype=np.float64)
            if g.shape != getattr(params, b).shape:
                raise InputError(f"gradient shape mismatch for block {b!r}")
            m[b] = b1 * m[b] + (1 - b1) * g
            v[b] = b2 * v[b] + (1 - b2) * g * g
            m_hat = m[b] / (1 - b1 ** step)
            v_hat = v[b] / (1 - b2 ** step)
            getattr(params, b)[...] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


def filter_clip(duration_s, quality):
    """Keep a clip iff it is long enough and its quality score passes."""
    return duration_s >= 8.0 and quality > 40.0


# ---------------------------------------------------------------------------
# corpus on disk

def write_corpus(clips, out_dir):
    """Write clips as raw .npy pairs plus a line-delimited JSON manifest.

    Output bytes are a pure function of the clips, so identical seeds
    reproduce an identical corpus.
    """
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for clip in clips:
        np.save(os.path.join(out_dir, f"{clip.clip_id}.audio.npy"),
                clip.audio.astype(np.float32))
        np.save(os.path.join(out_dir, f"{clip.clip_id}.expr.npy"),
                clip.expressions.astype(np.float32))
        lines.append(json.dumps({
            "clip_id": clip.clip_id,
            "persona_id": clip.persona_id,
            "actor_id": clip.actor_id,
            "fake": clip.is_fake,
        }, sort_keys=True))
    with open(os.path.join(out_dir, "manifest.jsonl"), "w") as f:
        f.write("\n".join(lines) + ("\n" if lines else ""))
    return len(lines)


def read_corpus(corpus_dir):
    """Load clips listed in the corpus manifest."""
    manifest = os.path.join(corpus_dir, "manifest.jsonl")
    if not os.path.exists(manifest):
        raise InputError(f"no manifest found in {corpus_dir}")
    clips = []
    with open(manifest) as f:
        for line in f:
            rec = json.loads(line)
            cid = rec["clip_id"]
            clips.append(Clip(
                audio=np.load(os.path.join(corpus_dir, f"{cid}.audio.npy")),
                expressions=np.load(os.path.join(corpus_dir, f"{cid}.expr.npy")),
                clip_id=cid,
                persona_id=rec["persona_id"],
                actor_id=rec["actor_id"],
                is_fake=rec["fake"],
            ))
    return clips


def make_pretraining_clips(num_personas, clips_per_persona, L,
                           audio_dim=16, base_seed=0, noise_level=0.05):
    """Unlabeled pre-training corpus drawn from a pool of personas."""
    personas = [
        generate_persona(base_seed + i, audio_dim=audio_dim,
                         noise_level=noise_level)
        for i in range(num_personas)
    ]
    clips = []
    audio_seed = 10_000 + 7919 * base_seed
    for p in personas:
        for _ in range(clips_per_persona):
            clips.append(synthesize_clip(p, audio_seed, L))
            audio_seed += 1
    return personas, clips
