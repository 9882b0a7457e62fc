"""Per-frame score traces
=========================

The clip-level score has a per-frame decomposition: squared errors are
summed over the 53 coefficient channels per frame before the ratio is
taken, then smoothed with a centered moving average. Frames whose
dynamics do not match the subject push their local ratio up, which
localizes manipulated segments in time.

Here the "suspect" clip is genuine in its first half and forged in the
second (expressions swapped mid-clip), and the trace is plotted.
"""

import os

import numpy as np

from exprauth import (
    Dataset,
    GuidanceConfig,
    ReferenceSet,
    ScoringConfig,
    TrainConfig,
    make_linear_schedule,
    personalize,
    temporal_scores,
)
from exprauth.model import ModelConfig
from exprauth.synthdata import Clip, forge_clip, make_pretraining_clips, synthesize_clip
from exprauth.trainer import run_pretraining

model_cfg = ModelConfig(L=50, model_dim=64, mlp_dim=128, num_heads=4,
                        num_layers=2, audio_dim=16, adapter_tokens=8)
train_cfg = TrainConfig(batch_size=64, learning_rate=1e-3, epochs=40, seed=0)
sched = make_linear_schedule()
scoring = ScoringConfig(t_start=201, t_end=800, num_timesteps=30, noise_count=32)

personas, clips = make_pretraining_clips(16, 32, model_cfg.L, audio_dim=16)
base, _ = run_pretraining(Dataset.from_clips(clips), model_cfg, train_cfg, sched)

subject, impostor = personas[0], personas[1]
refs = ReferenceSet(
    subject_id=subject.persona_id,
    clips=[synthesize_clip(subject, 900 + i, model_cfg.L) for i in range(8)],
)
adapter = personalize(base, refs, train_cfg, sched)

genuine = synthesize_clip(subject, 980, model_cfg.L)
fake = forge_clip(subject, impostor, 980, model_cfg.L)
half = model_cfg.L // 2
spliced = Clip(
    audio=genuine.audio,
    expressions=np.concatenate([genuine.expressions[:half],
                                fake.expressions[half:]]),
    clip_id="spliced", persona_id=subject.persona_id,
    actor_id=impostor.persona_id, is_fake=True,
)

series, mean = temporal_scores(spliced.expressions, spliced.audio, base,
                               adapter, scoring, GuidanceConfig(), sched,
                               window=9)
ref_series, ref_mean = temporal_scores(genuine.expressions, genuine.audio,
                                       base, adapter, scoring,
                                       GuidanceConfig(), sched, window=9)
print(f"genuine clip: mean per-frame ratio {ref_mean:.4f}")
print(f"spliced clip: mean per-frame ratio {mean:.4f}")
print(f"spliced first half mean {series[:half].mean():.4f}, "
      f"second half mean {series[half:].mean():.4f}")

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

out = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out, exist_ok=True)
fig, ax = plt.subplots(figsize=(6, 3))
ax.plot(ref_series, label="genuine", color="tab:blue")
ax.plot(series, label="spliced (fake 2nd half)", color="tab:red")
ax.axvline(half, color="k", ls=":", lw=1)
ax.set_xlabel("frame")
ax.set_ylabel("per-frame ratio")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(out, "temporal.png"))
print(f"trace written to {os.path.join(out, 'temporal.png')}")
