"""Benchmark harness and figures
=================================

Runs the full evaluation loop on a small synthetic split: personalize
each subject, fit thresholds on validation clips, score labeled test
clips, sweep a feature-level corruption, and write report.json,
scores.csv, and the ROC / histogram / severity figures.

Output lands in demos/out/bench.
"""

import os

from exprauth import (
    Dataset,
    GuidanceConfig,
    ScoringConfig,
    TrainConfig,
    make_evaluation_split,
    make_linear_schedule,
    run_benchmark,
)
from exprauth.model import ModelConfig
from exprauth.synthdata import make_pretraining_clips
from exprauth.trainer import run_pretraining

model_cfg = ModelConfig(L=20, model_dim=32, mlp_dim=64, num_heads=4,
                        num_layers=2, audio_dim=8, adapter_tokens=4)
train_cfg = TrainConfig(batch_size=16, learning_rate=1e-3, epochs=12, seed=0)
sched = make_linear_schedule(T=200, beta_start=1e-3, beta_end=0.03)
scoring = ScoringConfig(t_start=41, t_end=160, num_timesteps=12, noise_count=8)

personas, clips = make_pretraining_clips(6, 16, model_cfg.L,
                                         audio_dim=model_cfg.audio_dim)
base, _ = run_pretraining(Dataset.from_clips(clips), model_cfg, train_cfg, sched)

split = make_evaluation_split(personas[:2], personas, model_cfg.L,
                              n_ref=4, n_val=4, n_test_real=4, n_test_fake=4,
                              seed=0)

out_dir = os.path.join(os.path.dirname(__file__), "out", "bench")
report, _ = run_benchmark(
    split, base, scoring, GuidanceConfig(), sched, train_cfg,
    perturbation_plan={"kinds": ["expr_noise", "temporal_blur"],
                       "severities": [0, 2, 4], "seed": 0},
    out_dir=out_dir,
)

print("pooled AUC:", {k: round(v, 4) for k, v in report.pooled_auc.items()})
for sid, accs in report.accuracy.items():
    print(f"{sid}: accuracy {accs}")
print("corruption sweep (ratio AUC):")
for kind, table in report.sweep.items():
    print(f"  {kind}: {table}")
print(f"report + figures in {out_dir}")
