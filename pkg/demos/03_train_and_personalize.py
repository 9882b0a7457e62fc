"""Pre-training and subject personalization
============================================

Trains a small noise-prediction transformer on an unlabeled synthetic
corpus, then personalizes it to one subject by fitting only the adapter
(tokens plus shared key/value projections) against the frozen base.
Sized to finish in well under a minute on a laptop CPU.
"""

from exprauth import (
    Dataset,
    ReferenceSet,
    TrainConfig,
    count_adapter_params,
    make_linear_schedule,
    params_digest,
    personalize,
)
from exprauth.model import ModelConfig
from exprauth.synthdata import make_pretraining_clips, synthesize_clip
from exprauth.trainer import run_pretraining

model_cfg = ModelConfig(L=20, model_dim=32, mlp_dim=64, num_heads=4,
                        num_layers=2, audio_dim=8, adapter_tokens=4)
train_cfg = TrainConfig(batch_size=16, learning_rate=1e-3, epochs=8, seed=0)
sched = make_linear_schedule(T=200, beta_start=1e-3, beta_end=0.03)

personas, clips = make_pretraining_clips(4, 16, model_cfg.L,
                                         audio_dim=model_cfg.audio_dim)
print(f"corpus: {len(clips)} clips from {len(personas)} personas (unlabeled)")

model, curve = run_pretraining(Dataset.from_clips(clips), model_cfg,
                               train_cfg, sched)
print(f"pre-training loss: {curve[0]:.4f} -> {curve[-1]:.4f}")
print(f"base parameters: {model.num_params():,}")

# personalization: a handful of pristine reference clips of one subject
subject = personas[0]
refs = ReferenceSet(
    subject_id=subject.persona_id,
    clips=[synthesize_clip(subject, 900 + i, model_cfg.L) for i in range(4)],
)
print(f"reference set: {refs.duration_seconds:.1f} s of {subject.persona_id}")

digest = params_digest(model)
adapter = personalize(model, refs, train_cfg, sched)
print(f"adapter parameters: {adapter.num_params():,} "
      f"(= {count_adapter_params(model_cfg.model_dim, model_cfg.adapter_tokens):,})")
print("base unchanged by personalization:", params_digest(model) == digest)
