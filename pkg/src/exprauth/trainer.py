"""Pre-training on the unlabeled corpus and per-subject personalization.

Pre-training optimizes all base parameters with the simple noise
regression loss: sample t uniformly from [1, T] and eps from a standard
normal per clip, corrupt the expressions, and regress the prediction
onto eps. Personalization trains only the adapter (tokens plus shared
key/value projections) on a subject's reference clips, over-sampled to
the batch size, with the base parameters frozen.
"""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from .adapter import init_adapter
from .errors import InputError, TrainingError
from .model import Denoiser
from .schedule import forward_diffuse

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Unlabeled training corpus: stacked expressions and audio features.

    Identity metadata is deliberately not stored here; pre-training is
    label-free.
    """

    expressions: np.ndarray   # (n, L, 53) float32
    audio: np.ndarray         # (n, L, D) float32

    @classmethod
    def from_clips(cls, clips):
        if not clips:
            raise InputError("empty dataset")
        expr = np.stack([c.expressions for c in clips]).astype(np.float32)
        audio = np.stack([c.audio for c in clips]).astype(np.float32)
        return cls(expressions=expr, audio=audio)

    def __len__(self):
        return self.expressions.shape[0]


@dataclass
class ReferenceSet:
    """Pristine clips of a single subject used for personalization."""

    subject_id: str
    clips: list
    frame_rate: int = 25

    def __post_init__(self):
        if not self.clips:
            raise InputError("empty reference set")
        for c in self.clips:
            if c.persona_id != self.subject_id or c.is_fake:
                raise InputError(
                    f"reference set for {self.subject_id!r} contains a "
                    f"non-matching or forged clip {c.clip_id!r}"
                )

    @property
    def duration_seconds(self):
        return sum(c.expressions.shape[0] for c in self.clips) / self.frame_rate


@dataclass
class TrainConfig:
    """Optimization settings shared by pre-training and personalization."""

    batch_size: int = 256
    learning_rate: float = 1e-4
    epochs: int = 100
    cfg_dropout: float = 0.25
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")


def params_digest(module):
    """SHA-256 over all named parameters, order-independent of creation."""
    h = hashlib.sha256()
    for name, p in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def _make_optimizer(params, config):
    # any adaptive first-order optimizer fits the contract; Adam is the default
    return torch.optim.Adam(
        params, lr=config.learning_rate, betas=config.betas,
        weight_decay=config.weight_decay,
    )


def _diffusion_batch(expr, schedule, rng):
    """Sample (t, eps, z_t) for a batch of clean sequences."""
    B = expr.shape[0]
    t = rng.integers(1, schedule.T + 1, size=B)
    eps = rng.standard_normal(expr.shape)
    ab = schedule.alpha_bars[t - 1][:, None, None]
    z_t = np.sqrt(ab) * expr + np.sqrt(1.0 - ab) * eps
    return t, eps.astype(np.float32), z_t.astype(np.float32)


def pretrain_step(model, optimizer, batch_expr, batch_audio, schedule,
                  config, rng, dropout_rng=None):
    """One optimizer update of the base model on a batch; returns the loss.

    Condition dropout draws independent coins per sample for the audio
    and identity conditions; during pre-training the identity pathway is
    already unconditional, so its coin has no further effect.
    """
    t, eps, z_t = _diffusion_batch(batch_expr, schedule, rng)
    B = batch_expr.shape[0]
    audio_drop = rng.random(B) < config.cfg_dropout
    rng.random(B)  # identity coins; pre-training runs unconditional anyway

    audio = torch.from_numpy(np.ascontiguousarray(batch_audio))
    if audio_drop.any():
        audio = audio.clone()
        audio[torch.from_numpy(audio_drop)] = model.uncond_audio.to(audio.dtype)

    pred = model(
        torch.from_numpy(z_t), torch.from_numpy(t), audio,
        adapter=None, dropout_rng=dropout_rng,
    )
    loss = torch.mean((torch.from_numpy(eps) - pred) ** 2)
    if not torch.isfinite(loss):
        raise TrainingError(f"non-finite pre-training loss at t={t.tolist()[:8]}")
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.item())


def run_pretraining(dataset, model_config, train_config, schedule):
    """Train a fresh base model on the corpus; returns (model, loss curve)."""
    if len(dataset) == 0:
        raise InputError("empty dataset")
    torch_gen = torch.Generator().manual_seed(train_config.seed)
    model = Denoiser(model_config).reset_parameters(torch_gen)
    optimizer = _make_optimizer(model.parameters(), train_config)
    rng = np.random.default_rng([train_config.seed, 1])
    dropout_gen = torch.Generator().manual_seed(train_config.seed + 1)

    n = len(dataset)
    bs = min(train_config.batch_size, n)
    curve = []
    model.train()
    for epoch in range(train_config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n - bs + 1, bs):
            idx = order[start : start + bs]
            losses.append(pretrain_step(
                model, optimizer,
                dataset.expressions[idx], dataset.audio[idx],
                schedule, train_config, rng, dropout_rng=dropout_gen,
            ))
        mean_loss = float(np.mean(losses))
        curve.append(mean_loss)
        log.info("pretrain epoch %d mean_loss %.6f", epoch, mean_loss)
    model.eval()
    return model, curve


def personalize(base, refs, train_config, schedule):
    """Train a subject adapter against a frozen base model.

    Runs exactly (#reference clips) x (epochs) iterations; every batch is
    formed by over-sampling the reference clips to the batch size. The
    base parameters are bit-identical before and after.
    """
    if not refs.clips:
        raise InputError("empty reference set")
    digest_before = params_digest(base)
    base.eval()
    for p in base.parameters():
        p.requires_grad_(False)

    cfg = base.config
    torch_gen = torch.Generator().manual_seed(train_config.seed)
    adapter = init_adapter(cfg.model_dim, cfg.adapter_tokens, torch_gen)
    optimizer = _make_optimizer(adapter.parameters(), train_config)
    rng = np.random.default_rng([train_config.seed, 2])
    dropout_gen = torch.Generator().manual_seed(train_config.seed + 3)

    expr = np.stack([c.expressions for c in refs.clips]).astype(np.float32)
    audio_np = np.stack([c.audio for c in refs.clips]).astype(np.float32)
    iterations = len(refs.clips) * train_config.epochs
    bs = train_config.batch_size

    for it in range(iterations):
        idx = rng.integers(0, len(refs.clips), size=bs)
        t, eps, z_t = _diffusion_batch(expr[idx], schedule, rng)
        audio_drop = rng.random(bs) < train_config.cfg_dropout
        id_drop = rng.random(bs) < train_config.cfg_dropout

        audio = torch.from_numpy(np.ascontiguousarray(audio_np[idx]))
        if audio_drop.any():
            audio = audio.clone()
            audio[torch.from_numpy(audio_drop)] = base.uncond_audio.to(audio.dtype)

        z_t_t = torch.from_numpy(z_t)
        t_t = torch.from_numpy(t)
        eps_t = torch.from_numpy(eps)
        # identity dropout replaces the subject adapter with the base's
        # unconditional tokens for the selected samples
        keep = torch.from_numpy(~id_drop)
        losses = []
        if keep.any():
            pred = base(z_t_t[keep], t_t[keep], audio[keep],
                        adapter=adapter, dropout_rng=dropout_gen)
            losses.append(((eps_t[keep] - pred) ** 2).sum())
        if (~keep).any():
            pred = base(z_t_t[~keep], t_t[~keep], audio[~keep],
                        adapter=None, dropout_rng=dropout_gen)
            losses.append(((eps_t[~keep] - pred) ** 2).sum())
        loss = sum(losses) / eps_t.numel()
        if not torch.isfinite(loss):
            raise TrainingError("non-finite personalization loss")
        optimizer.zero_grad()
        if loss.requires_grad:
            loss.backward()
        else:
            # every sample drew the identity-dropout coin: the batch loss
            # is constant in the adapter, i.e. the gradient is zero
            for p in adapter.parameters():
                p.grad = torch.zeros_like(p)
        optimizer.step()
        if (it + 1) % max(1, len(refs.clips)) == 0:
            log.info("personalize %s iter %d loss %.6f",
                     refs.subject_id, it + 1, float(loss.item()))

    if params_digest(base) != digest_before:
        raise TrainingError("frozen base parameters changed during personalization")
    return adapter
