"""Audio-conditioned expression denoiser.

A transformer encoder over L expression tokens. Each block modulates its
tokens per frame with the audio features (TiLM: an elementwise affine
whose scale and shift are regressed from the frame's audio vector), runs
multi-head self-attention over the tokens plus optional adapter
key/value tokens, and applies a feed-forward network. The diffusion
timestep enters as a sinusoidal embedding mapped through a small MLP and
added to every token. The network predicts the noise that was added to
the expression sequence.

The base parameters include learned unconditional stand-ins for both
conditions: an unconditional audio vector (broadcast over frames) and an
unconditional identity adapter, used for condition dropout during
training and for guidance branches at inference.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .adapter import AdapterParams, adapted_attention
from .errors import ConfigurationError, DomainError, NumericError, ShapeError

EXPRESSION_DIM = 53  # 50 principal expression + 3 jaw pose coefficients


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters for the denoiser."""

    L: int = 200                 # frames (8 s at 25 fps)
    feature_dim: int = EXPRESSION_DIM
    model_dim: int = 512
    mlp_dim: int = 1024
    num_heads: int = 8
    num_layers: int = 8
    dropout: float = 0.1
    cfg_dropout: float = 0.25
    audio_dim: int = 16
    adapter_tokens: int = 8
    frame_rate: int = 25

    def __post_init__(self):
        if self.model_dim % self.num_heads != 0:
            raise ConfigurationError(
                f"model_dim {self.model_dim} not divisible by {self.num_heads} heads"
            )
        for name in ("L", "feature_dim", "model_dim", "mlp_dim", "num_heads",
                     "num_layers", "audio_dim"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if not (0.0 <= self.dropout < 1.0 and 0.0 <= self.cfg_dropout < 1.0):
            raise ConfigurationError("dropout probabilities must be in [0, 1)")
        if self.adapter_tokens < 0:
            raise ConfigurationError("adapter_tokens must be >= 0")


def sinusoidal_embedding(t, dim):
    """Standard sin/cos embedding of (1-indexed) timesteps, shape (B, dim)."""
    t = torch.as_tensor(t)
    if t.dim() == 0:
        t = t.unsqueeze(0)
    if torch.any(t < 1):
        raise DomainError("timesteps are 1-indexed; got t < 1")
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half
    )
    args = t.to(torch.float64).unsqueeze(-1) * freqs
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2 == 1:
        emb = F.pad(emb, (0, 1))
    return emb


def positional_encoding(L, dim):
    """Fixed sinusoidal absolute positions, shape (L, dim)."""
    pos = torch.arange(L, dtype=torch.float64)
    return sinusoidal_embedding(pos + 1, dim)


def seeded_dropout(x, p, rng):
    """Inverted dropout with an explicit torch.Generator; rng=None disables."""
    if rng is None or p <= 0.0:
        return x
    keep = (torch.rand(x.shape, generator=rng, dtype=x.dtype) >= p).to(x.dtype)
    return x * keep / (1.0 - p)


class TiLM(nn.Module):
    """Time- and feature-wise linear modulation.

    Each token x_l is stylized by its own frame's audio vector:
    y_l = x_l * s(a_l) + m(a_l), where s and m are a Mish activation
    followed by a linear map from audio_dim to model_dim. Cost is O(L).
    """

    def __init__(self, audio_dim, model_dim):
        super().__init__()
        self.scale = nn.Linear(audio_dim, model_dim)
        self.shift = nn.Linear(audio_dim, model_dim)

    def forward(self, x, a):
        if x.shape[-2] != a.shape[-2]:
            raise ShapeError(
                f"token length {x.shape[-2]} != audio length {a.shape[-2]}"
            )
        a = F.mish(a)
        return x * self.scale(a) + self.shift(a)


class DenoiserBlock(nn.Module):
    """Pre-LN transformer block with TiLM conditioning and adapter k/v."""

    def __init__(self, config):
        super().__init__()
        C = config.model_dim
        self.num_heads = config.num_heads
        self.p_drop = config.dropout
        self.ln1 = nn.LayerNorm(C)
        self.ln2 = nn.LayerNorm(C)
        self.tilm = TiLM(config.audio_dim, C)
        self.q_proj = nn.Linear(C, C)
        self.k_proj = nn.Linear(C, C)
        self.v_proj = nn.Linear(C, C)
        self.attn_out = nn.Linear(C, C)
        self.ffn = nn.Sequential(
            nn.Linear(C, config.mlp_dim),
            nn.GELU(),
            nn.Linear(config.mlp_dim, C),
        )

    def forward(self, h, a, adapter, dropout_rng=None):
        x = self.tilm(self.ln1(h), a)
        att = adapted_attention(
            self.q_proj(x), self.k_proj(x), self.v_proj(x), adapter, self.num_heads
        )
        h = h + seeded_dropout(self.attn_out(att), self.p_drop, dropout_rng)
        h = h + seeded_dropout(self.ffn(self.ln2(h)), self.p_drop, dropout_rng)
        return h


class Denoiser(nn.Module):
    """Noise-prediction network over expression sequences.

    forward(z_t, t, audio, adapter) returns the predicted noise with the
    same shape as z_t. audio=None substitutes the learned unconditional
    audio vector; adapter=None substitutes the learned unconditional
    identity adapter. Deterministic when dropout_rng is None.
    """

    def __init__(self, config):
        super().__init__()
        self.config = config
        C = config.model_dim
        self.in_proj = nn.Linear(config.feature_dim, C)
        self.out_proj = nn.Linear(C, config.feature_dim)
        self.time_mlp = nn.Sequential(nn.Linear(C, C), nn.SiLU(), nn.Linear(C, C))
        self.blocks = nn.ModuleList(
            DenoiserBlock(config) for _ in range(config.num_layers)
        )
        self.ln_f = nn.LayerNorm(C)
        self.uncond_audio = nn.Parameter(torch.zeros(config.audio_dim))
        self.uncond_adapter = AdapterParams(C, config.adapter_tokens)
        self.register_buffer(
            "pos", positional_encoding(config.L, C).to(torch.float32)
        )

    def reset_parameters(self, rng=None, std=0.02):
        """Deterministic re-initialization from a torch.Generator."""
        with torch.no_grad():
            for name, p in self.named_parameters():
                if p.dim() >= 2 or "tokens" in name or "uncond_audio" in name:
                    p.normal_(0.0, std, generator=rng)
                else:
                    p.zero_()
            # LayerNorm scales back to 1 after the blanket init
            for m in self.modules():
                if isinstance(m, nn.LayerNorm):
                    m.weight.fill_(1.0)
                    m.bias.zero_()
            # identity modulation at init: s(a) near 1, m(a) near 0
            for m in self.modules():
                if isinstance(m, TiLM):
                    m.scale.bias.fill_(1.0)
                    m.shift.bias.zero_()
        return self

    def num_params(self):
        return sum(p.numel() for p in self.parameters())

    def forward(self, z_t, t, audio=None, adapter=None, dropout_rng=None):
        cfg = self.config
        squeeze = z_t.dim() == 2
        if squeeze:
            z_t = z_t.unsqueeze(0)
        B, L, Fdim = z_t.shape
        if Fdim != cfg.feature_dim or L != cfg.L:
            raise ShapeError(
                f"expected ({cfg.L}, {cfg.feature_dim}) sequences, got ({L}, {Fdim})"
            )
        if not torch.isfinite(z_t).all():
            raise NumericError("non-finite values in noisy input")

        dtype = self.in_proj.weight.dtype
        z_t = z_t.to(dtype)
        if audio is None:
            audio = self.uncond_audio.expand(B, L, cfg.audio_dim)
        else:
            if audio.shape[-2] != L or audio.shape[-1] != cfg.audio_dim:
                raise ShapeError(
                    f"audio shape {tuple(audio.shape[-2:])} != ({L}, {cfg.audio_dim})"
                )
            if audio.dim() == 2:
                audio = audio.unsqueeze(0).expand(B, L, cfg.audio_dim)
            if not torch.isfinite(audio).all():
                raise NumericError("non-finite values in audio features")
            audio = audio.to(dtype)
        if adapter is None:
            adapter = self.uncond_adapter

        t = torch.as_tensor(t)
        if t.dim() == 0:
            t = t.expand(B)
        temb = self.time_mlp(
            sinusoidal_embedding(t, cfg.model_dim).to(dtype)
        )  # (B, C)
        h = self.in_proj(z_t) + self.pos.to(dtype) + temb.unsqueeze(1)
        for block in self.blocks:
            h = block(h, audio, adapter, dropout_rng)
        out = self.out_proj(self.ln_f(h))
        return out.squeeze(0) if squeeze else out

    def apply_condition_dropout(self, audio, adapter, p, rng):
        """Independently replace each condition with its unconditional
        counterpart with probability p (training-time CFG dropout).

        audio: (L, D) tensor or None; adapter: AdapterParams or None.
        rng is an np.random.Generator. Returns (audio, adapter).
        """
        if not (0.0 <= p <= 1.0):
            raise ConfigurationError(f"dropout probability {p} outside [0, 1]")
        if p > 0.0 and rng.random() < p:
            audio = None
        if p > 0.0 and rng.random() < p:
            adapter = None
        return audio, adapter
