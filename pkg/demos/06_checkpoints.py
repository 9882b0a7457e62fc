"""Checkpoint format
=====================

Base and adapter checkpoints are single files: a magic string, a JSON
manifest (format version, kind, config snapshot, per-tensor shape /
offset / SHA-256), and raw little-endian float32 blobs. Loads are
bit-exact and every blob digest is verified, so silent corruption is
impossible.
"""

import os
import tempfile

import torch

from exprauth import init_adapter, params_digest
from exprauth.checkpoint import (
    load_adapter,
    load_base,
    read_checkpoint,
    save_adapter,
    save_base,
)
from exprauth.errors import CompatibilityError, CorruptionError
from exprauth.model import Denoiser, ModelConfig

cfg = ModelConfig(L=20, model_dim=32, mlp_dim=64, num_heads=4,
                  num_layers=2, audio_dim=8, adapter_tokens=4)
model = Denoiser(cfg).reset_parameters(torch.Generator().manual_seed(0))
adapter = init_adapter(cfg.model_dim, cfg.adapter_tokens,
                       torch.Generator().manual_seed(1))

with tempfile.TemporaryDirectory() as d:
    base_path = os.path.join(d, "base.ckpt")
    adapter_path = os.path.join(d, "adapter.ckpt")
    save_base(model, base_path)
    save_adapter(adapter, adapter_path, cfg)
    print(f"base checkpoint: {os.path.getsize(base_path):,} bytes")
    print(f"adapter checkpoint: {os.path.getsize(adapter_path):,} bytes "
          f"({adapter.num_params():,} parameters)")

    loaded, snapshot = load_base(base_path)
    print("base roundtrip bit-exact:",
          params_digest(loaded) == params_digest(model))
    print("adapter roundtrip bit-exact:",
          params_digest(load_adapter(adapter_path, cfg)) == params_digest(adapter))

    # an adapter refuses to load against a mismatched base config
    other = ModelConfig(L=20, model_dim=64, mlp_dim=64, num_heads=4,
                        num_layers=2, audio_dim=8, adapter_tokens=4)
    try:
        load_adapter(adapter_path, other)
    except CompatibilityError as e:
        print(f"config mismatch rejected: {e}")

    # flip one payload byte: the per-tensor digest catches it
    raw = bytearray(open(base_path, "rb").read())
    raw[-1] ^= 0x01
    open(base_path, "wb").write(bytes(raw))
    try:
        read_checkpoint(base_path)
    except CorruptionError as e:
        print(f"corruption rejected: {e}")
