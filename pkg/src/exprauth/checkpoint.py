"""Checkpoint persistence.

Single-file format designed for bit-exact, cross-language portability:

    magic "XAUTHCK1" | u64 manifest length | manifest JSON | tensor blobs

The manifest records the format version, the kind ("base" or "adapter"),
a config snapshot, and one entry per tensor with shape, dtype, byte
offset into the payload, byte length, and a SHA-256 digest of the blob.
Tensors are little-endian float32, row-major. Every digest is verified
on load. Adapter checkpoints are standalone: they carry only the
N*C + 2*C^2 adapter parameters plus the model-config snapshot needed to
reject loading against an incompatible base.
"""

import hashlib
import json
import struct
from dataclasses import asdict

import numpy as np
import torch

from .adapter import AdapterParams
from .errors import CompatibilityError, CorruptionError
from .model import Denoiser, ModelConfig

MAGIC = b"XAUTHCK1"
FORMAT_VERSION = 1


def config_digest(config_dict):
    """Stable digest of a config snapshot, printed on mismatch."""
    blob = json.dumps(config_dict, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _tensor_bytes(t):
    arr = t.detach().cpu().numpy().astype("<f4", copy=False)
    return np.ascontiguousarray(arr).tobytes()


def save_checkpoint(module, path, config_dict, kind):
    """Serialize a module's state dict; returns the manifest dict."""
    tensors = {}
    payload = bytearray()
    for name, t in sorted(module.state_dict().items()):
        blob = _tensor_bytes(t)
        tensors[name] = {
            "shape": list(t.shape),
            "dtype": "float32",
            "offset": len(payload),
            "nbytes": len(blob),
            "sha256": hashlib.sha256(blob).hexdigest(),
        }
        payload.extend(blob)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config_dict,
        "tensors": tensors,
    }
    mblob = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(mblob)))
        f.write(mblob)
        f.write(payload)
    return manifest


def read_checkpoint(path):
    """Parse and integrity-check a checkpoint; returns (manifest, tensors)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != MAGIC:
        raise CorruptionError(f"{path}: bad magic")
    (mlen,) = struct.unpack("<Q", raw[8:16])
    try:
        manifest = json.loads(raw[16 : 16 + mlen])
    except (ValueError, UnicodeDecodeError) as e:
        raise CorruptionError(f"{path}: unreadable manifest: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CompatibilityError(
            f"{path}: format version {manifest.get('format_version')}"
        )
    payload = raw[16 + mlen :]
    tensors = {}
    for name, meta in manifest["tensors"].items():
        blob = payload[meta["offset"] : meta["offset"] + meta["nbytes"]]
        if len(blob) != meta["nbytes"]:
            raise CorruptionError(f"{path}: truncated payload for tensor {name!r}")
        if hashlib.sha256(blob).hexdigest() != meta["sha256"]:
            raise CorruptionError(f"{path}: digest mismatch for tensor {name!r}")
        arr = np.frombuffer(blob, dtype="<f4").reshape(meta["shape"]).copy()
        tensors[name] = torch.from_numpy(arr)
    return manifest, tensors


def _load_into(module, tensors, path):
    state = module.state_dict()
    if set(state) != set(tensors):
        raise CompatibilityError(f"{path}: tensor names do not match the config")
    for name, t in tensors.items():
        if tuple(state[name].shape) != tuple(t.shape):
            raise CompatibilityError(
                f"{path}: tensor {name!r} has shape {tuple(t.shape)}, "
                f"config expects {tuple(state[name].shape)}"
            )
    module.load_state_dict(tensors)
    return module


def save_base(model, path, extra_config=None):
    cfg = asdict(model.config)
    if extra_config:
        cfg = {**cfg, **extra_config}
    return save_checkpoint(model, path, cfg, kind="base")


def load_base(path):
    """Rebuild a Denoiser from a base checkpoint; returns (model, config)."""
    manifest, tensors = read_checkpoint(path)
    if manifest["kind"] != "base":
        raise CompatibilityError(f"{path}: expected a base checkpoint")
    fields = {k: v for k, v in manifest["config"].items()
              if k in ModelConfig.__dataclass_fields__}
    config = ModelConfig(**fields)
    model = Denoiser(config)
    _load_into(model, tensors, path)
    model.eval()
    return model, manifest["config"]


def save_adapter(adapter, path, model_config):
    cfg = asdict(model_config) if isinstance(model_config, ModelConfig) else dict(model_config)
    return save_checkpoint(adapter, path, cfg, kind="adapter")


def load_adapter(path, expected_config=None):
    """Rebuild an AdapterParams; verifies against expected_config if given."""
    manifest, tensors = read_checkpoint(path)
    if manifest["kind"] != "adapter":
        raise CompatibilityError(f"{path}: expected an adapter checkpoint")
    cfg = manifest["config"]
    if expected_config is not None:
        exp = asdict(expected_config) if isinstance(expected_config, ModelConfig) else dict(expected_config)
        keys = ("model_dim", "adapter_tokens")
        if any(cfg.get(k) != exp.get(k) for k in keys):
            raise CompatibilityError(
                f"{path}: adapter config digest {config_digest(cfg)} does not "
                f"match base config digest {config_digest(exp)}"
            )
    adapter = AdapterParams(cfg["model_dim"], cfg["adapter_tokens"])
    _load_into(adapter, tensors, path)
    return adapter
