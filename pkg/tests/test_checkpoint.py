import json
import struct

import pytest
import torch

from exprauth.adapter import init_adapter
from exprauth.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    config_digest,
    load_adapter,
    load_base,
    read_checkpoint,
    save_adapter,
    save_base,
)
from exprauth.errors import CompatibilityError, CorruptionError
from exprauth.model import Denoiser, ModelConfig
from exprauth.trainer import params_digest


@pytest.fixture
def base_path(tiny_model, tmp_path):
    path = tmp_path / "base.ckpt"
    save_base(tiny_model, str(path))
    return path


@pytest.fixture
def adapter(tiny_config):
    gen = torch.Generator().manual_seed(2)
    a = init_adapter(tiny_config.model_dim, tiny_config.adapter_tokens, gen)
    with torch.no_grad():
        a.W_v.normal_(0.0, 0.1, generator=gen)
    return a


class TestRoundtrip:
    def test_base_bit_exact(self, tiny_model, base_path):
        loaded, config = load_base(str(base_path))
        assert params_digest(loaded) == params_digest(tiny_model)
        assert config["model_dim"] == tiny_model.config.model_dim
        assert not loaded.training

    def test_base_save_load_save_identical_bytes(self, tiny_model, tmp_path):
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_base(tiny_model, str(p1))
        loaded, _ = load_base(str(p1))
        save_base(loaded, str(p2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_adapter_bit_exact(self, tiny_config, adapter, tmp_path):
        path = tmp_path / "adapter.ckpt"
        save_adapter(adapter, str(path), tiny_config)
        loaded = load_adapter(str(path), tiny_config)
        assert params_digest(loaded) == params_digest(adapter)
        assert torch.equal(loaded.tokens, adapter.tokens)

    def test_loaded_model_same_outputs(self, tiny_model, base_path, tiny_inputs):
        z, a = tiny_inputs
        loaded, _ = load_base(str(base_path))
        assert torch.equal(loaded(z, 5, a), tiny_model(z, 5, a))

    def test_manifest_structure(self, base_path):
        manifest, tensors = read_checkpoint(str(base_path))
        assert manifest["format_version"] == FORMAT_VERSION
        assert manifest["kind"] == "base"
        assert set(tensors) == set(manifest["tensors"])
        for meta in manifest["tensors"].values():
            assert meta["dtype"] == "float32"
            assert meta["nbytes"] == 4 * int(torch.tensor(meta["shape"]).prod()
                                             if meta["shape"] else 1)

    def test_adapter_checkpoint_is_small(self, tiny_config, adapter, tmp_path):
        # standalone adapter: N*C + 2*C^2 floats plus a bounded manifest
        path = tmp_path / "adapter.ckpt"
        save_adapter(adapter, str(path), tiny_config)
        param_bytes = 4 * adapter.num_params()
        assert param_bytes <= path.stat().st_size <= param_bytes + 4096


class TestCorruptionRejection:
    def test_bad_magic(self, base_path):
        raw = bytearray(base_path.read_bytes())
        raw[:8] = b"NOTMYFMT"
        base_path.write_bytes(bytes(raw))
        with pytest.raises(CorruptionError):
            read_checkpoint(str(base_path))

    def test_flipped_payload_byte(self, base_path):
        raw = bytearray(base_path.read_bytes())
        raw[-1] ^= 0xFF
        base_path.write_bytes(bytes(raw))
        with pytest.raises(CorruptionError):
            read_checkpoint(str(base_path))

    def test_truncated_payload(self, base_path):
        raw = base_path.read_bytes()
        base_path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CorruptionError):
            read_checkpoint(str(base_path))

    def test_garbled_manifest(self, base_path):
        raw = bytearray(base_path.read_bytes())
        raw[20] = 0x00  # stomp inside the JSON manifest
        base_path.write_bytes(bytes(raw))
        with pytest.raises(CorruptionError):
            read_checkpoint(str(base_path))

    def test_future_format_version(self, tiny_model, tmp_path):
        path = tmp_path / "v2.ckpt"
        save_base(tiny_model, str(path))
        raw = path.read_bytes()
        (mlen,) = struct.unpack("<Q", raw[8:16])
        manifest = json.loads(raw[16 : 16 + mlen])
        manifest["format_version"] = FORMAT_VERSION + 1
        mblob = json.dumps(manifest, sort_keys=True).encode()
        path.write_bytes(MAGIC + struct.pack("<Q", len(mblob)) + mblob
                         + raw[16 + mlen :])
        with pytest.raises(CompatibilityError):
            read_checkpoint(str(path))


class TestCompatibility:
    def test_kind_mismatch(self, tiny_config, tiny_model, adapter, tmp_path):
        base_p = tmp_path / "base.ckpt"
        adapter_p = tmp_path / "adapter.ckpt"
        save_base(tiny_model, str(base_p))
        save_adapter(adapter, str(adapter_p), tiny_config)
        with pytest.raises(CompatibilityError):
            load_base(str(adapter_p))
        with pytest.raises(CompatibilityError):
            load_adapter(str(base_p))

    def test_adapter_rejected_against_wrong_base(self, tiny_config, adapter,
                                                 tmp_path):
        path = tmp_path / "adapter.ckpt"
        save_adapter(adapter, str(path), tiny_config)
        other = ModelConfig(L=6, model_dim=16, mlp_dim=16, num_heads=2,
                            num_layers=2, audio_dim=4, adapter_tokens=3)
        with pytest.raises(CompatibilityError) as err:
            load_adapter(str(path), other)
        # the error names both config digests
        msg = str(err.value)
        assert config_digest({k: v for k, v in
                              __import__("dataclasses").asdict(other).items()}) in msg

    def test_wrong_tensor_shape(self, tiny_config, adapter, tmp_path):
        # same model_dim/adapter_tokens in the manifest but a lying shape
        path = tmp_path / "adapter.ckpt"
        save_adapter(adapter, str(path), tiny_config)
        manifest, tensors = read_checkpoint(str(path))
        import exprauth.checkpoint as ck
        bad = {n: (t[:-1] if n == "tokens" else t) for n, t in tensors.items()}
        from exprauth.adapter import AdapterParams
        target = AdapterParams(tiny_config.model_dim, tiny_config.adapter_tokens)
        with pytest.raises(CompatibilityError):
            ck._load_into(target, bad, str(path))


class TestConfigDigest:
    def test_stable_under_key_order(self):
        assert config_digest({"a": 1, "b": 2}) == config_digest({"b": 2, "a": 1})

    def test_sensitive_to_values(self):
        assert config_digest({"a": 1}) != config_digest({"a": 2})
