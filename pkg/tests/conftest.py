import numpy as np
import pytest
import torch

from exprauth.model import Denoiser, ModelConfig

# one verdict line per acceptance criterion, echoed after the run so the
# lines survive output capture
acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_config():
    return ModelConfig(L=6, model_dim=8, mlp_dim=16, num_heads=2,
                       num_layers=2, dropout=0.1, audio_dim=4,
                       adapter_tokens=3)


@pytest.fixture
def tiny_model(tiny_config):
    gen = torch.Generator().manual_seed(42)
    model = Denoiser(tiny_config).reset_parameters(gen)
    model.eval()
    return model


@pytest.fixture
def tiny_inputs(tiny_config):
    rng = np.random.default_rng(5)
    z = torch.from_numpy(
        rng.normal(size=(tiny_config.L, tiny_config.feature_dim)).astype(np.float32)
    )
    a = torch.from_numpy(
        rng.normal(size=(tiny_config.L, tiny_config.audio_dim)).astype(np.float32)
    )
    return z, a
