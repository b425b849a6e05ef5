import numpy as np
import pytest

from seedcast import synth
from seedcast.config import ExperimentConfig


@pytest.fixture
def tiny_dataset(tmp_path):
    """A small 2-variable synthetic CSV plus a fast-training config."""
    values, names = synth.generate_series(400, 2, seed=3)
    csv = tmp_path / "tiny.csv"
    synth.write_csv(csv, values, names)

    cfg = ExperimentConfig()
    cfg.dataset_path = str(csv)
    cfg.window = 32
    cfg.horizon = 8
    cfg.encoder_d = 16
    cfg.encoder_ffn = 32
    cfg.encoder_layers = 1
    cfg.d_lm = 32
    cfg.decoder_layers = 1
    cfg.max_epochs = 2
    cfg.patience = 2
    cfg.checkpoint_path = str(tmp_path / "model.ckpt")
    cfg.report_dir = str(tmp_path / "reports")
    cfg.validate()
    return cfg


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
