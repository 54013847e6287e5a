# tests/conftest.py
import numpy as np
import pytest

from reconet.config import build_train_config
from reconet.engine.tensor import GRADCHECK_DTYPE, set_debug_finite
from reconet.fixtures import STYLE_NAME, write_fixture_dataset
from reconet.stylenet.backbone import PerceptualBackbone


@pytest.fixture(autouse=True)
def finite_checks():
    set_debug_finite(True)
    yield
    set_debug_finite(None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def test_backbone():
    return PerceptualBackbone.random("test", seed=0)


@pytest.fixture
def test_backbone64():
    return PerceptualBackbone.random("test", seed=0, dtype=GRADCHECK_DTYPE)


@pytest.fixture
def fixture_root(tmp_path):
    """One 10-frame 64x64 translating-texture scene with a manifest and style image."""
    return write_fixture_dataset(tmp_path / "fixture", scenes=1, frames=10, size=(64, 64), seed=0)


@pytest.fixture
def make_config(fixture_root, tmp_path):
    """Desk-scale config on the fixture; keyword arguments override any key."""

    def build(**overrides):
        values = {
            "dataset_root": str(fixture_root),
            "style_image_path": str(fixture_root / STYLE_NAME),
            "out_dir": str(tmp_path / "run"),
            "resolution": "64x64",
            "backbone": "test",
            "steps": "1",
            "batch_size": "1",
            "checkpoint_every": "1",
            "log_every": "1",
        }
        values.update({key: str(value) for key, value in overrides.items()})
        return build_train_config(values)

    return build
