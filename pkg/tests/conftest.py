"""Shared fixtures: a tiny generated dataset with its frozen encoder."""

import pytest

from ctxcat.backbone import BackboneConfig
from ctxcat.synthgen import GenConfig, build_synthetic, write_bundle
from ctxcat.training import TrainConfig

TINY_GEN = dict(
    image_size=16,
    contexts={"color": 4, "shape": 3},
    n_images=48,
    probe_per_class=2,
    labeled_per_class=3,
    known_fraction=0.5,
    vocab_multiplier=2,
    seed=0,
    backbone=BackboneConfig(image_size=16, patch_size=4, width=72),
)


@pytest.fixture
def train_config():
    """Factory for fast training configs."""

    def make(**overrides):
        values = dict(epochs=2, batch_size=16, n_tokens=4, kmeans_n_init=2, seed=0)
        values.update(overrides)
        return TrainConfig(**values)

    return make


@pytest.fixture(scope="session")
def tiny_bundle():
    return build_synthetic(GenConfig(**TINY_GEN))


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory, tiny_bundle):
    return write_bundle(tiny_bundle, tmp_path_factory.mktemp("datasets") / "d0")


@pytest.fixture
def tiny_ds(tiny_bundle):
    return tiny_bundle.dataset


@pytest.fixture
def tiny_encoder(tiny_bundle):
    return tiny_bundle.encoder
