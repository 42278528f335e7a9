"""Tests for the attribute stem and the calibrated encoder built on it."""

import numpy as np
import pytest
import torch

from ctxcat.backbone import BackboneConfig, build_encoder, calibrate_group_gains, to_model_input
from ctxcat.exceptions import ConfigError
from ctxcat.glyphs import SHAPE_NAMES
from ctxcat.settings import validate_config
from ctxcat.stem import GROUPS, AttributeStem, calibrated_width, group_slices
from ctxcat.synthgen import render_image

CAL = BackboneConfig(image_size=32, patch_size=8, width=72)
# the lone glyph of a count-one image sits at (13, 13), inside patch (1, 1)
GLYPH_PATCH = 5


def _image(color="red", shape="circle", count="one", texture="plain", seed=0):
    attrs = {"color": color, "shape": shape, "count": count, "texture": texture}
    return render_image(attrs, 32, seed)


def _features(*images):
    stem = AttributeStem(32, 8, 6)
    return stem(to_model_input(np.stack(images)))


@pytest.fixture
def varied_images():
    colors = ("red", "blue", "green", "yellow")
    shapes = ("circle", "square", "plus", "hbar")
    textures = ("plain", "stripes", "checker", "dots")
    counts = ("one", "two", "three")
    return np.stack(
        [
            _image(colors[i % 4], shapes[(i // 2) % 4], counts[i % 3], textures[(i // 3) % 4], seed=i)
            for i in range(12)
        ]
    )


class TestAttributeStem:
    def test_feature_layout(self):
        features = _features(_image())

        assert tuple(features.shape) == (1, 16, sum(s.stop - s.start for s in group_slices().values()))

    @pytest.mark.parametrize("shape", ["circle", "plus", "hbar", "frame"])
    def test_exact_glyph_match_scores_one(self, shape):
        scores = _features(_image(shape=shape))[0, GLYPH_PATCH, group_slices()["shape"]]

        assert int(scores.argmax()) == SHAPE_NAMES.index(shape)
        assert float(scores.max()) == pytest.approx(1.0, abs=1e-5)

    def test_chroma_follows_hue(self):
        features = _features(_image(color="red"), _image(color="cyan"))
        color = group_slices()["color"]

        red, cyan = features[0, GLYPH_PATCH, color], features[1, GLYPH_PATCH, color]
        assert float(red[0]) > 0.5
        assert float(red[1]) == pytest.approx(0.0, abs=1e-6)
        assert float(cyan[0]) < -0.5
        assert torch.all(features[0, 0, color] == 0)

    def test_plain_background_has_no_edges(self):
        texture = _features(_image(texture="plain"))[0, :, group_slices()["texture"]]

        assert torch.all(texture[:, 1:] == 0)

    def test_stripes_have_vertical_edges_only(self):
        texture = _features(_image(texture="stripes"))[0, 0, group_slices()["texture"]]

        # direction (0, 1) step 1, then direction (1, 0) step 2
        assert float(texture[1]) == pytest.approx(0.0, abs=1e-6)
        assert float(texture[5]) > 0.9


class TestCalibratedEncoder:
    def test_needs_one_head_per_group(self):
        with pytest.raises(ConfigError, match="one head per group"):
            validate_config(BackboneConfig, {"heads": 2})

    def test_needs_room_for_the_layout(self):
        with pytest.raises(ConfigError, match=f"width >= {calibrated_width()}"):
            validate_config(BackboneConfig, {"width": 64})

    def test_unknown_gain_group(self):
        with pytest.raises(ConfigError, match="unknown groups"):
            validate_config(BackboneConfig, {"group_gains": {"size": 1.0}})

    def test_random_encoder_has_no_readout(self):
        encoder = build_encoder(BackboneConfig(image_size=16, patch_size=4, width=16, heads=2, init="random"))

        with pytest.raises(ConfigError, match="calibrated"):
            encoder.image_encoder.group_readout(to_model_input(np.zeros((1, 16, 16, 3), dtype=np.uint8)))

    def test_seed_and_glyph_size_are_in_the_digest(self):
        base = build_encoder(CAL)

        assert base.digest == build_encoder(CAL).digest
        assert base.digest != build_encoder(CAL.model_copy(update={"seed": 1})).digest
        assert base.digest != build_encoder(CAL.model_copy(update={"glyph_size": 5})).digest

    def test_class_token_pools_group_features(self):
        model = build_encoder(CAL).image_encoder
        readout = model.group_readout(to_model_input(np.stack([_image(color="red")])))

        assert float(readout["color"][0, 0]) > 0.0
        assert float(readout["color"][0, 1]) == pytest.approx(0.0, abs=1e-5)
        assert set(readout) == set(GROUPS)

    def test_key_aligned_token_mutes_its_group(self):
        model = build_encoder(CAL).image_encoder
        images = to_model_input(np.stack([_image(texture="plain"), _image(texture="stripes")]))
        token = torch.zeros(1, CAL.width)
        plus, minus = model.layout.keys[GROUPS.index("texture")]
        token[0, plus], token[0, minus] = 1.0, -1.0

        open_ = model.group_readout(images)
        muted = model.group_readout(images, token)

        gap_open = float((open_["texture"][0] - open_["texture"][1]).norm())
        gap_muted = float((muted["texture"][0] - muted["texture"][1]).norm())
        assert gap_muted < 0.05 * gap_open
        kept = float(muted["color"].norm() / open_["color"].norm())
        assert 0.85 < kept < 1.0

    def test_gains_balance_the_groups(self, varied_images):
        encoder = build_encoder(CAL)

        gains = calibrate_group_gains(encoder, varied_images)

        assert set(gains) == set(GROUPS)
        readout = encoder.image_encoder.group_readout(to_model_input(varied_images))
        for group, gain in gains.items():
            total = float(readout[group].double().var(dim=0, unbiased=False).sum())
            assert gain**2 * total == pytest.approx(1.0, rel=1e-4)

    def test_gains_reach_the_final_norm(self):
        balanced = build_encoder(CAL.model_copy(update={"group_gains": {"color": 3.0}}))
        weight = balanced.image_encoder.norm.weight

        color_channels = [pair[0] for pair in balanced.image_encoder.layout.group_features("color")]
        shape_channels = [pair[0] for pair in balanced.image_encoder.layout.group_features("shape")]
        assert torch.all(weight[color_channels] == 3.0)
        assert torch.all(weight[shape_channels] == 1.0)
