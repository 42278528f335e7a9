"""Tests for gradient-weighted attention rollout."""

import numpy as np
import pytest
import torch
from PIL import Image

from ctxcat.backbone import ContextTokens
from ctxcat.exceptions import LexiconLookupError
from ctxcat.saliency import RelevanceMap, grad_rollout, relevance_map, write_pgm, write_weights


def _saturating(size, column, layers=3):
    attention = torch.zeros(2, size, size)
    attention[:, :, column] = 1.0
    return [attention.clone() for _ in range(layers)], [torch.ones(2, size, size) for _ in range(layers)]


class TestGradRollout:
    def test_uniform_attention_gives_uniform_map(self):
        size = 1 + 16
        attentions = [torch.full((2, size, size), 1.0 / size) for _ in range(3)]
        gradients = [torch.ones(2, size, size) for _ in range(3)]

        weights = grad_rollout(attentions, gradients, 16)

        assert weights == pytest.approx(np.full(16, 1 / 16))

    def test_saturated_patch_takes_the_mass(self):
        attentions, gradients = _saturating(1 + 16, column=6)

        weights = grad_rollout(attentions, gradients, 16)

        assert weights[5] >= 0.9
        assert weights.sum() == pytest.approx(1.0)

    def test_context_columns_are_dropped(self):
        attentions, gradients = _saturating(1 + 4 + 3, column=2)

        weights = grad_rollout(attentions, gradients, 4)

        assert weights.shape == (4,)
        assert int(np.argmax(weights)) == 1

    def test_negative_gradients_fall_back_to_uniform_mass(self):
        size = 1 + 4
        attentions = [torch.full((1, size, size), 1.0 / size)]
        gradients = [-torch.ones(1, size, size)]

        weights = grad_rollout(attentions, gradients, 4)

        assert np.all(weights >= 0)
        assert weights.sum() == pytest.approx(1.0)


class TestRelevanceMap:
    @pytest.fixture
    def image(self, tiny_ds):
        return tiny_ds.pixels([tiny_ds.item_ids[0]])[0]

    @pytest.fixture
    def target(self, tiny_ds):
        return tiny_ds.spec("color").known_classes[0]

    def test_weights_form_a_distribution(self, image, target, tiny_encoder):
        relevance = relevance_map(image, None, target, tiny_encoder)

        assert relevance.grid == (tiny_encoder.config.grid, tiny_encoder.config.grid)
        assert np.all(relevance.weights >= 0)
        assert relevance.weights.sum() == pytest.approx(1.0, abs=1e-6)

    def test_deterministic(self, image, target, tiny_encoder):
        first = relevance_map(image, None, target, tiny_encoder)
        second = relevance_map(image, None, target, tiny_encoder)

        assert np.array_equal(first.weights, second.weights)

    def test_tokens_change_the_map(self, image, target, tiny_encoder):
        tokens = ContextTokens("color", np.random.default_rng(3).normal(0.0, 1.0, size=(4, tiny_encoder.dim)))

        plain = relevance_map(image, None, target, tiny_encoder)
        steered = relevance_map(image, tokens, target, tiny_encoder)

        assert np.abs(plain.weights - steered.weights).sum() > 1e-6

    def test_empty_target(self, image, tiny_encoder):
        relevance = relevance_map(image, None, "", tiny_encoder)

        assert relevance.weights.sum() == pytest.approx(1.0, abs=1e-6)

    def test_unknown_target(self, image, tiny_encoder):
        with pytest.raises(LexiconLookupError):
            relevance_map(image, None, "no-such-class", tiny_encoder)

    def test_backbone_untouched(self, image, target, tiny_encoder):
        before = tiny_encoder.verify()

        relevance_map(image, None, target, tiny_encoder)

        assert tiny_encoder.verify() == before


class TestOutputs:
    def test_pgm_upsampled_and_scaled(self, tmp_path):
        weights = np.array([[0.1, 0.2], [0.3, 0.4]])

        path = write_pgm(RelevanceMap(weights), tmp_path / "heatmap.pgm", image_size=8)

        assert path.read_bytes().startswith(b"P5")
        with Image.open(path) as img:
            assert img.size == (8, 8)
            pixels = np.asarray(img)
        assert pixels.max() == 255
        assert pixels[0, 0] == round(0.1 / 0.4 * 255)
        assert pixels[7, 7] == 255

    def test_weights_text(self, tmp_path):
        weights = np.array([[0.25, 0.25], [0.5, 0.0]])

        path = write_weights(RelevanceMap(weights), tmp_path / "weights.txt")

        rows = path.read_text(encoding="utf-8").splitlines()
        assert len(rows) == 2
        assert [float(v) for v in rows[1].split()] == [0.5, 0.0]
