"""Tests for the contrastive and text-guidance objectives."""

import math

import numpy as np
import pytest
import torch

from ctxcat.backbone import BackboneConfig, Lexicon, build_encoder
from ctxcat.exceptions import ConfigError, LexiconLookupError, LossUndefinedError
from ctxcat.objectives import (
    LossConfig,
    OakBatch,
    gcd_loss,
    lexicon_targets,
    oak_loss,
    oak_loss_terms,
    self_con_loss,
    sup_con_loss,
    text_guidance_loss,
)
from ctxcat.settings import validate_config


def _unit(rows):
    rows = torch.as_tensor(rows, dtype=torch.float64)
    return rows / rows.norm(dim=1, keepdim=True)


def _random_batch(n=6, d=5, seed=0):
    generator = torch.Generator().manual_seed(seed)
    views = _unit(torch.randn(2 * n, d, generator=generator, dtype=torch.float64))
    labeled = torch.tensor([True, True, True, True, False, False][:n])
    class_ids = torch.tensor([0, 0, 1, 1, -1, -1][:n])
    targets = torch.tensor([0, 0, 1, 1, 2, -1][:n])
    text = _unit(torch.randn(3, d, generator=generator, dtype=torch.float64))
    return OakBatch(views=views, labeled=labeled, class_ids=class_ids, targets=targets, text_matrix=text)


class TestSelfCon:
    def test_identical_embeddings(self):
        views = torch.ones(4, 2, dtype=torch.float64) / math.sqrt(2)

        assert self_con_loss(views, tau=1.0).item() == pytest.approx(math.log(3))

    def test_orthogonal_pairs(self):
        views = torch.tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)

        assert self_con_loss(views, tau=1.0).item() == pytest.approx(0.5514, abs=1e-4)

    def test_lower_temperature_sharpens(self):
        views = torch.tensor([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)

        assert self_con_loss(views, tau=0.1).item() < self_con_loss(views, tau=1.0).item()

    def test_needs_two_items(self):
        with pytest.raises(LossUndefinedError):
            self_con_loss(torch.ones(2, 2))

    def test_explicit_pairing(self):
        views = _random_batch().views
        n = views.shape[0] // 2
        pairing = list(range(n, 2 * n)) + list(range(n))

        assert self_con_loss(views, pairing=pairing).item() == pytest.approx(self_con_loss(views).item())


class TestSupCon:
    def test_identical_same_label(self):
        embeddings = torch.ones(3, 2, dtype=torch.float64) / math.sqrt(2)

        assert sup_con_loss(embeddings, ["a", "a", "a"]).item() == pytest.approx(math.log(2))

    def test_singletons_are_skipped(self):
        embeddings = _unit([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0]])

        sim = embeddings @ embeddings.T
        anchor0 = -(sim[0, 1] - torch.logsumexp(sim[0, [1, 2]], dim=0))
        anchor1 = -(sim[1, 0] - torch.logsumexp(sim[1, [0, 2]], dim=0))

        value = sup_con_loss(embeddings, ["a", "a", "b"])

        assert value.item() == pytest.approx(((anchor0 + anchor1) / 2).item())

    def test_no_positive_pair(self):
        with pytest.raises(LossUndefinedError):
            sup_con_loss(_unit([[1.0, 0.0], [0.0, 1.0]]), ["a", "b"])


class TestGcd:
    def test_mixes_both_terms(self):
        batch = _random_batch()
        cfg = LossConfig(lambda_balance=0.35)
        n = batch.n_items
        mask = batch.labeled
        sup = sup_con_loss(
            torch.cat([batch.views[:n][mask], batch.views[n:][mask]]),
            torch.cat([batch.class_ids[mask], batch.class_ids[mask]]),
        )

        expected = 0.65 * self_con_loss(batch.views) + 0.35 * sup

        assert gcd_loss(batch, cfg).item() == pytest.approx(expected.item())

    def test_zero_lambda_skips_supervision(self):
        batch = _random_batch()
        batch.labeled = torch.zeros(6, dtype=torch.bool)

        value = gcd_loss(batch, LossConfig(lambda_balance=0.0))

        assert value.item() == pytest.approx(self_con_loss(batch.views).item())


class TestTextGuidance:
    def test_aligned_embedding(self):
        value = text_guidance_loss(
            torch.tensor([[1.0, 0.0]], dtype=torch.float64),
            torch.tensor([0]),
            torch.eye(2, dtype=torch.float64),
            torch.tensor([True]),
            LossConfig(),
        )

        assert value.item() == pytest.approx(0.3133, abs=1e-4)

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_equidistant_embedding(self, k):
        embedding = torch.zeros(1, k + 1, dtype=torch.float64)
        embedding[0, k] = 1.0
        text = torch.eye(k + 1, dtype=torch.float64)[:k]

        value = text_guidance_loss(embedding, torch.tensor([1]), text, torch.tensor([False]), LossConfig())

        assert value.item() == pytest.approx(math.log(k))

    def test_pools_are_weighted_separately(self):
        embeddings = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        text = torch.eye(2, dtype=torch.float64)
        targets = torch.tensor([0, 0])
        labeled = torch.tensor([True, False])
        aligned = math.log(math.e + 1) - 1
        crossed = math.log(math.e + 1)

        value = text_guidance_loss(
            embeddings, targets, text, labeled, LossConfig(lambda_text_labeled=1.0, lambda_text_unlabeled=0.5)
        )

        assert value.item() == pytest.approx(aligned + 0.5 * crossed)

    def test_missing_targets_are_ignored(self):
        value = text_guidance_loss(
            torch.tensor([[1.0, 0.0]], dtype=torch.float64),
            torch.tensor([-1]),
            torch.eye(2, dtype=torch.float64),
            torch.tensor([False]),
            LossConfig(),
        )

        assert value.item() == 0.0

    def test_lexicon_targets(self):
        lexicon = Lexicon(("red", "blue"), np.eye(2))

        assert lexicon_targets(["blue", None, "red"], lexicon).tolist() == [1, -1, 0]
        with pytest.raises(LexiconLookupError):
            lexicon_targets(["green"], lexicon)


class TestOakLoss:
    def test_total_is_gcd_plus_text(self):
        batch = _random_batch()
        terms = oak_loss_terms(batch, LossConfig())

        assert terms.total.item() == pytest.approx(terms.gcd.item() + terms.text.item())
        assert terms.text.item() > 0

    def test_text_off_matches_gcd(self):
        batch = _random_batch()
        cfg = LossConfig(lambda_text_labeled=0.0, lambda_text_unlabeled=0.0)

        assert oak_loss(batch, cfg).item() == pytest.approx(gcd_loss(batch, cfg).item())

    def test_gradient_matches_finite_differences(self):
        batch = _random_batch(seed=3)
        cfg = LossConfig()
        views = batch.views.clone().requires_grad_(True)
        batch.views = views
        oak_loss(batch, cfg).backward()
        analytic = views.grad.clone()

        eps = 1e-6
        numeric = torch.zeros_like(analytic)
        base = views.detach()
        for i in range(base.shape[0]):
            for j in range(base.shape[1]):
                plus, minus = base.clone(), base.clone()
                plus[i, j] += eps
                minus[i, j] -= eps
                batch.views = plus
                high = oak_loss(batch, cfg).item()
                batch.views = minus
                low = oak_loss(batch, cfg).item()
                numeric[i, j] = (high - low) / (2 * eps)

        assert torch.allclose(analytic, numeric, atol=1e-6, rtol=1e-4)


class TestLossConfig:
    def test_defaults(self):
        cfg = LossConfig()

        assert cfg.lambda_balance == 0.35
        assert cfg.tau_selfcon == 1.0
        assert cfg.uses_text

    @pytest.mark.parametrize("field", ["lambda_balance", "tau_selfcon", "logit_scale_text"])
    def test_rejects_out_of_range(self, field):
        with pytest.raises(ConfigError):
            validate_config(LossConfig, {field: -1.0})

    def test_rejects_nan(self):
        with pytest.raises(ConfigError):
            validate_config(LossConfig, {"tau_selfcon": float("nan")})


class TestTokenGradient:
    """oak_loss differentiated through the frozen encoder into the context tokens."""

    BACKBONES = {
        "random": BackboneConfig(image_size=16, patch_size=4, depth=2, width=16, heads=2, init="random"),
        "calibrated": BackboneConfig(image_size=16, patch_size=4, width=72),
    }

    @staticmethod
    def _loss(model, images, tokens, text):
        batch = OakBatch(
            views=model(images, tokens),
            labeled=torch.tensor([True, False]),
            class_ids=torch.tensor([0, -1]),
            targets=torch.tensor([0, 2]),
            text_matrix=text,
        )
        return oak_loss(batch, LossConfig())

    @pytest.mark.parametrize(
        "backbone, seed",
        [("random", seed) for seed in range(10)] + [("calibrated", seed) for seed in range(2)],
    )
    def test_matches_central_differences(self, backbone, seed):
        cfg = self.BACKBONES[backbone]
        model = build_encoder(cfg).image_encoder.double()
        generator = torch.Generator().manual_seed(seed)
        # two views of two images
        images = torch.rand(4, 3, 16, 16, generator=generator, dtype=torch.float64) * 2.0 - 1.0
        text = _unit(torch.randn(3, cfg.width, generator=generator, dtype=torch.float64))
        tokens = torch.randn(2, cfg.width, generator=generator, dtype=torch.float64).requires_grad_(True)

        self._loss(model, images, tokens, text).backward()
        analytic = tokens.grad.clone()

        step = 1e-3
        numeric = torch.zeros_like(analytic)
        base = tokens.detach()
        with torch.no_grad():
            for i in range(base.shape[0]):
                for j in range(base.shape[1]):
                    plus, minus = base.clone(), base.clone()
                    plus[i, j] += step
                    minus[i, j] -= step
                    high = self._loss(model, images, plus, text).item()
                    low = self._loss(model, images, minus, text).item()
                    numeric[i, j] = (high - low) / (2 * step)

        assert float(analytic.norm()) > 0.0
        error = float((analytic - numeric).norm() / max(analytic.norm(), numeric.norm()))
        assert error <= 1e-4
