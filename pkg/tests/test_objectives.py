"""
sisaug test suite
loss term tests
"""

import unittest

import numpy as np

from sisaug import (
    EdgeMap, LossWeights, edge_loss, adversarial_loss, feature_matching_loss,
    perceptual_loss, total_generator_loss, DimensionError,
)
from sisaug.objectives import edge_loss_gradient, BASELINE_PROFILES, VGG_LAYER_WEIGHTS

from .base import BaseTester


class TestEdgeLoss(BaseTester):

    def test_identical(self):
        edge = EdgeMap(np.random.default_rng(0).random((6, 6)))
        self.assertEqual(edge_loss(edge, edge), 0)

    def test_ones_zeros(self):
        self.assertEqual(edge_loss(EdgeMap.blank(2, 2, fill=1), EdgeMap.blank(2, 2)), 2.0)

    def test_mean_squared(self):
        self.assertEqual(
            edge_loss(EdgeMap.blank(2, 2, fill=1), EdgeMap.blank(2, 2), mean_squared=True), 1.0
        )

    def test_homogeneous(self):
        """Scaling the difference scales the loss."""
        rng = np.random.default_rng(1)
        real = rng.uniform(0.4, 0.6, size=(5, 5))
        diff = rng.uniform(-0.1, 0.1, size=(5, 5))
        base = edge_loss(EdgeMap(real), EdgeMap(real + diff))
        for scale in (-3, 0.5, 2):
            scaled = edge_loss(EdgeMap(real), EdgeMap(real + scale * diff))
            self.assertAlmostEqual(scaled, abs(scale) * base)

    def test_gradient(self):
        """Analytic gradient matches central differences."""
        rng = np.random.default_rng(2)
        real = rng.uniform(0.2, 0.8, size=(4, 4))
        fake = rng.uniform(0.2, 0.8, size=(4, 4))
        gradient = edge_loss_gradient(EdgeMap(real), EdgeMap(fake))
        h = 1e-6
        for u, v in ((0, 0), (1, 2), (3, 3)):
            plus, minus = fake.copy(), fake.copy()
            plus[u, v] += h
            minus[u, v] -= h
            numeric = (
                edge_loss(EdgeMap(real), EdgeMap(plus)) - edge_loss(EdgeMap(real), EdgeMap(minus))
            ) / (2 * h)
            self.assertAlmostEqual(numeric, gradient[u, v], delta=1e-4)

    def test_gradient_at_zero(self):
        edge = EdgeMap.blank(3, 3, fill=0.5)
        self.assertEqual(np.abs(edge_loss_gradient(edge, edge)).max(), 0)

    def test_dimensions(self):
        with self.assertRaises(DimensionError):
            edge_loss(EdgeMap.blank(2, 2), EdgeMap.blank(3, 2))


class TestAdversarial(BaseTester):

    def test_hinge_margins(self):
        """Hinge discriminator loss is 0 when both margins are met."""
        self.assertEqual(
            adversarial_loss(np.ones(8), -np.ones(8), side='discriminator', mode='hinge'), 0
        )

    def test_hinge_values(self):
        loss = adversarial_loss(
            np.full(4, 0.5), np.full(4, -0.25), side='discriminator', mode='hinge'
        )
        self.assertAlmostEqual(loss, 1.25)
        self.assertAlmostEqual(adversarial_loss(None, [0.5, 1.5], mode='hinge'), -1.0)

    def test_lsgan(self):
        self.assertEqual(adversarial_loss(None, np.ones((2, 3)), mode='lsgan'), 0)
        self.assertEqual(
            adversarial_loss(np.ones(3), np.zeros(3), side='discriminator', mode='lsgan'), 0
        )
        self.assertAlmostEqual(adversarial_loss(None, np.zeros(3), mode='lsgan'), 0.5)

    def test_log_logits(self):
        """Log loss on logits equals log loss on the sigmoid probabilities."""
        logits = np.array([-2.0, 0.0, 3.0])
        probabilities = 1 / (1 + np.exp(-logits))
        for side in ('generator', 'discriminator'):
            self.assertAlmostEqual(
                adversarial_loss(logits, logits, side=side, mode='log'),
                adversarial_loss(probabilities, probabilities, side=side, mode='log', probabilities=True),
            )
        self.assertAlmostEqual(adversarial_loss(None, [0.0], mode='log'), np.log(2))

    def test_log_clamped(self):
        """Probabilities of exactly 0 or 1 give a finite loss."""
        loss = adversarial_loss([0.0], [1.0], side='discriminator', mode='log', probabilities=True)
        self.assertTrue(np.isfinite(loss))

    def test_permutation(self):
        rng = np.random.default_rng(3)
        d_real, d_fake = rng.normal(size=10), rng.normal(size=10)
        for mode in ('log', 'hinge', 'lsgan'):
            self.assertAlmostEqual(
                adversarial_loss(d_real, d_fake, side='discriminator', mode=mode),
                adversarial_loss(d_real[::-1], d_fake[::-1], side='discriminator', mode=mode),
            )

    def test_errors(self):
        with self.assertRaises(ValueError):
            adversarial_loss(None, [0.0], side='discriminator')
        with self.assertRaises(ValueError):
            adversarial_loss(None, [np.inf])
        with self.assertRaises(ValueError):
            adversarial_loss(None, [0.0], mode='wasserstein')
        with self.assertRaises(ValueError):
            adversarial_loss(None, [0.0], side='referee')


class TestFeatureLosses(BaseTester):

    def test_feature_matching(self):
        self.assertEqual(feature_matching_loss([np.ones(3)], [np.ones(3)]), 0)
        self.assertEqual(feature_matching_loss([np.ones((2, 2))], [np.zeros((2, 2))]), 1.0)
        loss = feature_matching_loss(
            [np.full(4, 0.2), np.full((2, 3), 0.6)], [np.zeros(4), np.zeros((2, 3))]
        )
        self.assertAlmostEqual(loss, 0.4)

    def test_perceptual(self):
        stack = [np.ones(3), np.zeros((2, 2))]
        self.assertEqual(perceptual_loss(stack, stack, [1, 1]), 0)
        self.assertEqual(perceptual_loss([np.ones(3)], [np.zeros(3)], [0]), 0)
        self.assertAlmostEqual(perceptual_loss([np.full(5, 0.4)], [np.zeros(5)], [0.5]), 0.2)

    def test_perceptual_default_weights(self):
        """Default layer weights are for five layers."""
        real = [np.ones(2)] * 5
        fake = [np.zeros(2)] * 5
        self.assertAlmostEqual(perceptual_loss(real, fake), sum(VGG_LAYER_WEIGHTS))

    def test_mismatch(self):
        with self.assertRaises(ValueError):
            feature_matching_loss([np.ones(3)], [np.ones(3), np.ones(3)])
        with self.assertRaises(ValueError):
            feature_matching_loss([np.ones(3)], [np.ones(4)])
        with self.assertRaises(ValueError):
            perceptual_loss([np.ones(3)], [np.ones(3)], [1, 1])


class TestTotal(BaseTester):

    def test_zero(self):
        self.assertEqual(total_generator_loss(0, 0, 0, 0), 0)

    def test_weighted_sum(self):
        self.assertAlmostEqual(total_generator_loss(1, 0.5, 0.2, 0.1, LossWeights(10, 10, 10)), 9)

    def test_linear(self):
        """The total is linear in each term."""
        weights = LossWeights(20, 10, 5)
        base = total_generator_loss(1, 1, 1, 1, weights)
        self.assertAlmostEqual(total_generator_loss(1, 2, 1, 1, weights) - base, 20)
        self.assertAlmostEqual(total_generator_loss(1, 1, 1, 3, weights) - base, 10)

    def test_weights(self):
        self.assertEqual(LossWeights(), (10, 10, 10))
        with self.assertRaises(ValueError):
            LossWeights(-1, 10, 10)

    def test_profiles(self):
        self.assertEqual(BASELINE_PROFILES['spade'].weights[:2], (10, 10))
        self.assertEqual(BASELINE_PROFILES['cc-fpse'].weights[:2], (20, 10))
        self.assertEqual(BASELINE_PROFILES['pix2pixhd'].mode, 'lsgan')


if __name__ == '__main__':
    unittest.main()
