"""
sisaug test suite
perturbation tests
"""

import unittest

import numpy as np

from sisaug import (
    RasterImage, LabelMap, ClassMask, Constant, Average, GaussianBlur, Lognormal,
    class_mask, apply_perturbation, perturb_dataset, save_image, save_label_map, load_image,
    load_label_map,
)
from sisaug.perturb import (
    EmptySegmentError, make_scheme, for_item, lognormal_parameters, lognormal_moments,
    segment_mean, SCHEME_NAMES,
)
from sisaug.storage import quantise
from sisaug.synthetic import write_synthetic_dataset, LABELS, IMAGES

from .base import BaseTester, random_image


ALL_SCHEMES = (Constant(128), Average(), GaussianBlur(2.0), Lognormal(seed=1))


class TestMasks(BaseTester):

    def test_constant_map(self):
        mask = class_mask(LabelMap.blank(4, 4, fill=3), 3)
        self.assertEqual(mask.count(), 16)

    def test_absent(self):
        mask = class_mask(LabelMap.blank(4, 4, fill=3), 2)
        self.assertEqual(mask.count(), 0)

    def test_layout(self):
        """Mask is set exactly where the label equals the class id."""
        ids = np.array([[0, 1, 2, 1], [1, 1, 0, 255], [2, 2, 2, 1], [0, 0, 1, 1]])
        label = LabelMap(ids, n_classes=3)
        mask = class_mask(label, 1)
        for u in range(4):
            for v in range(4):
                self.assertEqual(bool(mask.data[u, v]), ids[u, v] == 1)

    def test_out_of_range(self):
        with self.assertRaises(ValueError):
            class_mask(LabelMap.blank(2, 2, n_classes=3), 3)
        with self.assertRaises(ValueError):
            class_mask(LabelMap.blank(2, 2), 255)


class TestSchemes(BaseTester):

    def test_empty_mask(self):
        """An empty mask leaves the image unchanged."""
        image = random_image(np.random.default_rng(0))
        mask = ClassMask.blank(8, 8, fill=False)
        for scheme in ALL_SCHEMES:
            self.assertEqual(apply_perturbation(image, mask, scheme), image)

    def test_empty_mask_strict(self):
        """Schemes that need segment statistics refuse an empty mask when strict."""
        image = random_image(np.random.default_rng(0))
        mask = ClassMask.blank(8, 8, fill=False)
        for scheme in (Average(), Lognormal()):
            with self.assertRaises(EmptySegmentError) as context:
                apply_perturbation(image, mask, scheme, strict=True)
            self.assertEqual(str(context.exception), 'empty segment')
        apply_perturbation(image, mask, Constant(), strict=True)

    def test_average(self):
        """Average replaces the segment with its mean."""
        image = RasterImage([[10.0, 20.0], [30.0, 40.0]])
        mask = ClassMask([[True, True], [False, False]])
        result = apply_perturbation(image, mask, Average())
        np.testing.assert_array_equal(result.data[..., 0], [[15, 15], [30, 40]])

    def test_constant(self):
        image = random_image(np.random.default_rng(1))
        mask = ClassMask.blank(8, 8, fill=True)
        result = apply_perturbation(image, mask, Constant(c0=0))
        self.assertEqual(result.data.max(), 0)

    def test_outside_preserved(self):
        """Pixels outside the mask are unchanged by every scheme."""
        rng = np.random.default_rng(2)
        image = random_image(rng, size=16)
        mask = ClassMask(rng.random((16, 16)) < 0.3)
        for scheme in ALL_SCHEMES:
            result = apply_perturbation(image, mask, scheme)
            np.testing.assert_array_equal(
                result.data[~mask.data], image.data[~mask.data], err_msg=scheme.name
            )

    def test_uniform_fill(self):
        """Constant and Average make the segment constant per channel."""
        rng = np.random.default_rng(3)
        image = random_image(rng, size=16)
        mask = ClassMask(rng.random((16, 16)) < 0.5)
        for scheme in (Constant(40), Average()):
            filled = apply_perturbation(image, mask, scheme).data[mask.data]
            self.assertTrue(np.all(filled == filled[0]), scheme.name)

    def test_average_idempotent(self):
        rng = np.random.default_rng(4)
        image = random_image(rng, size=16)
        mask = ClassMask(rng.random((16, 16)) < 0.5)
        once = apply_perturbation(image, mask, Average())
        self.assertEqual(apply_perturbation(once, mask, Average()), once)

    def test_blur_range(self):
        """Blurred segment stays within the per-channel input range."""
        rng = np.random.default_rng(5)
        image = random_image(rng, size=16)
        mask = ClassMask(rng.random((16, 16)) < 0.5)
        filled = apply_perturbation(image, mask, GaussianBlur(25.0)).data[mask.data]
        self.assertTrue(np.all(filled >= image.data.min(axis=(0, 1))))
        self.assertTrue(np.all(filled <= image.data.max(axis=(0, 1))))

    def test_lognormal_deterministic(self):
        rng = np.random.default_rng(6)
        image = random_image(rng, size=16)
        mask = ClassMask(rng.random((16, 16)) < 0.5)
        first = apply_perturbation(image, mask, Lognormal(seed=3))
        self.assertEqual(first, apply_perturbation(image, mask, Lognormal(seed=3)))
        self.assertNotEqual(first, apply_perturbation(image, mask, Lognormal(seed=4)))
        self.assertTrue(np.all((first.data >= 0) & (first.data <= 255)))

    def test_lognormal_moments(self):
        """Lognormal fill matches the fitted distribution's mean and deviation."""
        rng = np.random.default_rng(7)
        pixels = np.expm1(rng.normal(3.0, 0.3, size=(100, 100)))
        image = RasterImage(pixels)
        mask = ClassMask.blank(100, 100, fill=True)
        mu, sigma = lognormal_parameters(image.data[mask.data])
        mean, std = lognormal_moments(mu, sigma)
        filled = apply_perturbation(image, mask, Lognormal(seed=8)).data[mask.data]
        self.assertAlmostEqual(filled.mean() / mean[0], 1, delta=0.05)
        self.assertAlmostEqual(filled.std() / std[0], 1, delta=0.05)

    def test_segment_mean_constant(self):
        """The mean of a constant segment is exact."""
        values = np.full((7, 3), 0.1)
        np.testing.assert_array_equal(segment_mean(values), [0.1, 0.1, 0.1])

    def test_make_scheme(self):
        self.assertEqual(SCHEME_NAMES, ('constant', 'average', 'blur', 'lognormal'))
        self.assertEqual(make_scheme('constant', c0=10), Constant(10))
        self.assertEqual(make_scheme('blur', sigma0=3.0), GaussianBlur(3.0))
        with self.assertRaises(ValueError):
            make_scheme('blur')
        with self.assertRaises(ValueError):
            make_scheme('sepia')
        with self.assertRaises(ValueError):
            Constant(300)

    def test_for_item(self):
        """Per-item seeds differ between items; other schemes are unchanged."""
        self.assertNotEqual(for_item(Lognormal(1), 0, 0), for_item(Lognormal(1), 0, 1))
        self.assertEqual(for_item(Average(), 0, 1), Average())


class TestDataset(BaseTester):

    def test_counts(self):
        """Manifest pixel counts equal the mask sizes."""
        dirs = write_synthetic_dataset(self.temp_path / 'synth', n_images=3, size=24)
        manifest, errors = perturb_dataset(
            dirs[IMAGES], dirs[LABELS], 2, Constant(0), self.temp_path / 'out', n_classes=3,
        )
        self.assertEqual(errors, [])
        self.assertEqual(len(manifest), 3)
        for entry in manifest:
            label_path = dirs[LABELS] / entry['image']
            output = load_image(self.temp_path / 'out' / entry['image'])
            label = load_label_map(label_path, n_classes=3)
            self.assertEqual(entry['masked_pixels'], int((label.data == 2).sum()))
            self.assertEqual(entry['scheme'], 'constant')
            if entry['masked_pixels']:
                self.assertEqual(entry['status'], 'perturbed')
                self.assertTrue(np.all(output.data[label.data == 2] == 0))

    def test_absent(self):
        """Images without the class are copied unchanged."""
        for name in ('images', 'labels'):
            (self.temp_path / name).mkdir()
        rng = np.random.default_rng(9)
        for index in range(2):
            save_image(random_image(rng), self.temp_path / 'images' / f'{index}.png')
            save_label_map(LabelMap.blank(8, 8), self.temp_path / 'labels' / f'{index}.png')
        manifest, errors = perturb_dataset(
            self.temp_path / 'images', self.temp_path / 'labels', 1, Average(),
            self.temp_path / 'out', n_classes=2,
        )
        self.assertEqual(errors, [])
        self.assertEqual([_e['status'] for _e in manifest], ['absent', 'absent'])
        for index in range(2):
            self.assertEqual(
                (self.temp_path / 'out' / f'{index}.png').read_bytes(),
                (self.temp_path / 'images' / f'{index}.png').read_bytes(),
            )

    def test_single_image(self):
        """Perturbing a one-image dataset equals perturbing the image directly."""
        for name in ('images', 'labels'):
            (self.temp_path / name).mkdir()
        rng = np.random.default_rng(10)
        image = random_image(rng, size=12)
        label = LabelMap(rng.integers(0, 2, size=(12, 12)), n_classes=2)
        save_image(image, self.temp_path / 'images' / 'a.png')
        save_label_map(label, self.temp_path / 'labels' / 'a.png')
        perturb_dataset(
            self.temp_path / 'images', self.temp_path / 'labels', 1, GaussianBlur(2.0),
            self.temp_path / 'out', n_classes=2,
        )
        expected = apply_perturbation(image, class_mask(label, 1), GaussianBlur(2.0))
        output = load_image(self.temp_path / 'out' / 'a.png')
        np.testing.assert_array_equal(output.data, quantise(expected.data))

    def test_bad_file(self):
        """A failing file is reported without stopping the others."""
        for name in ('images', 'labels'):
            (self.temp_path / name).mkdir()
        rng = np.random.default_rng(11)
        save_image(random_image(rng), self.temp_path / 'images' / 'a.png')
        save_label_map(LabelMap.blank(8, 8), self.temp_path / 'labels' / 'a.png')
        save_image(random_image(rng), self.temp_path / 'images' / 'b.png')
        save_label_map(LabelMap.blank(4, 4), self.temp_path / 'labels' / 'b.png')
        manifest, errors = perturb_dataset(
            self.temp_path / 'images', self.temp_path / 'labels', 0, Constant(),
            self.temp_path / 'out', n_classes=2,
        )
        self.assertEqual(len(manifest), 1)
        self.assertEqual([_e[0] for _e in errors], ['b'])


if __name__ == '__main__':
    unittest.main()
