"""
sisaug.perturb - replace class segments of an image

licence: https://opensource.org/licenses/MIT
"""

import shutil
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .basetypes import derive_seed
from .raster import RasterImage, ClassMask, gaussian_blur, check_dimensions
from .storage import load_image, load_label_map, save_image, pair_files, map_files


class EmptySegmentError(ValueError):
    """Segment statistics requested for an empty mask."""


##############################################################################
# segment statistics

def _masked_values(image, mask):
    """(k, channels) array of the pixels under the mask."""
    return image.data[mask.data]


def segment_mean(values):
    """Per-channel mean of a (k, channels) array, exact on constant segments."""
    values = np.asarray(values, dtype=np.float64)
    if not len(values):
        raise EmptySegmentError('empty segment')
    # offset by the minimum so that constant segments give their value exactly
    low = values.min(axis=0)
    return low + (values - low).mean(axis=0)


def lognormal_parameters(values):
    """Per-channel mean and population deviation of log(1 + intensity)."""
    values = np.asarray(values, dtype=np.float64)
    if not len(values):
        raise EmptySegmentError('empty segment')
    logs = np.log1p(values)
    return logs.mean(axis=0), logs.std(axis=0)


def lognormal_moments(mu, sigma):
    """Mean and standard deviation of exp(z) - 1 for z ~ N(mu, sigma^2)."""
    mu, sigma = np.asarray(mu), np.asarray(sigma)
    mean = np.exp(mu + sigma**2 / 2) - 1
    std = np.sqrt((np.exp(sigma**2) - 1) * np.exp(2*mu + sigma**2))
    return mean, std


##############################################################################
# perturbation schemes

@dataclass(frozen=True)
class Constant:
    """Fill with a fixed grey value."""
    name = 'constant'
    needs_support = False
    c0: float = 128.0

    def __post_init__(self):
        if not 0 <= self.c0 <= 255:
            raise ValueError(f'Constant fill must be in [0, 255], not {self.c0}.')

    def fill(self, image, mask):
        return np.full((mask.count(), image.channels), float(self.c0))


@dataclass(frozen=True)
class Average:
    """Fill with the segment's mean colour."""
    name = 'average'
    needs_support = True

    def fill(self, image, mask):
        values = _masked_values(image, mask)
        return np.broadcast_to(segment_mean(values), values.shape)


@dataclass(frozen=True)
class GaussianBlur:
    """Fill with the blurred image."""
    name = 'blur'
    needs_support = False
    sigma0: float = 25.0

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f'Blur sigma must be positive, not {self.sigma0}.')

    def fill(self, image, mask):
        blurred = gaussian_blur(image, self.sigma0)
        return blurred.data[mask.data]


@dataclass(frozen=True)
class Lognormal:
    """Fill with lognormal noise matching the segment's log-intensity statistics."""
    name = 'lognormal'
    needs_support = True
    seed: int = 0

    def fill(self, image, mask):
        values = _masked_values(image, mask)
        mu, sigma = lognormal_parameters(values)
        logging.debug('Lognormal fill mu=%s sigma=%s', mu.tolist(), sigma.tolist())
        rng = np.random.default_rng(self.seed)
        draws = rng.normal(mu, sigma, size=values.shape)
        return np.clip(np.expm1(draws), 0, 255)


# canonical scheme order
SCHEMES = {
    _scheme.name: _scheme
    for _scheme in (Constant, Average, GaussianBlur, Lognormal)
}
SCHEME_NAMES = tuple(SCHEMES)


def make_scheme(name, *, c0=128.0, sigma0=None, seed=0):
    """Create a perturbation scheme by name."""
    if name == 'constant':
        return Constant(c0)
    if name == 'average':
        return Average()
    if name == 'blur':
        if sigma0 is None:
            raise ValueError('Blur scheme needs sigma0 or a dataset profile.')
        return GaussianBlur(sigma0)
    if name == 'lognormal':
        return Lognormal(seed)
    raise ValueError(f'Unknown perturbation scheme `{name}`; use one of {", ".join(SCHEME_NAMES)}.')


def for_item(scheme, *keys):
    """Scheme with the generator seed derived for one item; non-random schemes unchanged."""
    if isinstance(scheme, Lognormal):
        return replace(scheme, seed=derive_seed(scheme.seed, *keys))
    return scheme


##############################################################################
# masks and composition

def class_mask(label, class_id):
    """Mask of the pixels with the given class id."""
    upper = label.n_classes if label.n_classes is not None else 256
    if not 0 <= class_id < upper or class_id == label.ignore_id:
        raise ValueError(f'Class id {class_id} out of range.')
    return ClassMask(label.data == class_id)


def apply_perturbation(image, mask, scheme, strict=False):
    """
    Replace the masked pixels of an image; unmasked pixels are left as they are.

    strict: raise EmptySegmentError on an empty mask for schemes that need segment statistics
    """
    check_dimensions(image, mask)
    if not mask.count():
        if strict and scheme.needs_support:
            raise EmptySegmentError('empty segment')
        return image
    pixels = image.as_array()
    pixels[mask.data] = scheme.fill(image, mask)
    return RasterImage(pixels)


##############################################################################
# datasets

def perturb_file(image_path, label_path, out_path, class_id, scheme, n_classes=None, ignore_id=255):
    """Perturb one image file; return its manifest entry."""
    image = load_image(image_path)
    label = load_label_map(label_path, n_classes=n_classes, ignore_id=ignore_id)
    check_dimensions(image, label)
    mask = class_mask(label, class_id)
    masked = mask.count()
    if masked:
        save_image(apply_perturbation(image, mask, scheme), out_path)
        status = 'perturbed'
    else:
        shutil.copyfile(image_path, out_path)
        status = 'absent'
    return dict(
        image=Path(out_path).name,
        class_id=class_id,
        scheme=scheme.name,
        masked_pixels=masked,
        status=status,
    )


def perturb_dataset(image_dir, label_dir, class_id, scheme, out_dir, *,
        n_classes=None, ignore_id=255, workers=1):
    """
    Write one perturbed image per input image; images without the class are copied.
    Returns the manifest entries in stem order and a list of (stem, error) pairs.
    """
    pairs = pair_files(image_dir, label_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = [
        (
            image_path, label_path, out_dir / image_path.name, class_id,
            for_item(scheme, class_id, index), n_classes, ignore_id,
        )
        for index, (_, image_path, label_path) in enumerate(pairs)
    ]
    manifest, errors = [], []
    for (stem, _, _), result in zip(pairs, map_files(perturb_file, items, workers)):
        if isinstance(result, Exception):
            logging.error('%s: %s', stem, result)
            errors.append((stem, str(result)))
        else:
            manifest.append(result)
    return manifest, errors
