"""
sisaug.raster - immutable pixel grids, blur and label boundaries

licence: https://opensource.org/licenses/MIT
"""

import logging
from math import ceil

import numpy as np
from scipy.ndimage import correlate1d

from .constants import IGNORE_ID


class DimensionError(ValueError):
    """Grids of different size where equal size is required."""


def check_dimensions(*grids):
    """Raise DimensionError unless all grids have the same width and height."""
    sizes = set((_g.height, _g.width) for _g in grids)
    if len(sizes) > 1:
        raise DimensionError(
            'Dimensions do not match: '
            + ', '.join(f'{_w}x{_h}' for _h, _w in sorted(sizes))
        )


def _frozen(array):
    """Return array that can't be written to."""
    array.setflags(write=False)
    return array


# immutable pixel grid

class Grid:
    """Pixel grid, row-major."""

    _dtype = np.float64

    def __init__(self, pixels=()):
        """Create grid from nested sequence or array (rows first)."""
        if isinstance(pixels, Grid):
            pixels = pixels._pixels
        # always copy so the caller can't modify us through their array
        self._pixels = _frozen(np.array(pixels, dtype=self._dtype))
        if self._pixels.ndim < 2:
            raise DimensionError(
                f'{type(self).__name__} needs a 2D grid, not shape {self._pixels.shape}.'
            )
        self._validate()

    def _validate(self):
        """Check value invariants."""

    def _attrs(self):
        """Non-pixel attributes, passed on to modified copies."""
        return {}

    def modify(self, pixels):
        """Create a grid of the same type and attributes with other pixels."""
        return type(self)(pixels, **self._attrs())

    @property
    def width(self):
        """Grid width in pixels."""
        return self._pixels.shape[1]

    @property
    def height(self):
        """Grid height in pixels."""
        return self._pixels.shape[0]

    @property
    def data(self):
        """Read-only view of the pixel array."""
        return self._pixels

    def as_array(self):
        """Writable copy of the pixel array."""
        return self._pixels.copy()

    def transpose(self):
        """Swap rows and columns."""
        return self.modify(np.swapaxes(self._pixels, 0, 1))

    def __eq__(self, other):
        """Bit-exact equality of pixels and attributes."""
        if type(other) is not type(self):
            return NotImplemented
        return (
            self._attrs() == other._attrs()
            and self._pixels.shape == other._pixels.shape
            and bool(np.array_equal(self._pixels, other._pixels))
        )

    __hash__ = None

    def __repr__(self):
        attrs = ''.join(f', {_k}={_v!r}' for _k, _v in self._attrs().items())
        return f'{type(self).__name__}(width={self.width}, height={self.height}{attrs})'

    @classmethod
    def blank(cls, width, height, fill=0, **kwargs):
        """Create a constant grid."""
        return cls(np.full((height, width), fill, dtype=cls._dtype), **kwargs)


class RasterImage(Grid):
    """Image with 1 or 3 channels of real intensities in [0, 255]."""

    def _validate(self):
        if self._pixels.ndim == 2:
            self._pixels = _frozen(self._pixels[..., np.newaxis].copy())
        if self._pixels.ndim != 3 or self._pixels.shape[2] not in (1, 3):
            raise DimensionError(
                f'Image must have 1 or 3 channels, not shape {self._pixels.shape}.'
            )
        if not np.all(np.isfinite(self._pixels)):
            raise ValueError('Image intensities must be finite.')
        if self._pixels.size and (self._pixels.min() < 0 or self._pixels.max() > 255):
            raise ValueError('Image intensities must be in [0, 255].')

    @property
    def channels(self):
        """Number of colour channels."""
        return self._pixels.shape[2]

    @classmethod
    def blank(cls, width, height, fill=0, channels=1):
        return cls(np.full((height, width, channels), fill, dtype=cls._dtype))


class LabelMap(Grid):
    """Grid of class ids."""

    _dtype = np.int64

    def __init__(self, pixels=(), *, n_classes=None, ignore_id=IGNORE_ID):
        """
        Create label map.

        n_classes: number of valid classes; None if not declared
        ignore_id: id of unlabelled pixels, excluded from metrics; None for no ignore id
        """
        self.n_classes = n_classes
        self.ignore_id = ignore_id
        super().__init__(pixels)

    def _attrs(self):
        return dict(n_classes=self.n_classes, ignore_id=self.ignore_id)

    def _validate(self):
        if self._pixels.ndim != 2:
            raise DimensionError(f'Label map must be 2D, not shape {self._pixels.shape}.')
        if self._pixels.size and self._pixels.min() < 0:
            raise ValueError('Class ids must not be negative.')
        if self.n_classes is not None:
            bad = self._pixels >= self.n_classes
            if self.ignore_id is not None:
                bad &= self._pixels != self.ignore_id
            if np.any(bad):
                raise ValueError(
                    f'Class id {int(self._pixels[bad].max())} out of range '
                    f'for {self.n_classes} classes.'
                )

    def classes(self):
        """Sorted tuple of class ids present, excluding the ignore id."""
        ids = np.unique(self._pixels)
        return tuple(int(_i) for _i in ids if _i != self.ignore_id)

    def with_classes(self, n_classes=None, ignore_id=IGNORE_ID):
        """Same pixels with other class declarations."""
        return LabelMap(self._pixels, n_classes=n_classes, ignore_id=ignore_id)


class EdgeMap(Grid):
    """Grid of edge strengths in [0, 1]."""

    def _validate(self):
        if self._pixels.ndim != 2:
            raise DimensionError(f'Edge map must be 2D, not shape {self._pixels.shape}.')
        if self._pixels.size and (
                not np.all(np.isfinite(self._pixels))
                or self._pixels.min() < 0 or self._pixels.max() > 1
            ):
            raise ValueError('Edge strengths must be in [0, 1].')


class ClassMask(Grid):
    """Binary mask."""

    _dtype = np.bool_

    def _validate(self):
        if self._pixels.ndim != 2:
            raise DimensionError(f'Mask must be 2D, not shape {self._pixels.shape}.')

    def count(self):
        """Number of pixels set."""
        return int(np.count_nonzero(self._pixels))


##############################################################################
# gaussian blur

def gaussian_kernel(sigma):
    """Normalised 1D gaussian kernel with half-width ceil(3 sigma)."""
    if not sigma > 0:
        raise ValueError(f'Blur sigma must be positive, not {sigma}.')
    radius = ceil(3 * sigma)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def blur_array(array, sigma):
    """
    Separable gaussian convolution over the first two axes, reflect borders.
    No clamping, so this is linear in the input.
    """
    kernel = gaussian_kernel(sigma)
    # scipy's 'reflect' is the half-sample symmetric extension d c b a | a b c d
    work = correlate1d(np.asarray(array, dtype=np.float64), kernel, axis=0, mode='reflect')
    return correlate1d(work, kernel, axis=1, mode='reflect')


def gaussian_blur(image, sigma):
    """Blur each channel of an image with a gaussian of standard deviation sigma."""
    blurred = blur_array(image.data, sigma)
    # output is a convex combination of input pixels; clip rounding excursions
    lo = image.data.min(axis=(0, 1))
    hi = image.data.max(axis=(0, 1))
    logging.debug('Gaussian blur sigma=%s on %r', sigma, image)
    return RasterImage(np.clip(blurred, lo, hi))


##############################################################################
# label boundaries

def label_boundary_edges(label):
    """Edge map with 1 where any 4-neighbour has a different class id, else 0."""
    ids = label.data
    edges = np.zeros(ids.shape, dtype=np.bool_)
    vertical = ids[1:, :] != ids[:-1, :]
    edges[1:, :] |= vertical
    edges[:-1, :] |= vertical
    horizontal = ids[:, 1:] != ids[:, :-1]
    edges[:, 1:] |= horizontal
    edges[:, :-1] |= horizontal
    return EdgeMap(edges)
