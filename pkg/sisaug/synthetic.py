"""
sisaug.synthetic - small generated dataset for demonstrations and tests

licence: https://opensource.org/licenses/MIT
"""

import logging
from pathlib import Path

import numpy as np

from .basetypes import derive_seed
from .constants import IGNORE_ID
from .raster import RasterImage, LabelMap, label_boundary_edges
from .storage import (
    save_image, save_label_map, save_edge_map, load_image, list_stems,
)


N_CLASSES = 3

# mean colour per class; ignored pixels are black
CLASS_COLOURS = np.array([
    (70, 90, 60),
    (180, 60, 50),
    (60, 80, 200),
], dtype=np.float64)

# amplitude of uniform noise on image pixels
NOISE = 20

# subdirectories of a synthetic dataset
IMAGES = 'images'
LABELS = 'labels'
EDGES = 'edges'
PRED_GT = 'pred-gt'
PRED_CORRUPT = 'pred-corrupt'


def synthetic_label(size, seed, ignore_band=False):
    """Background with a rectangle of class 1 and a disc of class 2."""
    rng = np.random.default_rng(seed)
    ids = np.zeros((size, size), dtype=np.int64)
    top, left = rng.integers(2, size // 2, size=2)
    height, width = rng.integers(6, size // 2 + 1, size=2)
    ids[top:top+height, left:left+width] = 1
    centre = rng.integers(size // 4, 3 * size // 4 + 1, size=2)
    radius = rng.integers(4, size // 4 + 1)
    rows, cols = np.mgrid[0:size, 0:size]
    ids[(rows - centre[0])**2 + (cols - centre[1])**2 <= radius**2] = 2
    if ignore_band:
        ids[-1, :] = IGNORE_ID
    return LabelMap(ids, n_classes=N_CLASSES)


def synthetic_image(label, seed):
    """RGB image with the class colour plus uniform integer noise per pixel."""
    rng = np.random.default_rng(seed)
    ids = label.data
    pixels = np.zeros(ids.shape + (3,), dtype=np.float64)
    known = ids < N_CLASSES
    pixels[known] = CLASS_COLOURS[ids[known]]
    pixels += rng.integers(-NOISE, NOISE + 1, size=pixels.shape)
    return RasterImage(np.clip(pixels, 0, 255))


def corrupt_prediction(label, seed, fraction=0.2):
    """
    Ground truth with a fraction of rows shifted to the next class id.
    Ignored pixels are predicted as background.
    """
    rng = np.random.default_rng(seed)
    ids = label.as_array()
    ids[ids == IGNORE_ID] = 0
    rows = rng.random(ids.shape[0]) < fraction
    ids[rows] = (ids[rows] + 1) % N_CLASSES
    return label.modify(ids)


def nearest_colour_prediction(image):
    """Label each pixel with the class whose mean colour is closest."""
    pixels = image.data
    if image.channels == 1:
        pixels = np.repeat(pixels, 3, axis=2)
    distances = ((pixels[..., np.newaxis, :] - CLASS_COLOURS) ** 2).sum(axis=-1)
    return LabelMap(np.argmin(distances, axis=-1), n_classes=N_CLASSES)


def write_synthetic_dataset(out_dir, n_images=8, size=32, seed=0):
    """
    Write images, labels, edges and two predictions per image.
    Every fourth label map has an ignored bottom row.
    """
    out_dir = Path(out_dir)
    dirs = {
        _name: out_dir / _name
        for _name in (IMAGES, LABELS, EDGES, PRED_GT, PRED_CORRUPT)
    }
    for directory in dirs.values():
        directory.mkdir(parents=True, exist_ok=True)
    for index in range(n_images):
        name = f'synth-{index:03d}.png'
        label = synthetic_label(size, derive_seed(seed, index, 0), ignore_band=index % 4 == 3)
        image = synthetic_image(label, derive_seed(seed, index, 1))
        save_label_map(label, dirs[LABELS] / name)
        save_image(image, dirs[IMAGES] / name)
        save_edge_map(label_boundary_edges(label), dirs[EDGES] / name)
        pred_gt = label.as_array()
        pred_gt[pred_gt == IGNORE_ID] = 0
        save_label_map(label.modify(pred_gt), dirs[PRED_GT] / name)
        save_label_map(corrupt_prediction(label, derive_seed(seed, index, 2)), dirs[PRED_CORRUPT] / name)
    logging.info('Wrote %d synthetic images to `%s`.', n_images, out_dir)
    return dirs


def predict_directory(image_dir, out_dir):
    """Write nearest-colour predictions for every image in a directory; return count."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = list_stems(image_dir)
    for path in stems.values():
        save_label_map(nearest_colour_prediction(load_image(path)), out_dir / path.name)
    return len(stems)
