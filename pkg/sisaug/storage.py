"""
sisaug.storage - load and save grids, pair files, write JSON records

licence: https://opensource.org/licenses/MIT
"""

import json
import logging
from pathlib import Path
from functools import partial
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from PIL import Image

from .constants import IGNORE_ID, SCHEMA_VERSION, TOOL_NAME
from .raster import RasterImage, LabelMap, EdgeMap


class FileFormatError(Exception):
    """Incorrect file format."""


class PairingError(FileFormatError):
    """Files in paired directories don't match up."""


class SchemaError(FileFormatError):
    """JSON record of the wrong kind or schema version."""


# file extension used for everything we write
EXTENSION = '.png'

# Pillow modes and what we make of them
_GREY_MODES = ('L',)
_PALETTE_MODES = ('P',)
_COLOUR_MODES = ('RGB',)
_ALPHA_MODES = ('LA', 'RGBA', 'PA')
_WIDE_MODES = ('I', 'I;16', 'I;16B', 'I;16L', 'I;16N', 'F')


def _rawmodes(img):
    """Decoder raw modes of a file not yet loaded."""
    rawmodes = []
    for tile in img.tile:
        args = tile[3]
        rawmodes.append(args if isinstance(args, str) else str(args[0]) if args else '')
    return rawmodes


def _open(path):
    """Open image file with Pillow and load its pixels; reject samples wider than 8 bits."""
    try:
        img = Image.open(path)
        # Pillow narrows 16-bit colour to 8-bit modes, only the raw mode tells
        rawmodes = _rawmodes(img)
        img.load()
    except (OSError, ValueError) as exc:
        raise FileFormatError(f'Cannot read `{path}`: {exc}') from exc
    if img.mode in _WIDE_MODES or any(';16' in _raw for _raw in rawmodes):
        raise FileFormatError(f'`{path}`: unsupported bit depth (mode {img.mode}).')
    return img


##############################################################################
# label maps

def load_label_map(path, *, n_classes=None, ignore_id=IGNORE_ID):
    """
    Read a label map from an 8-bit single-channel PNG; pixel value is the class id.

    n_classes: number of classes; ids at or above this (other than ignore_id) are an error
    ignore_id: id of unlabelled pixels (default: 255)
    """
    img = _open(path)
    if img.mode not in _GREY_MODES + _PALETTE_MODES:
        raise FileFormatError(f'`{path}` is not a label map (mode {img.mode}).')
    # for palette images, np.asarray gives the palette indices
    ids = np.asarray(img)
    try:
        return LabelMap(ids, n_classes=n_classes, ignore_id=ignore_id)
    except ValueError as exc:
        raise FileFormatError(f'`{path}`: {exc}') from exc


def save_label_map(label, path):
    """Write a label map to an 8-bit greyscale PNG."""
    ids = label.data
    if ids.size and ids.max() > 255:
        raise ValueError('Class ids above 255 do not fit in an 8-bit label map.')
    Image.fromarray(ids.astype(np.uint8)).save(path, format='PNG')
    logging.debug('Saved label map `%s`.', path)


##############################################################################
# images

def load_image(path):
    """Read an 8-bit greyscale or RGB image as real intensities 0--255."""
    img = _open(path)
    if img.mode in _ALPHA_MODES:
        logging.warning('Dropping alpha channel of `%s`.', path)
        img = img.convert('L' if img.mode == 'LA' else 'RGB')
    elif img.mode in _PALETTE_MODES:
        img = img.convert('RGB')
    elif img.mode == '1':
        img = img.convert('L')
    elif img.mode not in _GREY_MODES + _COLOUR_MODES:
        raise FileFormatError(f'`{path}`: unsupported image mode {img.mode}.')
    return RasterImage(np.asarray(img, dtype=np.float64))


def quantise(array):
    """Round half up to 8-bit."""
    return np.clip(np.floor(np.asarray(array) + 0.5), 0, 255).astype(np.uint8)


def save_image(image, path):
    """Write image to an 8-bit greyscale or RGB PNG, rounding half up."""
    pixels = quantise(image.data)
    if image.channels == 1:
        pixels = pixels[..., 0]
    Image.fromarray(pixels).save(path, format='PNG')
    logging.debug('Saved image `%s`.', path)


##############################################################################
# edge maps

def load_edge_map(path):
    """Read an edge map from an 8-bit greyscale PNG; strength is value/255."""
    img = _open(path)
    if img.mode not in _GREY_MODES:
        raise FileFormatError(f'`{path}` is not an edge map (mode {img.mode}).')
    return EdgeMap(np.asarray(img, dtype=np.float64) / 255)


def save_edge_map(edge, path):
    """Write an edge map to an 8-bit greyscale PNG."""
    Image.fromarray(quantise(edge.data * 255)).save(path, format='PNG')


##############################################################################
# directories of files

def list_stems(directory, suffix=EXTENSION):
    """Map file stems to paths for all files with the suffix, sorted by stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileFormatError(f'`{directory}` is not a directory.')
    return {
        _path.stem: _path
        for _path in sorted(directory.iterdir())
        if _path.is_file() and _path.suffix.lower() == suffix
    }


def pair_files(*directories, suffix=EXTENSION):
    """
    Pair files with identical stems across directories.
    Returns a list of (stem, path, path, ...) sorted by stem.
    """
    listings = [list_stems(_dir, suffix) for _dir in directories]
    stems = set(listings[0])
    for directory, listing in zip(directories[1:], listings[1:]):
        if set(listing) != stems:
            missing = sorted(stems - set(listing))
            extra = sorted(set(listing) - stems)
            raise PairingError(
                f'Files in `{directory}` do not pair with `{directories[0]}`: '
                f'missing {missing}, unexpected {extra}.'
            )
    return [
        (_stem, *(_listing[_stem] for _listing in listings))
        for _stem in sorted(stems)
    ]


##############################################################################
# json records

def dump_json(record, kind):
    """Serialise a record deterministically, with schema version and kind."""
    record = dict(record)
    record['schema_version'] = SCHEMA_VERSION
    record['kind'] = kind
    record['generator'] = TOOL_NAME
    return json.dumps(record, indent=2, sort_keys=True) + '\n'


def save_json(record, kind, path):
    """Write a record to a JSON file."""
    Path(path).write_text(dump_json(record, kind), encoding='utf-8')
    logging.info('Wrote %s to `%s`.', kind, path)


def load_json(path, kind):
    """Read a JSON record and check schema version and kind."""
    try:
        record = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, ValueError) as exc:
        raise FileFormatError(f'Cannot read `{path}`: {exc}') from exc
    if not isinstance(record, dict):
        raise SchemaError(f'`{path}` does not hold a {kind} record.')
    if record.get('schema_version') != SCHEMA_VERSION:
        raise SchemaError(
            f'`{path}` has schema version {record.get("schema_version")!r}, '
            f'expected {SCHEMA_VERSION}.'
        )
    if record.get('kind') != kind:
        raise SchemaError(f'`{path}` holds a {record.get("kind")!r} record, not {kind}.')
    return record


##############################################################################
# batch processing

def _call_safely(func, args):
    """Call func, returning the exception instead of raising it."""
    try:
        return func(*args)
    except Exception as exc:
        return exc


def map_files(func, items, workers=1):
    """
    Apply func to each tuple of arguments, in worker processes if workers > 1.
    Results come back in input order; a failed call gives its exception.
    func must be a module-level function.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [_call_safely(func, _args) for _args in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(partial(_call_safely, func), items))
