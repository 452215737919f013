"""
sisaug.basetypes - base data types and converters

licence: https://opensource.org/licenses/MIT
"""

from collections import namedtuple
from pathlib import Path
from numbers import Real

import numpy as np


# marks an optional setting that has not been given a value
UNSET = 'unset'


def to_int(int_str):
    """Convert from int-like or string in any representation."""
    try:
        # '0xFF' - hex
        # '0o77' - octal
        # '99' - decimal
        return int(int_str, 0)
    except (TypeError, ValueError):
        # '099' - ValueError above, OK as decimal
        # non-string inputs: TypeError, may be OK if int(x) works
        return int(int_str)

def to_number(value=0):
    """Convert to int or float."""
    if isinstance(value, str):
        value = value.strip()
        # allow fractions such as 2/3 for delta
        num, sep, den = value.partition('/')
        if sep:
            return float(num) / float(den)
        value = float(value)
    if not isinstance(value, Real):
        raise ValueError("Can't convert `{}` to number.".format(value))
    if value == int(value):
        value = int(value)
    return value

def to_float(value=0.0):
    """Convert to float, accepting fractions."""
    return float(to_number(value))

def to_bool(value):
    """Convert yes/no style strings to bool."""
    if isinstance(value, str):
        value = value.strip().lower()
        if value in ('', 'true', 'yes', 'on', '1'):
            return True
        if value in ('false', 'no', 'off', '0'):
            return False
        raise ValueError(f"Can't convert `{value}` to boolean.")
    return bool(value)

def optional(converter):
    """Converter that maps empty and `unset` values to None."""
    def _convert(value):
        if value is None or value == '' or value == UNSET:
            return None
        return converter(value)
    return _convert


class Point(namedtuple('Point', 'u v')):
    """Pixel coordinate: u is the row, v the column."""

    def __str__(self):
        return f'{self.u} {self.v}'


# type converters
CONVERTERS = {
    int: to_int,
    float: to_float,
    Real: to_number,
    bool: to_bool,
    Path: Path,
}


def derive_seed(seed, *keys):
    """Derive an independent seed for an item from a global seed and item keys."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(int(_k) for _k in keys))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])
