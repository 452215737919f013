"""
sisaug.config - tool configuration, dataset profiles and config files

licence: https://opensource.org/licenses/MIT
"""

import os
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from collections import namedtuple

from .basetypes import CONVERTERS, UNSET, optional


# environment variable overriding the worker count
WORKERS_ENV = 'SISAUG_WORKERS'


##############################################################################
# dataset profiles

DatasetProfile = namedtuple('DatasetProfile', 'sigma0 split')

# blur sigma per dataset and the bundled reference bias split
DATASET_PROFILES = {
    'coco-stuff': DatasetProfile(25.0, 'coco-stuff'),
    'ade20k': DatasetProfile(35.0, 'ade20k'),
    'cityscapes': DatasetProfile(27.0, 'cityscapes'),
}
CUSTOM_PROFILE = 'custom'


def sigma_from_kernel_size(kernel_size):
    """Blur sigma for a kernel size K: sigma = K/3."""
    if not kernel_size > 0:
        raise ValueError(f'Kernel size must be positive, not {kernel_size}.')
    return kernel_size / 3


##############################################################################
# configuration sections

def _choice(*options):
    """Field metadata for a string setting with a fixed set of values."""
    return dict(choices=options)

def _unset():
    """Field metadata for a setting that may be left unset."""
    return dict(optional=True)


def _check_choices(section):
    for fld in fields(section):
        choices = fld.metadata.get('choices')
        value = getattr(section, fld.name)
        if choices and value not in choices:
            raise ValueError(
                f'Setting {fld.name} must be one of {", ".join(choices)}, not `{value}`.'
            )


@dataclass(frozen=True)
class WarpConfig:
    n_keypoints: int = 64
    tau: float = 0.5
    max_shift: float = 4.0
    lambda_reg: float = 1e-3
    border: str = field(default='clamp', metadata=_choice('clamp', 'ignore-fill'))
    sampling: str = field(default='boundary', metadata=_choice('boundary', 'random'))

    def __post_init__(self):
        _check_choices(self)
        if self.n_keypoints < 3:
            raise ValueError(f'n-keypoints must be at least 3, not {self.n_keypoints}.')
        if not 0 <= self.tau <= 1:
            raise ValueError(f'tau must be in [0, 1], not {self.tau}.')
        if self.max_shift < 0:
            raise ValueError(f'max-shift must not be negative, not {self.max_shift}.')
        if self.lambda_reg < 0:
            raise ValueError(f'lambda-reg must not be negative, not {self.lambda_reg}.')


@dataclass(frozen=True)
class PerturbConfig:
    c0: float = 128.0
    sigma0: float = field(default=None, metadata=_unset())
    dataset_profile: str = field(
        default=CUSTOM_PROFILE, metadata=_choice(CUSTOM_PROFILE, *DATASET_PROFILES)
    )
    lognormal: bool = True

    def __post_init__(self):
        _check_choices(self)
        if not 0 <= self.c0 <= 255:
            raise ValueError(f'c0 must be in [0, 255], not {self.c0}.')
        if self.sigma0 is not None and not self.sigma0 > 0:
            raise ValueError(f'sigma0 must be positive, not {self.sigma0}.')

    def blur_sigma(self):
        """Blur sigma from the setting or the dataset profile; None if neither."""
        if self.sigma0 is not None:
            return self.sigma0
        if self.dataset_profile in DATASET_PROFILES:
            return DATASET_PROFILES[self.dataset_profile].sigma0
        return None


@dataclass(frozen=True)
class EvalConfig:
    n_classes: int = field(default=None, metadata=_unset())
    ignore_id: int = 255
    delta: float = 2/3
    metric: str = field(default='both', metadata=_choice('both', 'pa', 'iou'))
    allow_void: bool = False

    def __post_init__(self):
        _check_choices(self)
        if not 0 < self.delta <= 1:
            raise ValueError(f'delta must be in (0, 1], not {self.delta}.')
        if self.n_classes is not None and not 1 <= self.n_classes <= 256:
            raise ValueError(f'n-classes must be in [1, 256], not {self.n_classes}.')
        if not 0 <= self.ignore_id <= 255:
            raise ValueError(f'ignore-id must be in [0, 255], not {self.ignore_id}.')


@dataclass(frozen=True)
class IoConfig:
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f'workers must be at least 1, not {self.workers}.')


# sections that affect outputs; io is execution-only
SECTIONS = {
    'warp': WarpConfig,
    'perturb': PerturbConfig,
    'eval': EvalConfig,
    'io': IoConfig,
}
OUTPUT_SECTIONS = ('warp', 'perturb', 'eval')


@dataclass(frozen=True)
class ToolConfig:
    seed: int = 0
    warp: WarpConfig = field(default_factory=WarpConfig)
    perturb: PerturbConfig = field(default_factory=PerturbConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    io: IoConfig = field(default_factory=IoConfig)

    def update(self, section=None, **kwargs):
        """
        Copy with settings replaced; None values are ignored.
        Keys with dashes or underscores, string values are converted.
        """
        if section is None:
            kwargs = _convert_settings(ToolConfig, kwargs, skip=SECTIONS)
            return replace(self, **kwargs)
        current = getattr(self, section)
        kwargs = _convert_settings(type(current), kwargs)
        return replace(self, **{section: replace(current, **kwargs)})

    def as_record(self):
        """Nested dict of output-affecting settings, for embedding in JSON."""
        record = dict(seed=self.seed)
        for name in OUTPUT_SECTIONS:
            section = getattr(self, name)
            record[name] = {
                _f.name.replace('_', '-'): getattr(section, _f.name)
                for _f in fields(section)
            }
        return record


def _converter(fld):
    """Converter for a dataclass field from its annotation."""
    converter = CONVERTERS.get(fld.type, fld.type)
    if fld.metadata.get('optional'):
        converter = optional(converter)
    return converter


def _convert_settings(cls, kwargs, skip=()):
    """Normalise keys and convert values for a config section."""
    known = {_f.name: _f for _f in fields(cls) if _f.name not in skip}
    converted = {}
    for key, value in kwargs.items():
        key = key.replace('-', '_')
        if key not in known:
            raise ValueError(f'Unknown setting `{key}` for {cls.__name__}.')
        fld = known[key]
        if value is None:
            continue
        if isinstance(value, str):
            value = _converter(fld)(value)
        elif fld.type is float:
            value = float(value)
        converted[key] = value
    return converted


##############################################################################
# config files

COMMENT = '#'
SEPARATOR = ':'
TAB = '    '
WHITESPACE = tuple(' \t')


def read_config(text, base=None):
    """
    Parse a config file: `key: value` lines, `#` comments,
    `section:` lines opening a block of indented `key: value` lines.
    Settings override those of `base` (default: built-in defaults).
    """
    config = base or ToolConfig()
    top, sections = {}, {}
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        contents = line.rstrip()
        if not contents.strip() or contents.lstrip().startswith(COMMENT):
            continue
        key, sep, value = contents.strip().partition(SEPARATOR)
        key = key.strip().replace('_', '-')
        value = value.strip()
        if not sep:
            raise ValueError(f'Config line {lineno}: expected `key: value`, got `{contents}`.')
        if contents[:1] in WHITESPACE:
            if current is None:
                raise ValueError(f'Config line {lineno}: indented setting outside a section.')
            sections[current][key] = value
        elif not value:
            if key not in SECTIONS:
                raise ValueError(f'Config line {lineno}: unknown section `{key}`.')
            current = key
            sections.setdefault(current, {})
        else:
            current = None
            top[key] = value
    config = config.update(**top)
    for name, settings in sections.items():
        config = config.update(name, **settings)
    return config


def _format_value(value):
    if value is None:
        return UNSET
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        # repr gives the shortest string that reads back to the same float
        return repr(value)
    return str(value)


def dump_config(config):
    """Write out the output-affecting settings of a config in config-file format."""
    lines = [f'seed{SEPARATOR} {config.seed}']
    for name in OUTPUT_SECTIONS:
        section = getattr(config, name)
        lines.append('')
        lines.append(f'{name}{SEPARATOR}')
        lines.extend(
            f'{TAB}{_f.name.replace("_", "-")}{SEPARATOR} {_format_value(getattr(section, _f.name))}'
            for _f in fields(section)
        )
    return '\n'.join(lines) + '\n'


def load_config(path, base=None):
    """Read a config file."""
    logging.info('Reading config from `%s`.', path)
    return read_config(Path(path).read_text(encoding='utf-8'), base=base)


def save_config(config, path):
    """Write the effective config to a file."""
    Path(path).write_text(dump_config(config), encoding='utf-8')


##############################################################################
# effective configuration

def resolve_config(config_file=None, *, seed=None, workers=None, environ=None, **sections):
    """
    Build the effective configuration.

    Precedence: defaults, dataset profile, config file, options, environment.
    The worker count from the environment only applies if `workers` is not given.

    config_file: path of a config file, or None
    seed: global seed
    workers: number of worker processes
    sections: dicts of settings per section name
    """
    environ = os.environ if environ is None else environ
    config = ToolConfig()
    if config_file:
        config = load_config(config_file, base=config)
    config = config.update(seed=seed)
    for name, settings in sections.items():
        if settings:
            config = config.update(name, **settings)
    if workers is None and environ.get(WORKERS_ENV):
        workers = environ[WORKERS_ENV]
        logging.debug('Worker count %s from %s.', workers, WORKERS_ENV)
    config = config.update('io', workers=workers)
    # profile only fills in sigma0 if nothing else did
    if config.perturb.sigma0 is None:
        config = config.update('perturb', sigma0=config.perturb.blur_sigma())
    return config
