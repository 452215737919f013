"""
sisaug.bias - split classes into biased and unbiased

licence: https://opensource.org/licenses/MIT
"""

import pkgutil
import logging
from dataclasses import dataclass, field

from .basetypes import to_int, to_number
from .perturb import SCHEME_NAMES


# metric kinds in the order they are checked
METRICS = ('pa', 'iou')
METRIC_CHOICES = ('both',) + METRICS

REFERENCE_SPLITS = ('coco-stuff', 'ade20k', 'cityscapes')

# provenance of classes nothing triggered on
NO_TRIGGER = 'none'


##############################################################################
# perturbed metrics

class PerturbedMetricSet:
    """
    Per scheme and class, the metrics of that class on images with that class perturbed.
    Not every scheme needs to be present.
    """

    def __init__(self, values):
        """values: dict scheme -> dict class_id -> (pa, iou); None for undefined metrics."""
        unknown = set(values) - set(SCHEME_NAMES)
        if unknown:
            raise ValueError(f'Unknown perturbation schemes: {sorted(unknown)}')
        self._values = {
            _scheme: {
                int(_id): dict(zip(METRICS, _pair))
                for _id, _pair in values[_scheme].items()
            }
            for _scheme in SCHEME_NAMES
            if _scheme in values
        }
        for scheme, classes in self._values.items():
            for class_id, metrics in classes.items():
                for kind, value in metrics.items():
                    if value is not None and not 0 <= value <= 1:
                        raise ValueError(
                            f'{scheme} {kind} of class {class_id} not in [0, 1]: {value}'
                        )

    @property
    def schemes(self):
        """Schemes present, in canonical order."""
        return tuple(self._values)

    def class_ids(self):
        """Sorted ids of classes with values in any scheme."""
        return sorted(set().union(*(set(_v) for _v in self._values.values())))

    def get(self, scheme, class_id, metric):
        """Metric value, or None if not given."""
        return self._values.get(scheme, {}).get(class_id, {}).get(metric)


##############################################################################
# bias split

@dataclass(frozen=True)
class BiasSplit:
    """Partition of classes into biased and unbiased."""
    biased: tuple
    unbiased: tuple
    delta: float = None
    # class id -> dict(scheme, metric, real, perturbed) or NO_TRIGGER
    provenance: dict = field(default_factory=dict)
    # class id -> name, for reference splits
    names: dict = field(default_factory=dict)
    # schemes the decisions were based on
    coverage: tuple = ()
    metric: str = 'both'

    def __post_init__(self):
        overlap = set(self.biased) & set(self.unbiased)
        if overlap:
            raise ValueError(f'Classes both biased and unbiased: {sorted(overlap)}')

    @property
    def classes(self):
        """All classes in the split, sorted."""
        return tuple(sorted(self.biased + self.unbiased))

    def as_record(self):
        return dict(
            delta=self.delta,
            metric=self.metric,
            biased=list(self.biased),
            unbiased=list(self.unbiased),
            coverage=list(self.coverage),
            provenance={str(_k): _v for _k, _v in sorted(self.provenance.items())},
            names={str(_k): _v for _k, _v in sorted(self.names.items())},
        )

    @classmethod
    def from_record(cls, record):
        try:
            return cls(
                biased=tuple(int(_i) for _i in record['biased']),
                unbiased=tuple(int(_i) for _i in record['unbiased']),
                delta=record.get('delta'),
                provenance={int(_k): _v for _k, _v in record.get('provenance', {}).items()},
                names={int(_k): _v for _k, _v in record.get('names', {}).items()},
                coverage=tuple(record.get('coverage', ())),
                metric=record.get('metric', 'both'),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f'Not a valid bias split record: {exc}') from exc


def classify_bias(real_table, perturbed, delta=2/3, metric='both'):
    """
    Mark a class biased if any perturbed metric exceeds delta times its real metric.

    real_table: ClassMetricTable on real images
    perturbed: PerturbedMetricSet
    delta: threshold factor in (0, 1]
    metric: `both`, `pa` or `iou`
    """
    if not 0 < delta <= 1:
        raise ValueError(f'delta must be in (0, 1], not {delta}.')
    if metric not in METRIC_CHOICES:
        raise ValueError(f'metric must be one of {", ".join(METRIC_CHOICES)}, not `{metric}`.')
    kinds = METRICS if metric == 'both' else (metric,)
    evaluated = real_table.labelled_ids()
    excluded = sorted(set(perturbed.class_ids()) - set(evaluated))
    if excluded:
        logging.warning('Classes absent from real metrics excluded from split: %s', excluded)
    biased, unbiased, provenance = [], [], {}
    for class_id in evaluated:
        trigger = _find_trigger(real_table[class_id], perturbed, delta, kinds)
        if trigger:
            biased.append(class_id)
            provenance[class_id] = trigger
        else:
            unbiased.append(class_id)
            provenance[class_id] = NO_TRIGGER
    return BiasSplit(
        biased=tuple(biased), unbiased=tuple(unbiased), delta=delta,
        provenance=provenance, coverage=perturbed.schemes, metric=metric,
    )


def _find_trigger(real_row, perturbed, delta, kinds):
    """First (scheme, metric) whose perturbed value exceeds the threshold, or None."""
    for scheme in perturbed.schemes:
        for kind in kinds:
            real = getattr(real_row, kind)
            value = perturbed.get(scheme, real_row.class_id, kind)
            if real is None or value is None:
                continue
            if value > delta * real:
                if real == 0:
                    logging.debug(
                        'Class %d biased on zero real %s: %s gives %s',
                        real_row.class_id, kind, scheme, value
                    )
                return dict(
                    scheme=scheme, metric=kind, real=real, perturbed=value,
                    zero_real=real == 0,
                )
    return None


##############################################################################
# reference splits

def _parse_universe(text):
    """Ids from a list of numbers and ranges like 1-182."""
    ids = []
    for item in text.replace(',', ' ').split():
        first, sep, last = item.partition('-')
        if sep:
            ids.extend(range(to_int(first), to_int(last) + 1))
        else:
            ids.append(to_int(first))
    return tuple(sorted(set(ids)))


def read_split_file(text):
    """Parse a reference split file."""
    props, names = {}, {}
    in_block = False
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith('#'):
            continue
        key, _, value = line.strip().partition(':')
        if line[:1] in ' \t' and in_block:
            names[to_int(key)] = value.strip()
        elif not value.strip():
            in_block = key == 'biased'
        else:
            in_block = False
            props[key.strip()] = value.strip()
    universe = _parse_universe(props.get('universe', ''))
    biased = tuple(sorted(names))
    stray = sorted(set(biased) - set(universe))
    if stray:
        raise ValueError(f'Biased classes outside universe: {stray}')
    delta = props.get('delta')
    return BiasSplit(
        biased=biased,
        unbiased=tuple(_id for _id in universe if _id not in names),
        delta=None if delta is None else float(to_number(delta)),
        names=names,
    )


def load_reference_split(dataset_name):
    """Bundled biased/unbiased split for coco-stuff, ade20k or cityscapes."""
    if dataset_name not in REFERENCE_SPLITS:
        raise ValueError(
            f'No reference split for `{dataset_name}`; use one of {", ".join(REFERENCE_SPLITS)}.'
        )
    data = pkgutil.get_data(__name__, f'splits/{dataset_name}.txt')
    return read_split_file(data.decode('utf-8'))
