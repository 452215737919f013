"""
sisaug.report - split-wise metric blocks and result tables

licence: https://opensource.org/licenses/MIT
"""

import io
import csv
import logging

from .metrics import ClassMetricTable, aggregate, EmptySplitError
from .storage import SchemaError


# labels of the biased and unbiased class sets
BIASED = 'bc'
UNBIASED = 'uc'

OVERALL_COLUMNS = ('pa', 'ma', 'miou')
SPLIT_COLUMNS = tuple(
    f'{_metric}_{_part}'
    for _part in (BIASED, UNBIASED)
    for _metric in ('pa', 'ma', 'miou')
)
FID_COLUMN = 'fid'

# metrics shown as percentages in text tables
_PERCENT_COLUMNS = set(OVERALL_COLUMNS + SPLIT_COLUMNS)

DELTA_PREFIX = 'delta '


##############################################################################
# metric blocks

def overall_block(table, cm=None):
    """Overall pixel accuracy and class means over all present classes."""
    try:
        agg = aggregate(table, cm)
    except EmptySplitError:
        return dict(pa=None, ma=None, miou=None, n_classes_used=0)
    return dict(
        pa=agg['pa_overall'], ma=agg['ma'], miou=agg['miou'],
        n_classes_used=agg['n_classes_used'],
    )


def split_block(table, split):
    """Metrics restricted to the biased and unbiased classes of a split."""
    block = {}
    empty = []
    for part, ids in ((BIASED, split.biased), (UNBIASED, split.unbiased)):
        # reference splits may name classes the table doesn't have
        ids = [_id for _id in ids if _id in table]
        try:
            agg = aggregate(table, split=ids)
        except EmptySplitError:
            empty.append(part)
            block.update({f'pa_{part}': None, f'ma_{part}': None, f'miou_{part}': None})
            block[f'n_{part}'] = 0
        else:
            block[f'pa_{part}'] = agg['pa_split']
            block[f'ma_{part}'] = agg['ma']
            block[f'miou_{part}'] = agg['miou']
            block[f'n_{part}'] = agg['n_classes_used']
    block['empty_split'] = empty
    return block


def table_from_record(record):
    """Class metric table from a metrics record."""
    try:
        return ClassMetricTable.from_records(record['classes'])
    except (KeyError, TypeError) as exc:
        raise SchemaError(f'Metrics record without valid class table: {exc}') from exc


##############################################################################
# tables

def build_report(runs, split=None, fids=None):
    """
    Rows of a result table, one per run, then a delta row per run against the first.

    runs: list of (name, metrics record)
    split: BiasSplit to add biased/unbiased columns for
    fids: externally computed FID per run, in run order
    """
    if fids is not None and len(fids) != len(runs):
        raise ValueError(f'Got {len(fids)} FID values for {len(runs)} runs.')
    columns = OVERALL_COLUMNS
    if split is not None:
        columns += SPLIT_COLUMNS
    if fids is not None:
        columns += (FID_COLUMN,)
    rows = []
    for index, (name, record) in enumerate(runs):
        table = table_from_record(record)
        values = overall_block(table)
        if split is not None:
            values.update(split_block(table, split))
        if fids is not None:
            values[FID_COLUMN] = fids[index]
        rows.append((name, tuple(values[_c] for _c in columns)))
    if len(rows) > 1:
        _, baseline = rows[0]
        rows.extend(
            (f'{DELTA_PREFIX}{_name}', tuple(
                None if _v is None or _b is None else _v - _b
                for _v, _b in zip(_values, baseline)
            ))
            for _name, _values in rows[1:]
        )
    logging.debug('Report with %d rows and columns %s', len(rows), columns)
    return columns, rows


def _format_cell(column, value, percent):
    if value is None:
        return '-'
    if percent and column in _PERCENT_COLUMNS:
        return f'{100 * value:.2f}'
    if percent:
        return f'{value:.2f}'
    return f'{value:.6f}'


def format_text(columns, rows):
    """Fixed-width text table; metrics in percent."""
    header = ('run',) + tuple(_c.upper() for _c in columns)
    body = [
        (_name,) + tuple(_format_cell(_c, _v, True) for _c, _v in zip(columns, _values))
        for _name, _values in rows
    ]
    widths = [
        max(len(_row[_i]) for _row in [header] + body)
        for _i in range(len(header))
    ]
    lines = []
    for row in [header] + body:
        cells = [row[0].ljust(widths[0])]
        cells.extend(_cell.rjust(_w) for _cell, _w in zip(row[1:], widths[1:]))
        lines.append('  '.join(cells).rstrip())
    lines.insert(1, '  '.join('-' * _w for _w in widths))
    return '\n'.join(lines) + '\n'


def format_csv(columns, rows):
    """CSV table; metrics as fractions."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(('run',) + tuple(columns))
    for name, values in rows:
        writer.writerow(
            (name,) + tuple(
                '' if _v is None else _format_cell(_c, _v, False)
                for _c, _v in zip(columns, values)
            )
        )
    return out.getvalue()


FORMATS = {
    'text': format_text,
    'csv': format_csv,
}
