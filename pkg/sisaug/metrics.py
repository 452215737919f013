"""
sisaug.metrics - confusion matrices and segmentation metrics

licence: https://opensource.org/licenses/MIT
"""

import logging
from dataclasses import dataclass, asdict

import numpy as np

from .raster import check_dimensions
from .storage import load_label_map, map_files


class EmptySplitError(ValueError):
    """No present class to average over."""


# class count used when none is declared; trimmed after accumulation
MAX_CLASSES = 256

# classes with neither ground-truth nor predicted pixels are left out of all means
ABSENT_CLASS_CONVENTION = 'absent-if-not-labelled-or-predicted'


##############################################################################
# confusion matrix

class ConfusionMatrix:
    """
    Pixel counts: counts[j][i] is the number of pixels of true class j predicted as i.
    void[j] counts pixels of true class j predicted as the ignore id.
    """

    def __init__(self, counts, void=None):
        counts = np.array(counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValueError(f'Confusion matrix must be square, not shape {counts.shape}.')
        if void is None:
            void = np.zeros(len(counts), dtype=np.int64)
        void = np.array(void, dtype=np.int64).reshape(len(counts))
        if counts.size and counts.min() < 0 or void.size and void.min() < 0:
            raise ValueError('Confusion counts must not be negative.')
        counts.setflags(write=False)
        void.setflags(write=False)
        self.counts = counts
        self.void = void

    @classmethod
    def zeros(cls, n_classes):
        return cls(np.zeros((n_classes, n_classes), dtype=np.int64))

    @property
    def n_classes(self):
        return len(self.counts)

    @property
    def total(self):
        """Number of evaluated pixels."""
        return int(self.counts.sum() + self.void.sum())

    @property
    def true_counts(self):
        """Pixels per true class, t_i."""
        return self.counts.sum(axis=1) + self.void

    @property
    def predicted_counts(self):
        """Pixels per predicted class."""
        return self.counts.sum(axis=0)

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return (
            np.array_equal(self.counts, other.counts)
            and np.array_equal(self.void, other.void)
        )

    __hash__ = None

    def __add__(self, other):
        return merge_confusion(self, other)

    def __repr__(self):
        return f'ConfusionMatrix(n_classes={self.n_classes}, total={self.total})'

    def resize(self, n_classes):
        """Grow with zeros, or drop trailing classes that have no counts."""
        if n_classes >= self.n_classes:
            counts = np.zeros((n_classes, n_classes), dtype=np.int64)
            counts[:self.n_classes, :self.n_classes] = self.counts
            void = np.zeros(n_classes, dtype=np.int64)
            void[:self.n_classes] = self.void
            return ConfusionMatrix(counts, void)
        if (
                self.counts[n_classes:].any() or self.counts[:, n_classes:].any()
                or self.void[n_classes:].any()
            ):
            raise ValueError(f'Cannot shrink to {n_classes} classes: counts would be lost.')
        return ConfusionMatrix(self.counts[:n_classes, :n_classes], self.void[:n_classes])

    def trim(self):
        """Drop trailing classes without counts."""
        used = np.flatnonzero(self.true_counts + self.predicted_counts)
        return self.resize(int(used[-1]) + 1 if len(used) else 0)


def accumulate_confusion(gt, pred, acc, allow_void=False):
    """
    Add the pixels of a ground-truth and predicted label map to a confusion matrix.
    Ground-truth pixels with the ignore id are skipped.

    allow_void: count predictions of the ignore id as misses instead of failing
    """
    check_dimensions(gt, pred)
    n = acc.n_classes
    truth = gt.data.ravel()
    guess = pred.data.ravel()
    if gt.ignore_id is not None:
        keep = truth != gt.ignore_id
        truth, guess = truth[keep], guess[keep]
    if truth.size and truth.max() >= n:
        raise ValueError(f'Ground-truth class id {int(truth.max())} out of range for {n} classes.')
    void = np.zeros(truth.shape, dtype=np.bool_)
    if gt.ignore_id is not None:
        void = guess == gt.ignore_id
        if np.any(void) and not allow_void:
            raise ValueError('Prediction contains the ignore id.')
    guess_ok = guess[~void]
    if guess_ok.size and guess_ok.max() >= n:
        raise ValueError(f'Predicted class id {int(guess_ok.max())} out of range for {n} classes.')
    counts = np.bincount(
        n * truth[~void] + guess_ok, minlength=n**2
    ).reshape(n, n)
    void_counts = np.bincount(truth[void], minlength=n)
    return ConfusionMatrix(acc.counts + counts, acc.void + void_counts)


def merge_confusion(a, b):
    """Entrywise sum of two confusion matrices."""
    if a.n_classes != b.n_classes:
        raise ValueError(f'Confusion matrix sizes differ: {a.n_classes} != {b.n_classes}.')
    return ConfusionMatrix(a.counts + b.counts, a.void + b.void)


##############################################################################
# per-class metrics

@dataclass(frozen=True)
class ClassMetrics:
    """Metrics of one class; pa and iou are None where undefined."""
    class_id: int
    pa: float
    iou: float
    present: bool
    t: int
    tp: int
    predicted: int


class ClassMetricTable:
    """Per-class pixel accuracy and intersection over union."""

    def __init__(self, rows):
        self._rows = {_row.class_id: _row for _row in rows}

    def __iter__(self):
        return iter(self._rows[_id] for _id in sorted(self._rows))

    def __len__(self):
        return len(self._rows)

    def __contains__(self, class_id):
        return class_id in self._rows

    def __getitem__(self, class_id):
        return self._rows[class_id]

    def __eq__(self, other):
        if not isinstance(other, ClassMetricTable):
            return NotImplemented
        return self._rows == other._rows

    __hash__ = None

    def present_ids(self):
        """Sorted ids of classes occurring in the ground truth or the predictions."""
        return tuple(_row.class_id for _row in self if _row.present)

    def labelled_ids(self):
        """Sorted ids of classes occurring in the ground truth."""
        return tuple(_row.class_id for _row in self if _row.t)

    def as_records(self):
        return [asdict(_row) for _row in self]

    @classmethod
    def from_records(cls, records):
        return cls(ClassMetrics(**_rec) for _rec in records)


def _ratio(num, den):
    return float(num) / float(den) if den else None


def per_class_metrics(cm):
    """Pixel accuracy and IoU per class; undefined values where denominators vanish."""
    tp = np.diag(cm.counts)
    t = cm.true_counts
    predicted = cm.predicted_counts
    union = t + predicted - tp
    return ClassMetricTable(
        ClassMetrics(
            class_id=_i,
            pa=_ratio(tp[_i], t[_i]),
            iou=_ratio(tp[_i], union[_i]),
            present=bool(t[_i] > 0 or predicted[_i] > 0),
            t=int(t[_i]),
            tp=int(tp[_i]),
            predicted=int(predicted[_i]),
        )
        for _i in range(cm.n_classes)
    )


def aggregate(table, cm=None, split=None):
    """
    Overall pixel accuracy and means of per-class metrics over present classes.

    table: ClassMetricTable
    cm: ConfusionMatrix for the overall accuracy; recomputed from table counts if None
    split: class ids to restrict the means to; all classes if None
    """
    if cm is not None:
        tp_all, total = int(np.trace(cm.counts)), cm.total
    else:
        tp_all = sum(_row.tp for _row in table)
        total = sum(_row.t for _row in table)
    present = table.present_ids()
    if split is None:
        used = present
    else:
        split = set(split)
        unknown = sorted(_id for _id in split if _id not in table)
        if unknown:
            raise ValueError(f'Split contains class ids outside the table: {unknown}')
        used = tuple(_id for _id in present if _id in split)
    if not used:
        raise EmptySplitError('empty split')
    rows = [table[_id] for _id in used]
    # predicted-only classes have no PA but count in mIoU with their IoU of 0
    pas = [_r.pa for _r in rows if _r.pa is not None]
    ious = [_r.iou for _r in rows if _r.iou is not None]
    return dict(
        pa_overall=_ratio(tp_all, total),
        pa_split=_ratio(sum(_r.tp for _r in rows), sum(_r.t for _r in rows)),
        ma=float(np.mean(pas)) if pas else None,
        miou=float(np.mean(ious)) if ious else None,
        n_classes_used=len(rows),
    )


##############################################################################
# datasets

def confusion_for_files(gt_path, pred_path, n_classes, ignore_id, allow_void):
    """Confusion matrix of one ground-truth and prediction file pair."""
    size = n_classes or MAX_CLASSES
    gt = load_label_map(gt_path, n_classes=n_classes, ignore_id=ignore_id)
    pred = load_label_map(pred_path, n_classes=n_classes, ignore_id=ignore_id)
    return accumulate_confusion(gt, pred, ConfusionMatrix.zeros(size), allow_void)


def evaluate_pairs(pairs, *, n_classes=None, ignore_id=255, allow_void=False, workers=1):
    """
    Accumulate one confusion matrix over (stem, gt_path, pred_path) triples.
    Returns the merged matrix and a list of (stem, error) pairs.
    """
    items = [
        (_gt, _pred, n_classes, ignore_id, allow_void)
        for _, _gt, _pred in pairs
    ]
    cm = ConfusionMatrix.zeros(n_classes or MAX_CLASSES)
    errors = []
    # merging is order-independent, but we keep input order anyway
    for (stem, _, _), result in zip(pairs, map_files(confusion_for_files, items, workers)):
        if isinstance(result, Exception):
            logging.error('%s: %s', stem, result)
            errors.append((stem, str(result)))
        else:
            cm = merge_confusion(cm, result)
    if n_classes is None:
        cm = cm.trim()
    return cm, errors
