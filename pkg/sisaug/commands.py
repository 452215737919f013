"""
sisaug.commands - batch commands over directories of files

licence: https://opensource.org/licenses/MIT
"""

import shutil
import logging
from pathlib import Path
from collections import namedtuple

from .basetypes import to_float, derive_seed
from .config import resolve_config, save_config
from .scripting import scriptable
from .raster import label_boundary_edges, check_dimensions
from .storage import (
    load_label_map, save_label_map, load_edge_map, list_stems, pair_files,
    map_files, save_json, load_json, dump_json, FileFormatError,
)
from .tps import plan_warp, warp_label_map, NoBoundaryError, DegenerateControlPoints
from .perturb import SCHEME_NAMES, make_scheme, perturb_dataset
from .metrics import (
    per_class_metrics, evaluate_pairs, ClassMetricTable, ABSENT_CLASS_CONVENTION,
)
from .bias import (
    BiasSplit, PerturbedMetricSet, classify_bias, load_reference_split,
    REFERENCE_SPLITS, METRICS,
)
from .report import overall_block, split_block, build_report, table_from_record, FORMATS
from .synthetic import write_synthetic_dataset, predict_directory


CommandResult = namedtuple('CommandResult', 'status outputs errors')

# file names written into output directories
MANIFEST = 'manifest.json'
RUN_CONFIG = 'run.cfg'
INSTANCE_DIR = 'instances'
CLASS_DIR_PREFIX = 'class-'

# json record kinds
WARP_MANIFEST = 'warp-manifest'
PERTURB_MANIFEST = 'perturb-manifest'
METRICS_RECORD = 'metrics'
PERTURBED_METRICS_RECORD = 'perturbed-metrics'
BIAS_SPLIT_RECORD = 'bias-split'


def class_dir_name(class_id):
    return f'{CLASS_DIR_PREFIX}{class_id:03d}'


def _class_dirs(root):
    """Map class ids to class-NNN subdirectories of root."""
    return {
        int(_path.name[len(CLASS_DIR_PREFIX):]): _path
        for _path in sorted(Path(root).iterdir())
        if _path.is_dir()
        and _path.name.startswith(CLASS_DIR_PREFIX)
        and _path.name[len(CLASS_DIR_PREFIX):].isdigit()
    }


def _config(config):
    return resolve_config() if config is None else config


def _result(outputs, errors):
    return CommandResult(1 if errors else 0, outputs, errors)


def _error_records(errors):
    return [dict(file=_stem, error=_msg) for _stem, _msg in errors]


def _write_or_print(text, out):
    if out is None:
        print(text, end='')
    else:
        Path(out).write_text(text, encoding='utf-8')
        logging.info('Wrote `%s`.', out)


def load_split(spec):
    """Bias split from a bias-split JSON file or a reference split name."""
    if spec in REFERENCE_SPLITS and not Path(spec).exists():
        return load_reference_split(spec)
    record = load_json(spec, BIAS_SPLIT_RECORD)
    try:
        return BiasSplit.from_record(record)
    except ValueError as exc:
        raise FileFormatError(f'`{spec}`: {exc}') from exc


##############################################################################
# warp

def _copy_or_save(original, warped, source_path, out_path):
    """Copy the source file if nothing changed, so identity warps are byte-exact."""
    if warped == original:
        shutil.copyfile(source_path, out_path)
    else:
        save_label_map(warped, out_path)


def warp_file(label_path, edge_path, instance_path, out_path, instance_out,
        warp_config, n_classes, ignore_id, seed):
    """Warp one label map, and its instance map if given; return the manifest entry."""
    label = load_label_map(label_path, n_classes=n_classes, ignore_id=ignore_id)
    if edge_path is None:
        edge = label_boundary_edges(label)
    else:
        edge = load_edge_map(edge_path)
        check_dimensions(label, edge)
    instance = None
    if instance_path is not None:
        instance = load_label_map(instance_path, ignore_id=ignore_id)
        check_dimensions(label, instance)
    transform = None
    try:
        plan = plan_warp(
            edge, n_keypoints=warp_config.n_keypoints, tau=warp_config.tau,
            max_shift=warp_config.max_shift, lambda_reg=warp_config.lambda_reg,
            sampling=warp_config.sampling, seed=seed,
        )
    except NoBoundaryError as exc:
        logging.warning('%s: %s; copied unchanged.', Path(label_path).name, exc)
        status, max_displacement = 'no-boundary', 0.0
    except DegenerateControlPoints as exc:
        logging.warning('%s: %s; copied unchanged.', Path(label_path).name, exc)
        status, max_displacement = 'degenerate', 0.0
    else:
        status, max_displacement = 'warped', plan.max_displacement
        transform = plan.transform
    for grid, source, target in ((label, label_path, out_path), (instance, instance_path, instance_out)):
        if grid is None:
            continue
        if transform is None:
            shutil.copyfile(source, target)
        else:
            _copy_or_save(grid, warp_label_map(grid, transform, border=warp_config.border), source, target)
    return dict(
        label=Path(out_path).name,
        instance=None if instance is None else Path(instance_out).name,
        seed=seed,
        n_keypoints=warp_config.n_keypoints,
        max_displacement=max_displacement,
        status=status,
    )


@scriptable
def warp(
        config, label_dir, out_dir, *,
        edge_dir: Path=None, instance_dir: Path=None,
        n_keypoints: int=None, tau: float=None, max_shift: float=None,
        lambda_reg: float=None, border: str=None, sampling: str=None,
    ):
    """
    Warp label maps with random thin-plate splines seeded on edge pixels.

    edge_dir: directory of edge maps paired by file name (default: label boundaries)
    instance_dir: directory of instance maps to warp along with the labels
    n_keypoints: number of key-points per image (default: 64)
    tau: edge strength threshold for key-points (default: 0.5)
    max_shift: maximum key-point shift in pixels (default: 4)
    lambda_reg: thin-plate spline regularisation (default: 0.001)
    border: out-of-image pixels, `clamp` or `ignore-fill` (default: clamp)
    sampling: key-points from `boundary` pixels or `random` pixels (default: boundary)
    """
    config = _config(config).update(
        'warp', n_keypoints=n_keypoints, tau=tau, max_shift=max_shift,
        lambda_reg=lambda_reg, border=border, sampling=sampling,
    )
    out_dir = Path(out_dir)
    labels = list_stems(label_dir)
    edges = {}
    if edge_dir is None:
        logging.info('No edge maps given, using label boundaries.')
    else:
        edges = {_stem: _edge for _stem, _, _edge in pair_files(label_dir, edge_dir)}
    instances = {}
    if instance_dir is not None:
        instances = {_stem: _inst for _stem, _, _inst in pair_files(label_dir, instance_dir)}
        (out_dir / INSTANCE_DIR).mkdir(parents=True, exist_ok=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    stems = sorted(labels)
    items = [
        (
            labels[_stem], edges.get(_stem), instances.get(_stem),
            out_dir / labels[_stem].name, out_dir / INSTANCE_DIR / labels[_stem].name,
            config.warp, config.eval.n_classes, config.eval.ignore_id,
            derive_seed(config.seed, _index),
        )
        for _index, _stem in enumerate(stems)
    ]
    entries, errors = [], []
    for stem, result in zip(stems, map_files(warp_file, items, config.io.workers)):
        if isinstance(result, Exception):
            logging.error('%s: %s', stem, result)
            errors.append((stem, str(result)))
        else:
            entries.append(result)
    manifest = out_dir / MANIFEST
    save_json(
        dict(entries=entries, errors=_error_records(errors), config=config.as_record()),
        WARP_MANIFEST, manifest,
    )
    save_config(config, out_dir / RUN_CONFIG)
    return _result([manifest], errors)


##############################################################################
# perturb

def _classes_present(label_dir, n_classes, ignore_id):
    classes = set()
    for path in list_stems(label_dir).values():
        classes.update(load_label_map(path, n_classes=n_classes, ignore_id=ignore_id).classes())
    return sorted(classes)


def _schemes(config, scheme):
    """Perturbation schemes for a scheme option."""
    sigma0 = config.perturb.blur_sigma()
    if scheme == 'all':
        names = [
            _name for _name in SCHEME_NAMES
            if _name != 'lognormal' or config.perturb.lognormal
        ]
        if sigma0 is None:
            logging.warning('No sigma0 or dataset profile set, skipping blur scheme.')
            names.remove('blur')
    else:
        names = [scheme]
    return [
        make_scheme(_name, c0=config.perturb.c0, sigma0=sigma0, seed=config.seed)
        for _name in names
    ]


@scriptable
def perturb(
        config, image_dir, label_dir, out_dir, *,
        class_id: int=None, all_classes: bool=False, scheme: str='all',
        c0: float=None, sigma0: float=None, dataset_profile: str=None, lognormal: bool=None,
    ):
    """
    Replace the pixels of a class in every image by a perturbation.

    class_id: class to perturb
    all_classes: perturb every class present, one subdirectory per class
    scheme: `constant`, `average`, `blur`, `lognormal` or `all` (default: all)
    c0: grey value of the constant scheme (default: 128)
    sigma0: standard deviation of the blur scheme
    dataset_profile: take sigma0 from `coco-stuff`, `ade20k` or `cityscapes`
    lognormal: include the lognormal scheme in `all` (default: true)
    """
    config = _config(config).update(
        'perturb', c0=c0, dataset_profile=dataset_profile, lognormal=lognormal,
    )
    # profile only fills in sigma0 if it is still unset
    config = config.update('perturb', sigma0=sigma0 or config.perturb.blur_sigma())
    if (class_id is None) == (not all_classes):
        raise ValueError('Give exactly one of -class-id and -all-classes.')
    if scheme != 'all' and scheme not in SCHEME_NAMES:
        raise ValueError(f'Unknown scheme `{scheme}`.')
    schemes = _schemes(config, scheme)
    if all_classes:
        classes = _classes_present(label_dir, config.eval.n_classes, config.eval.ignore_id)
    else:
        classes = [class_id]
    out_dir = Path(out_dir)
    outputs, errors = [], []
    for scheme_ in schemes:
        scheme_dir = out_dir / scheme_.name if len(schemes) > 1 else out_dir
        for class_ in classes:
            target = scheme_dir / class_dir_name(class_) if all_classes else scheme_dir
            entries, class_errors = perturb_dataset(
                image_dir, label_dir, class_, scheme_, target,
                n_classes=config.eval.n_classes, ignore_id=config.eval.ignore_id,
                workers=config.io.workers,
            )
            manifest = target / MANIFEST
            save_json(
                dict(
                    entries=entries, class_id=class_, scheme=scheme_.name,
                    errors=_error_records(class_errors), config=config.as_record(),
                ),
                PERTURB_MANIFEST, manifest,
            )
            outputs.append(manifest)
            errors.extend(
                (f'{scheme_.name}/{class_dir_name(class_)}/{_stem}', _msg)
                for _stem, _msg in class_errors
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, out_dir / RUN_CONFIG)
    return _result(outputs, errors)


##############################################################################
# evaluate

@scriptable
def evaluate(
        config, gt_dir, pred_dir, *,
        out: Path=None, split: str=None, perturbed: bool=False,
        n_classes: int=None, ignore_id: int=None, allow_void: bool=None,
    ):
    """
    Compute segmentation metrics of predictions against ground truth.

    out: JSON file to write (default: standard output)
    split: bias split JSON file or reference split name, for biased/unbiased metrics
    perturbed: prediction directory holds class-NNN subdirectories; keep row NNN of each
    n_classes: number of classes (default: from the data)
    ignore_id: ground-truth id to ignore (default: 255)
    allow_void: count predictions of the ignore id as misses
    """
    config = _config(config).update(
        'eval', n_classes=n_classes, ignore_id=ignore_id, allow_void=allow_void,
    )
    if perturbed:
        record, errors = _evaluate_perturbed(config, gt_dir, pred_dir)
        kind = PERTURBED_METRICS_RECORD
    else:
        record, errors = _evaluate_real(config, gt_dir, pred_dir, split)
        kind = METRICS_RECORD
    record['config'] = config.as_record()
    if out is None:
        print(dump_json(record, kind), end='')
        outputs = []
    else:
        save_json(record, kind, out)
        outputs = [out]
    return _result(outputs, errors)


def _scan(config, gt_dir, pred_dir):
    pairs = pair_files(gt_dir, pred_dir)
    cm, errors = evaluate_pairs(
        pairs, n_classes=config.eval.n_classes, ignore_id=config.eval.ignore_id,
        allow_void=config.eval.allow_void, workers=config.io.workers,
    )
    return pairs, cm, errors


def _evaluate_real(config, gt_dir, pred_dir, split):
    pairs, cm, errors = _scan(config, gt_dir, pred_dir)
    table = per_class_metrics(cm)
    record = dict(
        n_classes=cm.n_classes,
        ignore_id=config.eval.ignore_id,
        files=len(pairs),
        errors=_error_records(errors),
        classes=table.as_records(),
        overall=overall_block(table, cm),
        absent_class_convention=ABSENT_CLASS_CONVENTION,
    )
    if split is not None:
        record['split'] = split_block(table, load_split(split))
    return record, errors


def _evaluate_perturbed(config, gt_dir, pred_root):
    class_dirs = _class_dirs(pred_root)
    if not class_dirs:
        raise FileFormatError(f'No {CLASS_DIR_PREFIX}NNN directories in `{pred_root}`.')
    rows, errors = [], []
    for class_id, pred_dir in class_dirs.items():
        pairs, cm, class_errors = _scan(config, gt_dir, pred_dir)
        if class_id >= cm.n_classes:
            cm = cm.resize(class_id + 1)
        rows.append(per_class_metrics(cm)[class_id])
        errors.extend((f'{pred_dir.name}/{_stem}', _msg) for _stem, _msg in class_errors)
    record = dict(
        ignore_id=config.eval.ignore_id,
        errors=_error_records(errors),
        classes=ClassMetricTable(rows).as_records(),
        absent_class_convention=ABSENT_CLASS_CONVENTION,
    )
    return record, errors


##############################################################################
# bias split

def _perturbed_values(path, real_table):
    record = load_json(path, PERTURBED_METRICS_RECORD)
    try:
        values = {
            int(_row['class_id']): (_row['pa'], _row['iou'])
            for _row in record['classes']
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f'`{path}`: invalid class rows: {exc}') from exc
    unknown = sorted(_id for _id in values if _id not in real_table)
    if unknown:
        raise FileFormatError(f'`{path}`: class ids {unknown} not in real metrics.')
    return values


@scriptable
def bias_split(
        config, real, *,
        constant: Path=None, average: Path=None, blur: Path=None, lognormal: Path=None,
        delta: float=None, metric: str=None, separate: bool=False, out: Path=None,
    ):
    """
    Split classes into biased and unbiased from real and perturbed metrics.

    constant: perturbed metrics for the constant scheme
    average: perturbed metrics for the average scheme
    blur: perturbed metrics for the blur scheme
    lognormal: perturbed metrics for the lognormal scheme
    delta: threshold factor in (0, 1] (default: 2/3)
    metric: decide on `pa`, `iou` or `both` (default: both)
    separate: write one split per metric kind, to OUT-pa and OUT-iou
    out: JSON file to write (default: standard output)
    """
    config = _config(config).update('eval', delta=delta, metric=metric)
    real_table = table_from_record(load_json(real, METRICS_RECORD))
    files = dict(constant=constant, average=average, blur=blur, lognormal=lognormal)
    missing = [_name for _name in SCHEME_NAMES if files[_name] is None]
    if len(missing) == len(SCHEME_NAMES):
        raise ValueError('No perturbed metrics given.')
    if missing:
        logging.warning('No perturbed metrics for schemes: %s', ', '.join(missing))
    perturbed = PerturbedMetricSet({
        _name: _perturbed_values(_path, real_table)
        for _name, _path in files.items()
        if _path is not None
    })
    if separate:
        kinds = METRICS
    else:
        kinds = (config.eval.metric,)
    outputs = []
    for kind in kinds:
        split = classify_bias(real_table, perturbed, config.eval.delta, kind)
        record = dict(split.as_record(), config=config.as_record())
        if out is None:
            print(dump_json(record, BIAS_SPLIT_RECORD), end='')
            continue
        target = Path(out)
        if separate:
            target = target.with_name(f'{target.stem}-{kind}{target.suffix}')
        save_json(record, BIAS_SPLIT_RECORD, target)
        outputs.append(target)
    return _result(outputs, [])


##############################################################################
# report

@scriptable
def report(config, *metrics_files, split: str=None, fid: str=None, format: str='text', out: Path=None):
    """
    Tabulate metrics of one or more runs; the first run is the baseline for delta rows.

    split: bias split JSON file or reference split name, for biased/unbiased columns
    fid: comma-separated externally computed FID values, one per run
    format: `text` or `csv` (default: text)
    out: file to write (default: standard output)
    """
    if not metrics_files:
        raise ValueError('No metrics files given.')
    if format not in FORMATS:
        raise ValueError(f'Unknown report format `{format}`; use one of {", ".join(FORMATS)}.')
    runs = [(Path(_file).stem, load_json(_file, METRICS_RECORD)) for _file in metrics_files]
    fids = None
    if fid is not None:
        fids = [to_float(_v) for _v in fid.split(',')]
    columns, rows = build_report(
        runs, split=None if split is None else load_split(split), fids=fids,
    )
    _write_or_print(FORMATS[format](columns, rows), out)
    return _result([] if out is None else [out], [])


##############################################################################
# synthetic data

@scriptable
def synth(config, out_dir, *, n_images: int=8, size: int=32, predict: Path=None):
    """
    Write the synthetic demonstration dataset, or predictions for images.

    n_images: number of images (default: 8)
    size: width and height in pixels (default: 32)
    predict: image directory tree to write nearest-colour predictions for, mirrored in OUT_DIR
    """
    config = _config(config)
    out_dir = Path(out_dir)
    if predict is None:
        dirs = write_synthetic_dataset(out_dir, n_images=n_images, size=size, seed=config.seed)
        return _result(list(dirs.values()), [])
    predict = Path(predict)
    image_dirs = sorted(set(_path.parent for _path in predict.rglob('*.png')))
    outputs = []
    for image_dir in image_dirs:
        target = out_dir / image_dir.relative_to(predict)
        predict_directory(image_dir, target)
        outputs.append(target)
    return _result(outputs, [])
