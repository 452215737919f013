"""
sisaug - label map warping augmentation and bias-aware segmentation evaluation

licence: https://opensource.org/licenses/MIT
"""

# we need at least Python 3.8
import sys as _sys
assert _sys.version_info >= (3, 8)

from .constants import VERSION as __version__
from .raster import (
    RasterImage, LabelMap, EdgeMap, ClassMask, DimensionError,
    gaussian_blur, label_boundary_edges,
)
from .storage import (
    load_label_map, save_label_map, load_image, save_image,
    load_edge_map, save_edge_map, FileFormatError, PairingError, SchemaError,
)
from .config import ToolConfig, DATASET_PROFILES, sigma_from_kernel_size
from .tps import (
    KeyPointSet, TpsTransform, sample_boundary_keypoints, jitter_keypoints,
    fit_tps, evaluate_tps, bending_energy, warp_label_map, warp_augment,
)
from .perturb import (
    Constant, Average, GaussianBlur, Lognormal, class_mask, apply_perturbation,
    perturb_dataset,
)
from .metrics import (
    ConfusionMatrix, ClassMetricTable, accumulate_confusion, merge_confusion,
    per_class_metrics, aggregate,
)
from .bias import BiasSplit, PerturbedMetricSet, classify_bias, load_reference_split
from .objectives import (
    LossWeights, edge_loss, adversarial_loss, feature_matching_loss,
    perceptual_loss, total_generator_loss,
)
from .scripting import get_scriptables as _get_scriptables
from . import commands as _commands


# make dash-versions of commands available through dict
operations = {
    _name.replace('_', '-'): _func
    for _name, _func in _get_scriptables(_commands).items()
}
