"""
sisaug.objectives - reference loss terms for semantic image synthesis training

licence: https://opensource.org/licenses/MIT
"""

from collections import namedtuple

import numpy as np

from .raster import check_dimensions


# probability clamp for the log loss
EPSILON = 1e-7

MODES = ('log', 'hinge', 'lsgan')
SIDES = ('generator', 'discriminator')


class LossWeights(namedtuple('LossWeights', 'lambda_fm lambda_p lambda_e')):
    """Weights of the feature-matching, perceptual and edge loss terms."""

    def __new__(cls, lambda_fm=10.0, lambda_p=10.0, lambda_e=10.0):
        self = super().__new__(cls, float(lambda_fm), float(lambda_p), float(lambda_e))
        if min(self) < 0:
            raise ValueError(f'Loss weights must not be negative: {self}')
        return self


# adversarial mode and weights of common baselines
LossProfile = namedtuple('LossProfile', 'mode weights')

BASELINE_PROFILES = {
    'pix2pixhd': LossProfile('lsgan', LossWeights(10, 10, 10)),
    'spade': LossProfile('hinge', LossWeights(10, 10, 10)),
    'cc-fpse': LossProfile('hinge', LossWeights(20, 10, 10)),
}

# perceptual layer weights commonly used with VGG19 relu1_1 .. relu5_1
VGG_LAYER_WEIGHTS = (1/32, 1/16, 1/8, 1/4, 1.0)


def _as_array(values, name='input'):
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise ValueError(f'Non-finite values in {name}.')
    return array


##############################################################################
# edge loss

def _edge_difference(e_real, e_fake):
    check_dimensions(e_real, e_fake)
    return e_real.data - e_fake.data


def edge_loss(e_real, e_fake, mean_squared=False):
    """
    Euclidean norm of the difference of two edge maps.

    mean_squared: use the mean squared difference instead
    """
    diff = _edge_difference(e_real, e_fake)
    if mean_squared:
        return float(np.mean(diff**2)) if diff.size else 0.0
    return float(np.sqrt(np.sum(diff**2)))


def edge_loss_gradient(e_real, e_fake):
    """
    Subgradient of the edge loss with respect to the fake edge map.
    Zero where the maps are identical.
    """
    diff = _edge_difference(e_real, e_fake)
    norm = np.sqrt(np.sum(diff**2))
    if not norm:
        return np.zeros(diff.shape)
    return -diff / norm


##############################################################################
# adversarial losses

def _log_loss(d_real, d_fake, side, probabilities):
    def log_d(values):
        if probabilities:
            return np.log(np.clip(values, EPSILON, 1-EPSILON))
        # log sigmoid, stable for large |x|
        return -np.logaddexp(0, -values)

    def log_one_minus_d(values):
        if probabilities:
            return np.log(np.clip(1 - values, EPSILON, 1-EPSILON))
        return -np.logaddexp(0, values)

    if side == 'generator':
        return -np.mean(log_d(d_fake))
    return -np.mean(log_d(d_real)) - np.mean(log_one_minus_d(d_fake))


def _hinge_loss(d_real, d_fake, side):
    if side == 'generator':
        return -np.mean(d_fake)
    return (
        -np.mean(np.minimum(0, -1 + d_real))
        - np.mean(np.minimum(0, -1 - d_fake))
    )


def _lsgan_loss(d_real, d_fake, side):
    if side == 'generator':
        return 0.5 * np.mean((d_fake - 1)**2)
    return 0.5 * np.mean((d_real - 1)**2) + 0.5 * np.mean(d_fake**2)


def adversarial_loss(d_real, d_fake, side='generator', mode='hinge', probabilities=False):
    """
    Adversarial loss from discriminator outputs, averaged over all elements.

    d_real: discriminator outputs on real images; needed for the discriminator side
    d_fake: discriminator outputs on generated images
    side: `generator` or `discriminator`
    mode: `log`, `hinge` or `lsgan`
    probabilities: for log mode, outputs are probabilities instead of logits
    """
    if side not in SIDES:
        raise ValueError(f'side must be one of {", ".join(SIDES)}, not `{side}`.')
    if mode not in MODES:
        raise ValueError(f'mode must be one of {", ".join(MODES)}, not `{mode}`.')
    d_fake = _as_array(d_fake, 'd_fake')
    if side == 'discriminator':
        if d_real is None:
            raise ValueError('Discriminator loss needs outputs on real images.')
        d_real = _as_array(d_real, 'd_real')
    if mode == 'log':
        return float(_log_loss(d_real, d_fake, side, probabilities))
    if mode == 'hinge':
        return float(_hinge_loss(d_real, d_fake, side))
    return float(_lsgan_loss(d_real, d_fake, side))


##############################################################################
# feature losses

def _layer_differences(real, fake):
    """Mean absolute difference per layer of two feature stacks."""
    real, fake = list(real), list(fake)
    if len(real) != len(fake):
        raise ValueError(f'Feature stacks differ in depth: {len(real)} != {len(fake)}.')
    diffs = []
    for index, (layer_real, layer_fake) in enumerate(zip(real, fake)):
        layer_real = _as_array(layer_real, f'layer {index}')
        layer_fake = _as_array(layer_fake, f'layer {index}')
        if layer_real.shape != layer_fake.shape:
            raise ValueError(
                f'Layer {index} shapes differ: {layer_real.shape} != {layer_fake.shape}.'
            )
        diffs.append(float(np.mean(np.abs(layer_real - layer_fake))))
    return diffs


def feature_matching_loss(real, fake):
    """Mean over layers of the mean absolute feature difference."""
    diffs = _layer_differences(real, fake)
    if not diffs:
        return 0.0
    return float(np.mean(diffs))


def perceptual_loss(real, fake, layer_weights=VGG_LAYER_WEIGHTS):
    """Weighted sum over layers of the mean absolute feature difference."""
    diffs = _layer_differences(real, fake)
    layer_weights = list(layer_weights)
    if len(layer_weights) != len(diffs):
        raise ValueError(
            f'Need one weight per layer: {len(layer_weights)} weights for {len(diffs)} layers.'
        )
    return float(sum(_w * _d for _w, _d in zip(layer_weights, diffs)))


def total_generator_loss(adv, fm, p, e, weights=LossWeights()):
    """Weighted sum of the generator's loss terms."""
    terms = _as_array([adv, fm, p, e], 'loss terms')
    adv, fm, p, e = terms.tolist()
    return adv + weights.lambda_fm * fm + weights.lambda_p * p + weights.lambda_e * e
