"""
sisaug.tps - thin-plate spline warping of label maps

licence: https://opensource.org/licenses/MIT
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .basetypes import Point, derive_seed
from .config import WarpConfig
from .raster import label_boundary_edges, check_dimensions


class NoBoundaryError(ValueError):
    """Edge map has no pixels to sample key-points from."""


class DegenerateControlPoints(ValueError):
    """Control points do not determine a thin-plate spline."""


# relative tolerance on the residual of the solved system
_RESIDUAL_TOLERANCE = 1e-6


##############################################################################
# key-points

class KeyPointSet:
    """Key-points as (u, v) = (row, column), optionally tied to an image rectangle."""

    def __init__(self, points=(), *, width=None, height=None):
        points = np.array(points, dtype=np.float64).reshape(-1, 2)
        points.setflags(write=False)
        self._points = points
        self.width = width
        self.height = height
        if not np.all(np.isfinite(points)):
            raise ValueError('Key-points must be finite.')
        if height is not None and points.size and (
                points[:, 0].min() < 0 or points[:, 0].max() > height - 1
            ):
            raise ValueError('Key-point outside image rectangle.')
        if width is not None and points.size and (
                points[:, 1].min() < 0 or points[:, 1].max() > width - 1
            ):
            raise ValueError('Key-point outside image rectangle.')

    @classmethod
    def of(cls, points):
        """Wrap array or sequence; pass through a KeyPointSet."""
        if isinstance(points, KeyPointSet):
            return points
        return cls(points)

    @property
    def points(self):
        """(n, 2) read-only array of (u, v)."""
        return self._points

    def __len__(self):
        return len(self._points)

    def __iter__(self):
        return (Point(*_p) for _p in self._points.tolist())

    def __eq__(self, other):
        if not isinstance(other, KeyPointSet):
            return NotImplemented
        return bool(np.array_equal(self._points, other._points))

    __hash__ = None

    def __repr__(self):
        return f'KeyPointSet(n={len(self)}, width={self.width}, height={self.height})'

    def clamp(self, points):
        """New set in the same rectangle, with points clamped to it."""
        points = np.array(points, dtype=np.float64).reshape(-1, 2)
        if self.height is not None:
            points[:, 0] = np.clip(points[:, 0], 0, self.height - 1)
        if self.width is not None:
            points[:, 1] = np.clip(points[:, 1], 0, self.width - 1)
        return KeyPointSet(points, width=self.width, height=self.height)


def sample_boundary_keypoints(edge, n, tau, seed):
    """
    Draw n key-points uniformly, with replacement, from pixels with edge strength >= tau.

    edge: EdgeMap to sample from
    n: number of key-points
    tau: edge strength threshold in [0, 1]
    seed: generator seed
    """
    if n < 1:
        raise ValueError(f'Number of key-points must be at least 1, not {n}.')
    if not 0 <= tau <= 1:
        raise ValueError(f'Threshold must be in [0, 1], not {tau}.')
    # argwhere lists candidates in row-major order
    candidates = np.argwhere(edge.data >= tau)
    if not len(candidates):
        raise NoBoundaryError('no boundary pixels above threshold')
    rng = np.random.default_rng(seed)
    chosen = candidates[rng.integers(0, len(candidates), size=n)]
    return KeyPointSet(chosen, width=edge.width, height=edge.height)


def sample_random_keypoints(width, height, n, seed):
    """Draw n key-points uniformly from all pixels of a rectangle."""
    if n < 1:
        raise ValueError(f'Number of key-points must be at least 1, not {n}.')
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, height, size=n)
    cols = rng.integers(0, width, size=n)
    return KeyPointSet(np.stack([rows, cols], axis=1), width=width, height=height)


def jitter_keypoints(fixed, a, seed):
    """
    Shift each key-point by independent uniform offsets in (-a, a) per axis.
    Results are clamped to the image rectangle.
    """
    if not a >= 0:
        raise ValueError(f'Maximum shift must not be negative, not {a}.')
    fixed = KeyPointSet.of(fixed)
    if a == 0:
        return fixed
    rng = np.random.default_rng(seed)
    shifts = rng.uniform(-a, a, size=(len(fixed), 2))
    return fixed.clamp(fixed.points + shifts)


##############################################################################
# thin-plate spline

def tps_kernel(points, centres):
    """Radial kernel U(r) = r^2 log r^2, with U(0) = 0."""
    r2 = cdist(points, centres, 'sqeuclidean')
    # log(1) == 0 where r == 0
    return r2 * np.log(np.where(r2 > 0, r2, 1))


def _affine_basis(points):
    """Rows of [1, u, v]."""
    return np.hstack([np.ones((len(points), 1)), points])


class TpsTransform:
    """Thin-plate spline: affine part plus radial kernels on control points."""

    def __init__(self, control_points, affine, weights, lambda_reg=0.0):
        """
        control_points: (n, 2) array of (u, v)
        affine: 2x3 matrix acting on [u, v, 1]
        weights: (n, 2) non-affine coefficients
        lambda_reg: regularisation used in fitting
        """
        self.control_points = np.array(control_points, dtype=np.float64).reshape(-1, 2)
        self.affine = np.array(affine, dtype=np.float64).reshape(2, 3)
        self.weights = np.array(weights, dtype=np.float64).reshape(-1, 2)
        self.lambda_reg = float(lambda_reg)
        if len(self.weights) != len(self.control_points):
            raise ValueError('Need one pair of weights per control point.')
        for array in (self.control_points, self.affine, self.weights):
            array.setflags(write=False)

    def __repr__(self):
        return (
            f'TpsTransform(n={len(self.control_points)}, '
            f'affine={self.affine.tolist()}, lambda_reg={self.lambda_reg})'
        )

    @classmethod
    def identity(cls, control_points=()):
        """Transform mapping every point to itself."""
        control_points = np.array(control_points, dtype=np.float64).reshape(-1, 2)
        return cls(
            control_points,
            [[1, 0, 0], [0, 1, 0]],
            np.zeros(control_points.shape),
        )

    @classmethod
    def translation(cls, du, dv):
        """Transform shifting every point by (du, dv)."""
        return cls((), [[1, 0, du], [0, 1, dv]], ())

    def transform(self, points):
        """Map an (m, 2) array of (u, v) points."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        mapped = points @ self.affine[:, :2].T + self.affine[:, 2]
        if len(self.control_points):
            mapped = mapped + tps_kernel(points, self.control_points) @ self.weights
        return mapped

    def __call__(self, point):
        return evaluate_tps(self, point)

    def is_affine(self, tolerance=0.0):
        """No non-affine part."""
        return not self.weights.size or bool(np.abs(self.weights).max() <= tolerance)

    def inverse_fit(self, lambda_reg=None):
        """Approximate inverse, by refitting with fixed and moving roles swapped."""
        if lambda_reg is None:
            lambda_reg = self.lambda_reg
        if not len(self.control_points):
            # affine only: invert exactly
            matrix = np.vstack([self.affine, [0, 0, 1]])
            return TpsTransform((), np.linalg.inv(matrix)[:2], (), lambda_reg)
        moving = self.transform(self.control_points)
        return fit_tps(moving, self.control_points, lambda_reg)


def fit_tps(fixed, moving, lambda_reg=0.0):
    """
    Fit the thin-plate spline taking each fixed point to its moving point.

    fixed: control points, KeyPointSet or (n, 2) array
    moving: target points, same length
    lambda_reg: regularisation added to the kernel diagonal; 0 interpolates exactly
    """
    fixed = KeyPointSet.of(fixed).points
    moving = KeyPointSet.of(moving).points
    if len(fixed) != len(moving):
        raise ValueError(
            f'Fixed and moving point sets differ in size: {len(fixed)} != {len(moving)}.'
        )
    n = len(fixed)
    if n < 3:
        raise ValueError(f'Need at least 3 control points, not {n}.')
    if lambda_reg < 0:
        raise ValueError(f'Regularisation must not be negative, not {lambda_reg}.')
    basis = _affine_basis(fixed)
    if np.linalg.matrix_rank(basis) < 3:
        raise DegenerateControlPoints('degenerate control points')
    if lambda_reg == 0 and len(np.unique(fixed, axis=0)) < n:
        raise DegenerateControlPoints('degenerate control points')
    system = np.zeros((n+3, n+3))
    system[:n, :n] = tps_kernel(fixed, fixed) + lambda_reg * np.eye(n)
    system[:n, n:] = basis
    system[n:, :n] = basis.T
    rhs = np.zeros((n+3, 2))
    rhs[:n] = moving
    try:
        solution = scipy.linalg.solve(system, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise DegenerateControlPoints('degenerate control points') from exc
    residual = np.abs(system @ solution - rhs).max()
    scale = max(1.0, np.abs(rhs).max())
    if not np.all(np.isfinite(solution)) or residual > _RESIDUAL_TOLERANCE * scale:
        raise DegenerateControlPoints('degenerate control points')
    weights = solution[:n]
    # rows of solution[n:] act on 1, u, v; reorder to act on u, v, 1
    coeffs = solution[n:]
    affine = np.stack([coeffs[1], coeffs[2], coeffs[0]], axis=1)
    logging.debug('Fitted TPS on %d control points, lambda=%s', n, lambda_reg)
    return TpsTransform(fixed, affine, weights, lambda_reg)


def evaluate_tps(t, point):
    """Map a single (u, v) point."""
    return Point(*t.transform(np.asarray(point, dtype=np.float64))[0].tolist())


def bending_energy(t):
    """Bending energy w^T K w, summed over both output axes."""
    if not len(t.control_points):
        return 0.0
    kernel = tps_kernel(t.control_points, t.control_points)
    return float(np.sum(t.weights * (kernel @ t.weights)))


##############################################################################
# warping

DIRECTIONS = ('backward', 'forward')
BORDERS = ('clamp', 'ignore-fill')


def warp_label_map(label, t, direction='backward', border='clamp'):
    """
    Resample a label map through a transform, nearest neighbour.

    direction: `backward` if t maps output to source coordinates,
        `forward` if t maps source to output (inverted by refitting)
    border: `clamp` to the nearest border pixel, or `ignore-fill` with the ignore id
    """
    if direction not in DIRECTIONS:
        raise ValueError(f'Direction must be one of {DIRECTIONS}, not `{direction}`.')
    if border not in BORDERS:
        raise ValueError(f'Border must be one of {BORDERS}, not `{border}`.')
    if direction == 'forward':
        t = t.inverse_fit()
    height, width = label.height, label.width
    rows, cols = np.mgrid[0:height, 0:width]
    grid = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)
    source = np.floor(t.transform(grid) + 0.5)
    u = source[:, 0]
    v = source[:, 1]
    outside = (u < 0) | (u > height-1) | (v < 0) | (v > width-1)
    u = np.clip(u, 0, height-1).astype(np.int64)
    v = np.clip(v, 0, width-1).astype(np.int64)
    ids = label.data[u, v]
    if border == 'ignore-fill' and np.any(outside):
        if label.ignore_id is None:
            raise ValueError('ignore-fill needs a label map with an ignore id.')
        ids = np.where(outside, label.ignore_id, ids)
    return label.modify(ids.reshape(height, width))


@dataclass(frozen=True)
class WarpPlan:
    """Key-points and fitted transform for one warp."""
    fixed: KeyPointSet
    moving: KeyPointSet
    transform: TpsTransform
    seed: int

    @property
    def max_displacement(self):
        """Largest per-axis key-point shift."""
        if not len(self.fixed):
            return 0.0
        return float(np.abs(self.moving.points - self.fixed.points).max())


def plan_warp(edge, *, n_keypoints=64, tau=0.5, max_shift=4.0, lambda_reg=1e-3,
        sampling='boundary', seed=0):
    """
    Sample key-points, jitter them and fit the backward transform.

    The spline is fitted from moving to fixed points so that backward sampling
    moves the content at each fixed point to its moving point.
    """
    if sampling == 'boundary':
        fixed = sample_boundary_keypoints(edge, n_keypoints, tau, derive_seed(seed, 0))
    elif sampling == 'random':
        fixed = sample_random_keypoints(edge.width, edge.height, n_keypoints, derive_seed(seed, 0))
    else:
        raise ValueError(f'Unknown key-point sampling `{sampling}`.')
    moving = jitter_keypoints(fixed, max_shift, derive_seed(seed, 1))
    if max_shift == 0:
        transform = TpsTransform.identity()
    else:
        transform = fit_tps(moving, fixed, lambda_reg)
    return WarpPlan(fixed, moving, transform, seed)


def warp_augment(label, edge=None, config=None, seed=0):
    """
    Warp a label map with a random thin-plate spline seeded on edge pixels.

    label: LabelMap to warp
    edge: EdgeMap to sample key-points from; label boundaries if None
    config: WarpConfig; defaults if None
    seed: generator seed
    """
    config = config or WarpConfig()
    if edge is None:
        logging.info('No edge map given, using label boundaries.')
        edge = label_boundary_edges(label)
    check_dimensions(label, edge)
    plan = plan_warp(
        edge,
        n_keypoints=config.n_keypoints, tau=config.tau, max_shift=config.max_shift,
        lambda_reg=config.lambda_reg, sampling=config.sampling, seed=seed,
    )
    return warp_label_map(label, plan.transform, border=config.border)
