"""Communication-aware coverage potentials.

The region of interest is the concentration ellipse of a bivariate Gaussian.
The unary potential is the expected best received power over that region
(max over the acting agent and the rest of its neighborhood); the pairwise
potential is the received power between two agents. Both are mapped from
dBm into (0, 1] by an affine squash so that they are strictly positive.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .game import PotentialPair
from .topology import LinkModelParams

__all__ = [
    "RoiGaussian",
    "QuadratureGrid",
    "chi2_quantile_2dof",
    "build_grid",
    "squash",
    "unary_coverage",
    "pairwise_coverage",
    "make_coverage_potentials",
]

SQUASH_EPS = 1e-6


def chi2_quantile_2dof(p: float) -> float:
    """Quantile of the chi-square distribution with two degrees of freedom."""
    if not 0 < p < 1:
        raise ValueError("probability must lie in (0, 1)")
    return -2.0 * math.log1p(-p)


def _default_cov():
    return np.diag([200.0**2, 200.0**2])


@dataclass(frozen=True, eq=False)
class RoiGaussian:
    mean: np.ndarray = field(default_factory=lambda: np.zeros(2))
    covariance: np.ndarray = field(default_factory=_default_cov)
    confidence: float = 0.95

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(2)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (2, 2) or not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise ValueError("ROI needs a finite 2-vector mean and 2x2 covariance")
        if cov[0, 1] != cov[1, 0]:
            raise ValueError("covariance must be symmetric")
        if not (cov[0, 0] > 0 and np.linalg.det(cov) > 0):
            raise ValueError("covariance must be positive definite")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def radius2(self) -> float:
        """Squared Mahalanobis radius of the concentration ellipse."""
        return chi2_quantile_2dof(self.confidence)

    def mahalanobis2(self, points) -> np.ndarray:
        diff = np.asarray(points, dtype=np.float64) - self.mean
        return np.einsum("ni,ij,nj->n", diff, np.linalg.inv(self.covariance), diff)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    points: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.points.shape[0]


def build_grid(roi: RoiGaussian, resolution: int = 40) -> QuadratureGrid:
    """Regular grid over the ellipse's bounding box, masked to the ellipse,
    weighted by the Gaussian density and renormalized to sum 1."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    r2 = roi.radius2
    half = np.sqrt(r2 * np.diag(roi.covariance))
    xs = np.linspace(roi.mean[0] - half[0], roi.mean[0] + half[0], resolution)
    ys = np.linspace(roi.mean[1] - half[1], roi.mean[1] + half[1], resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    m2 = roi.mahalanobis2(pts)
    keep = m2 <= r2
    pts = np.ascontiguousarray(pts[keep])
    # constant cell area cancels in the renormalization
    dens = np.exp(-0.5 * m2[keep])
    weights = dens / dens.sum()
    pts.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureGrid(points=pts, weights=weights)


def squash(value_dbm, link: LinkModelParams):
    """Affine map of dBm onto (0, 1]: sensitivity -> eps, peak power -> 1."""
    lo, hi = link.rx_sensitivity_dbm, link.peak_power_dbm
    return np.clip((np.asarray(value_dbm, dtype=np.float64) - lo) / (hi - lo), SQUASH_EPS, 1.0)


def _link_args(link):
    return (link.tx_power_dbm, link.ref_loss_db, link.path_loss_exponent, link.ref_distance_m)


def _as_points(p):
    return np.ascontiguousarray(np.asarray(p, dtype=np.float64).reshape(-1, 3))


def unary_coverage_batch(candidates, context, grid: QuadratureGrid, link: LinkModelParams) -> np.ndarray:
    args = _link_args(link)
    floor = kernels.max_power_field(_as_points(context), grid.points, *args)
    raw = kernels.coverage_sums(_as_points(candidates), grid.points, grid.weights, floor, *args)
    return squash(raw, link)


def unary_coverage(candidate, context, grid: QuadratureGrid, link: LinkModelParams) -> float:
    """Expected best received power over the ROI, squashed into (0, 1]."""
    if len(grid) == 0:
        raise ValueError("quadrature grid is empty")
    return float(unary_coverage_batch(candidate, context, grid, link)[0])


def pairwise_coverage_batch(a, b, link: LinkModelParams) -> np.ndarray:
    a, b = _as_points(a), _as_points(b)
    diff = a[:, None, :] - b[None, :, :]
    d = np.maximum(np.sqrt(np.sum(diff * diff, axis=-1)), link.ref_distance_m)
    power = link.peak_power_dbm - 10.0 * link.path_loss_exponent * np.log10(d / link.ref_distance_m)
    return squash(power, link)


def pairwise_coverage(a, b, link: LinkModelParams) -> float:
    """Received power between two agents, squashed into (0, 1]."""
    return float(pairwise_coverage_batch(a, b, link)[0, 0])


def make_coverage_potentials(roi: RoiGaussian, resolution: int, link: LinkModelParams) -> PotentialPair:
    grid = build_grid(roi, resolution)
    if len(grid) == 0:
        raise ValueError("ROI grid has no interior points")
    return PotentialPair(
        unary=lambda c, ctx: unary_coverage(c, ctx, grid, link),
        pairwise=lambda a, b: pairwise_coverage(a, b, link),
        unary_batch=lambda cs, ctx: unary_coverage_batch(cs, ctx, grid, link),
        pairwise_batch=lambda a, b: pairwise_coverage_batch(a, b, link),
    )
