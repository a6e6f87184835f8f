"""Classical depth-scan MCL measurement model over the same pose grid.

Scores are a Gaussian on per-ray depth residuals with a squared-error
cutoff, evaluated densely over location x rotation; grid normalization
and peak extraction are shared with the latent localizer.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._geometry import TWO_PI
from .localizer import (DEFAULT_CELL, DEFAULT_NUM_ANGLES, PosteriorGrid,
                        _grid_geometry, extract_peaks)
from .raycast import lidar_scan

CUTOFF_SIGMAS = 3.0


@dataclass
class ScanLikelihoodConfig:
    num_rays: int = 72
    sigma_d: float = 0.25     # depth residual bandwidth, metres
    max_range: float = 30.0   # depths beyond this compare as misses

    def __post_init__(self):
        if self.num_rays < 1:
            raise ValueError("num_rays must be >= 1")
        if self.sigma_d <= 0.0:
            raise ValueError("sigma_d must be positive")

    @property
    def cutoff(self):
        return (CUTOFF_SIGMAS * self.sigma_d) ** 2


def _ray_costs(query_depths, sim_depths, cfg):
    q = np.where(query_depths > cfg.max_range, np.inf, query_depths)
    s = np.where(sim_depths > cfg.max_range, np.inf, sim_depths)
    q_inf = ~np.isfinite(q)
    s_inf = ~np.isfinite(s)
    delta_sq = np.where(q_inf | s_inf, cfg.cutoff, (np.where(q_inf, 0, q)
                                                    - np.where(s_inf, 0, s)) ** 2)
    delta_sq = np.where(q_inf & s_inf, 0.0, delta_sq)
    return np.minimum(delta_sq, cfg.cutoff)


def scan_likelihood(query, fm, pose, cfg=None):
    """Likelihood of observing the query scan at a pose, in (0, 1].

    Simulates a scan at the pose (rays rotated by the pose yaw) and scores
    exp(-mean(min(depth residual^2, cutoff)) / (2 sigma^2)). Two infinite
    depths agree; a one-sided miss costs the cutoff.
    """
    cfg = cfg or ScanLikelihoodConfig(num_rays=query.num_rays)
    if cfg.num_rays != query.num_rays:
        raise ValueError("config ray count disagrees with the query scan")
    t, theta = pose
    sim = lidar_scan(fm, t, cfg.num_rays, yaw=float(theta))
    costs = _ray_costs(query.depths, sim.depths, cfg)
    return float(math.exp(-costs.mean() / (2.0 * cfg.sigma_d ** 2)))


def mcl_localize(query, fm, cell=DEFAULT_CELL, num_angles=DEFAULT_NUM_ANGLES,
                 cfg=None, threshold=0.0, topk=3):
    """Dense grid x rotation evaluation of scan_likelihood.

    Returns (PosteriorGrid, peaks): the same grid type, normalization and
    3x3 NMS as the latent pipeline; no refinement stage.
    """
    cfg = cfg or ScanLikelihoodConfig(num_rays=query.num_rays)
    if cfg.num_rays != query.num_rays:
        raise ValueError("config ray count disagrees with the query scan")
    origin, w, h, centers = _grid_geometry(fm, cell)
    flat = np.ascontiguousarray(centers.reshape(-1, 2))
    free = _kernels.free_mask_for_cells(flat, fm.edges)
    if not free.any():
        raise ValueError("no grid cell centres lie in free space")
    q_depths = np.where(query.depths > cfg.max_range, np.inf, query.depths)
    scores_flat, best_k = _kernels.mcl_grid_scores(
        flat[free], fm.edges, q_depths, num_angles,
        cfg.sigma_d, cfg.cutoff, cfg.max_range)
    free_mask = free.reshape(w, h)
    scores = np.zeros((w, h))
    theta = np.zeros((w, h))
    scores[free_mask] = scores_flat
    theta[free_mask] = TWO_PI * best_k / num_angles
    grid = PosteriorGrid(origin=origin, cell=float(cell), scores=scores,
                         best_theta=theta, free_mask=free_mask)
    peaks = extract_peaks(grid, threshold)
    return grid, peaks[:topk]
