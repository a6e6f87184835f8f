import math

import numpy as np
import pytest

from floorloc.baseline_mcl import (ScanLikelihoodConfig, mcl_localize,
                                   scan_likelihood)
from floorloc.floormap import build_floormap
from floorloc.localizer import PosteriorGrid
from floorloc.raycast import DepthScan, lidar_scan

TWO_PI = 2.0 * math.pi


def square_map(side=4.0):
    ring = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]]
    return build_floormap([(ring, ["wall"] * 4)])


def l_shaped_map():
    ring = [[0, 0], [6, 0], [6, 3], [3, 3], [3, 6], [0, 6]]
    return build_floormap([(ring, ["wall"] * 6)])


class TestScanLikelihood:
    def test_same_pose_scores_one(self):
        fm = l_shaped_map()
        pose = (np.array([1.3, 2.1]), 0.77)
        query = lidar_scan(fm, pose[0], 72, yaw=pose[1])
        assert scan_likelihood(query, fm, pose) == 1.0

    def test_uniform_offset_closed_form(self):
        # square of half-side 1+sigma around the pose: 4 axis rays hit at
        # 1+sigma; query depths of 1.0 give exp(-0.5) exactly
        sigma = 0.25
        half = 1.0 + sigma
        ring = [[-half, -half], [half, -half], [half, half], [-half, half]]
        fm = build_floormap([(ring, ["wall"] * 4)])
        query = DepthScan(origin=np.zeros(2), num_rays=4,
                          depths=np.full(4, 1.0), semantics=np.zeros(4, np.int64),
                          incident_angles=np.zeros(4))
        cfg = ScanLikelihoodConfig(num_rays=4, sigma_d=sigma)
        score = scan_likelihood(query, fm, (np.zeros(2), 0.0), cfg)
        assert score == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_score_in_unit_interval(self):
        fm = l_shaped_map()
        rng = np.random.default_rng(0)
        query = lidar_scan(fm, [1.0, 1.0], 36, yaw=0.3)
        for _ in range(50):
            p = np.array([rng.uniform(0.3, 5.7), rng.uniform(0.3, 2.7)])
            if not fm.contains(p):
                continue
            s = scan_likelihood(query, fm, (p, rng.uniform(0, TWO_PI)),
                                ScanLikelihoodConfig(num_rays=36))
            assert 0.0 < s <= 1.0

    def test_frame_consistency(self):
        # shifting the query's ray indexing by k and adding 2*pi*k/R to the
        # pose yaw leaves the score unchanged
        fm = l_shaped_map()
        gt = (np.array([1.5, 1.5]), 0.0)
        query = lidar_scan(fm, gt[0], 24, yaw=0.0)
        cfg = ScanLikelihoodConfig(num_rays=24)
        pose = (np.array([2.0, 1.2]), 0.9)
        base = scan_likelihood(query, fm, pose, cfg)
        for k in (1, 5, 11):
            rolled = DepthScan(origin=query.origin, num_rays=24,
                               depths=np.roll(query.depths, -k),
                               semantics=np.roll(query.semantics, -k),
                               incident_angles=np.roll(query.incident_angles, -k))
            shifted = scan_likelihood(
                rolled, fm, (pose[0], pose[1] + TWO_PI * k / 24), cfg)
            assert shifted == pytest.approx(base, abs=1e-9)

    def test_cutoff_bounds_mismatch(self):
        fm = square_map(4.0)
        cfg = ScanLikelihoodConfig(num_rays=8, sigma_d=0.1)
        query = DepthScan(origin=np.zeros(2), num_rays=8,
                          depths=np.full(8, 50.0),  # far beyond everything
                          semantics=np.zeros(8, np.int64),
                          incident_angles=np.zeros(8))
        s = scan_likelihood(query, fm, (np.array([2.0, 2.0]), 0.0), cfg)
        # every ray saturates at the cutoff: exp(-9/2)
        assert s == pytest.approx(math.exp(-cfg.cutoff / (2 * cfg.sigma_d ** 2)),
                                  abs=1e-12)
        assert s == pytest.approx(math.exp(-4.5), abs=1e-12)

    def test_ray_count_mismatch(self):
        fm = square_map()
        query = lidar_scan(fm, [2.0, 2.0], 8)
        with pytest.raises(ValueError, match="ray count"):
            scan_likelihood(query, fm, (np.array([2.0, 2.0]), 0.0),
                            ScanLikelihoodConfig(num_rays=16))


class TestMclLocalize:
    def test_gt_cell_wins_grid_search(self):
        fm = l_shaped_map()
        grid_probe, _ = mcl_localize(lidar_scan(fm, [1.25, 1.25], 16), fm,
                                     cell=0.5, num_angles=8)
        # noiseless query taken exactly at a cell centre and sampled rotation
        gt_t = grid_probe.cell_center(2, 2)
        assert fm.contains(gt_t)
        gt_theta = TWO_PI * 3 / 8
        query = lidar_scan(fm, gt_t, 72, yaw=gt_theta)
        grid, peaks = mcl_localize(query, fm, cell=0.5, num_angles=8)
        ix, iy = np.unravel_index(np.argmax(grid.scores), grid.shape)
        np.testing.assert_allclose(grid.cell_center(ix, iy), gt_t, atol=1e-12)
        assert grid.scores[ix, iy] == pytest.approx(1.0, abs=1e-9)
        assert peaks[0].theta == pytest.approx(gt_theta, abs=1e-12)

    def test_kernel_matches_python_likelihood(self):
        fm = l_shaped_map()
        query = lidar_scan(fm, [1.1, 4.2], 24, yaw=1.0)
        cfg = ScanLikelihoodConfig(num_rays=24)
        grid, _ = mcl_localize(query, fm, cell=0.5, num_angles=8, cfg=cfg)
        free_idx = np.argwhere(grid.free_mask)
        rng = np.random.default_rng(1)
        for ix, iy in free_idx[rng.choice(len(free_idx), 15, replace=False)]:
            center = grid.cell_center(ix, iy)
            best = max(scan_likelihood(query, fm, (center, TWO_PI * j / 8), cfg)
                       for j in range(8))
            assert grid.scores[ix, iy] == pytest.approx(best, abs=1e-9)

    def test_shares_grid_machinery(self):
        fm = square_map()
        query = lidar_scan(fm, [2.0, 2.0], 8)
        grid, peaks = mcl_localize(query, fm, cell=0.5, num_angles=4)
        assert type(grid) is PosteriorGrid
        assert grid.likelihoods().sum() == pytest.approx(1.0, abs=1e-9)

    def test_symmetric_room_two_near_tied_peaks(self):
        ring = [[0.0, 0.0], [6.0, 0.0], [6.0, 3.0], [0.0, 3.0]]
        fm = build_floormap([(ring, ["wall"] * 4)])
        gt = (np.array([1.55, 1.15]), 0.0)
        query = lidar_scan(fm, gt[0], 72, yaw=gt[1])
        _, peaks = mcl_localize(query, fm, cell=0.1, num_angles=16, topk=5)
        assert len(peaks) >= 2
        assert abs(peaks[0].score - peaks[1].score) < 1e-6
        # the two modes sit at 180-degree-rotated positions
        mirrored = np.array([6.0, 3.0]) - peaks[0].t
        assert np.hypot(*(peaks[1].t - mirrored)) < 0.15

    def test_empty_scan_uniform_scores(self):
        fm = square_map(4.0)
        query = DepthScan(origin=np.array([2.0, 2.0]), num_rays=12,
                          depths=np.full(12, np.inf),
                          semantics=np.full(12, -1, np.int64),
                          incident_angles=np.zeros(12))
        cfg = ScanLikelihoodConfig(num_rays=12, max_range=0.05)
        grid, peaks = mcl_localize(query, fm, cell=0.5, num_angles=4, cfg=cfg)
        free = grid.scores[grid.free_mask]
        np.testing.assert_allclose(free, free[0], atol=1e-12)
        assert peaks == []  # a flat field has no strict maxima
