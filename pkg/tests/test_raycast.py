import math

import numpy as np
import pytest

from floorloc.floormap import build_floormap, rasterize
from floorloc.raycast import lidar_scan, visible_points
from floorloc.scenes import SceneParams, generate_scene


def oracle_visible_indices(pcm, fm, origin):
    """Brute-force O(P*E) visibility: test every sightline against every edge."""
    ox, oy = float(origin[0]), float(origin[1])
    out = []
    for i in range(len(pcm)):
        px, py = pcm.positions[i]
        nx, ny = pcm.normals[i]
        dx, dy = px - ox, py - oy
        if dx * nx + dy * ny >= 0.0:
            continue
        rlen = math.sqrt(dx * dx + dy * dy)
        tmax = 1.0 - 1e-6 / rlen
        occluded = False
        for ax, ay, bx, by in fm.edges:
            sx, sy = bx - ax, by - ay
            denom = dx * sy - dy * sx
            if denom == 0.0:
                continue
            qx, qy = ax - ox, ay - oy
            t = (qx * sy - qy * sx) / denom
            if t <= 0.0 or t >= tmax:
                continue
            u = (qx * dy - qy * dx) / denom
            if u < 0.0 or u > 1.0:
                continue
            occluded = True
            break
        if not occluded:
            out.append(i)
    return np.asarray(out, dtype=np.int64)


def oracle_ray_depth(fm, origin, angle):
    """Minimum intersection distance over all edges for one ray."""
    ox, oy = origin
    cx, cy = math.cos(angle), math.sin(angle)
    best = math.inf
    for ax, ay, bx, by in fm.edges:
        sx, sy = bx - ax, by - ay
        denom = cx * sy - cy * sx
        if denom == 0.0:
            continue
        qx, qy = ax - ox, ay - oy
        t = (qx * sy - qy * sx) / denom
        u = (qx * cy - qy * cx) / denom
        if 0.0 <= u <= 1.0 and 1e-9 < t < best:
            best = t
    return best


def square_map(side=4.0):
    ring = [[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]]
    return build_floormap([(ring, ["wall"] * 4)])


def l_shaped_map():
    ring = [[0, 0], [6, 0], [6, 3], [3, 3], [3, 6], [0, 6]]
    return build_floormap([(ring, ["wall"] * 6)])


class TestVisibility:
    def test_convex_room_everything_visible(self):
        fm = square_map()
        pcm = rasterize(fm, 0.1)
        for origin in ([2.0, 2.0], [0.7, 3.1], [3.9, 0.2]):
            vis = visible_points(pcm, fm, origin)
            assert len(vis.visible_indices) == len(pcm)

    def test_separate_room_invisible(self):
        ring_a = [[0, 0], [2, 0], [2, 2], [0, 2]]
        ring_b = [[3, 0], [5, 0], [5, 2], [3, 2]]
        fm = build_floormap([(ring_a, ["wall"] * 4), (ring_b, ["wall"] * 4)])
        pcm = rasterize(fm, 0.1)
        vis = visible_points(pcm, fm, [1.0, 1.0])
        in_b = np.nonzero(pcm.positions[:, 0] >= 3.0)[0]
        assert not set(vis.visible_indices) & set(in_b)

    def test_l_shape_matches_oracle(self):
        fm = l_shaped_map()
        pcm = rasterize(fm, 0.1)
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 12:
            p = rng.uniform(0.2, 5.8, size=2)
            if not fm.contains(p):
                continue
            got = visible_points(pcm, fm, p).visible_indices
            want = oracle_visible_indices(pcm, fm, p)
            np.testing.assert_array_equal(got, want)
            checked += 1

    def test_indices_sorted_unique(self):
        fm = l_shaped_map()
        pcm = rasterize(fm, 0.1)
        vis = visible_points(pcm, fm, [1.0, 1.0]).visible_indices
        assert np.all(np.diff(vis) > 0)

    def test_origin_outside_free_space(self):
        fm = square_map()
        pcm = rasterize(fm, 0.2)
        with pytest.raises(ValueError, match="free space"):
            visible_points(pcm, fm, [9.0, 9.0])

    def test_segment_symmetry(self):
        # a visible sightline is unobstructed when traversed from the point too
        fm = l_shaped_map()
        pcm = rasterize(fm, 0.15)
        origin = np.array([1.0, 4.5])
        vis = visible_points(pcm, fm, origin).visible_indices
        for i in vis[::5]:
            px, py = pcm.positions[i]
            dx, dy = origin[0] - px, origin[1] - py
            occluded = False
            for ax, ay, bx, by in fm.edges:
                sx, sy = bx - ax, by - ay
                denom = dx * sy - dy * sx
                if denom == 0.0:
                    continue
                qx, qy = ax - px, ay - py
                t = (qx * sy - qy * sx) / denom
                u = (qx * dy - qy * dx) / denom
                # strict interior of the reversed segment, clear of the
                # on-edge start by the same 1e-6 metre margin
                rlen = math.hypot(dx, dy)
                if 1e-6 / rlen < t < 1.0 - 1e-12 and 0.0 <= u <= 1.0:
                    occluded = True
                    break
            assert not occluded

    def test_generated_scenes_match_oracle(self):
        rng = np.random.default_rng(0)
        for seed in range(3):
            scene = generate_scene("multi_room",
                                   SceneParams(num_queries=0, rooms=3), seed=seed)
            fm = scene.floormap
            pcm = rasterize(fm, 0.1)
            checked = 0
            while checked < 4:
                xmin, ymin, xmax, ymax = fm.bbox
                p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
                if not fm.contains(p) or fm.clearance(p) < 0.05:
                    continue
                got = visible_points(pcm, fm, p).visible_indices
                want = oracle_visible_indices(pcm, fm, p)
                np.testing.assert_array_equal(got, want)
                checked += 1


class TestLidar:
    def test_square_centre_four_rays(self):
        fm = square_map(1.0)
        scan = lidar_scan(fm, [0.5, 0.5], 4)
        np.testing.assert_allclose(scan.depths, 0.5, atol=1e-12)
        assert np.all(scan.semantics == 0)

    def test_square_centre_eight_rays_diagonals(self):
        fm = square_map(1.0)
        scan = lidar_scan(fm, [0.5, 0.5], 8)
        np.testing.assert_allclose(scan.depths[1::2], 0.5 * math.sqrt(2.0),
                                   atol=1e-12)

    def test_matches_brute_force_oracle(self):
        fm = l_shaped_map()
        origin = [1.3, 2.2]
        scan = lidar_scan(fm, origin, 72)
        for k in range(72):
            want = oracle_ray_depth(fm, origin, 2 * math.pi * k / 72)
            assert scan.depths[k] == pytest.approx(want, abs=1e-9)

    def test_yaw_rotates_ray_frame(self):
        fm = square_map(2.0)
        a = lidar_scan(fm, [1.0, 1.0], 8, yaw=0.0)
        b = lidar_scan(fm, [1.0, 1.0], 8, yaw=2 * math.pi / 8)
        np.testing.assert_allclose(np.roll(a.depths, -1), b.depths, atol=1e-9)

    def test_ray_direction_convention(self):
        fm = square_map(2.0)
        scan = lidar_scan(fm, [0.5, 1.0], 4)
        # ray 0 points along +x: hits the right wall at 1.5
        assert scan.depths[0] == pytest.approx(1.5, abs=1e-12)
        # ray 1 points along +y
        assert scan.depths[1] == pytest.approx(1.0, abs=1e-12)

    def test_incident_angles_frontal(self):
        fm = square_map(2.0)
        scan = lidar_scan(fm, [1.0, 1.0], 4)
        # head-on hits: psi = pi
        np.testing.assert_allclose(scan.incident_angles, math.pi, atol=1e-9)

    def test_depth_continuity_in_convex_room(self):
        fm = square_map(3.0)
        base = lidar_scan(fm, [1.2, 1.7], 16)
        eps = 1e-4
        for delta in ([eps, 0], [-eps, 0], [0, eps], [0, -eps]):
            moved = lidar_scan(fm, np.array([1.2, 1.7]) + delta, 16)
            for k in range(16):
                sin_grazing = abs(math.cos(base.incident_angles[k]))
                bound = eps / sin_grazing * (1 + 1e-9) + 1e-12
                assert abs(moved.depths[k] - base.depths[k]) <= bound

    def test_errors(self):
        fm = square_map(1.0)
        with pytest.raises(ValueError):
            lidar_scan(fm, [5.0, 5.0], 8)
        with pytest.raises(ValueError):
            lidar_scan(fm, [0.5, 0.5], 0)
