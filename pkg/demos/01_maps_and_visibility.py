"""
Floor maps, rasterization and visibility
========================================

Builds a small L-shaped floor map, samples its boundary into an annotated
point cloud, and explores what is visible from different locations.
"""

import numpy as np

from floorloc import build_floormap, lidar_scan, rasterize, visible_points

# ---------------------------------------------------------------------------
# An L-shaped room: one counter-clockwise ring, one label per edge.
# The long south wall carries a door label, one west edge a window.

ring = [[0, 0], [6, 0], [6, 3], [3, 3], [3, 6], [0, 6]]
labels = ["door", "wall", "wall", "wall", "wall", "window"]
fm = build_floormap([(ring, labels)])
print(f"map: {fm.num_edges} edges, bbox {fm.bbox}")

# ---------------------------------------------------------------------------
# Rasterize the boundary every 10 cm. Each point carries its position, a
# unit normal facing into free space, a semantic one-hot and its edge id.

pcm = rasterize(fm, interval=0.1)
print(f"rasterized into {len(pcm)} points at {pcm.interval} m spacing")
print(f"first point: t={pcm.positions[0]}, n={pcm.normals[0]}, "
      f"s={pcm.semantics[0]}")

counts = pcm.semantics.sum(axis=0)
print(f"points per class (wall/door/window): {counts.astype(int)}")

# ---------------------------------------------------------------------------
# Visibility: from the middle of the lower arm, the far end of the upper
# arm hides behind the reflex corner at (3, 3).

for origin in ([1.5, 1.5], [4.5, 1.5], [1.5, 4.5]):
    vis = visible_points(pcm, fm, origin)
    frac = len(vis.visible_indices) / len(pcm)
    print(f"from {origin}: {len(vis.visible_indices)} of {len(pcm)} points "
          f"visible ({100 * frac:.0f}%)")

# ---------------------------------------------------------------------------
# A simulated 72-ray LiDAR scan is the classical-MCL view of the same map.

scan = lidar_scan(fm, [1.5, 1.5], 72)
print(f"scan depths: min {scan.depths.min():.2f} m, "
      f"max {scan.depths.max():.2f} m")
hit_door = np.sum(scan.semantics == 1)
print(f"{hit_door} of 72 rays hit door-labelled boundary")
