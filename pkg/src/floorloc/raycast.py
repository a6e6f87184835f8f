"""Visibility tests and simulated 2D LiDAR scans over floor maps."""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._geometry import TWO_PI


@dataclass
class VisibilityResult:
    """Indices of map points visible from a query location (sorted, unique)."""
    visible_indices: np.ndarray


@dataclass
class DepthScan:
    """Simulated range scan: ray k points at yaw + 2*pi*k/num_rays.

    depths are metres (+inf for no hit); semantics holds the hit edge's
    label index (-1 for no hit); incident_angles in [0, 2*pi).
    """
    origin: np.ndarray
    num_rays: int
    depths: np.ndarray
    semantics: np.ndarray
    incident_angles: np.ndarray
    yaw: float = 0.0

    def to_json_dict(self):
        return {
            "origin": [float(self.origin[0]), float(self.origin[1])],
            "num_rays": int(self.num_rays),
            "yaw": float(self.yaw),
            "depths": [None if not np.isfinite(d) else float(d) for d in self.depths],
            "semantics": [int(s) for s in self.semantics],
            "incident_angles": [float(a) for a in self.incident_angles],
        }

    @classmethod
    def from_json_dict(cls, doc):
        depths = np.array([np.inf if d is None else float(d) for d in doc["depths"]])
        return cls(
            origin=np.asarray(doc["origin"], dtype=np.float64),
            num_rays=int(doc["num_rays"]),
            depths=depths,
            semantics=np.asarray(doc["semantics"], dtype=np.int64),
            incident_angles=np.asarray(doc["incident_angles"], dtype=np.float64),
            yaw=float(doc.get("yaw", 0.0)),
        )


def visible_points(pcm, fm, origin):
    """Map points with an unobstructed, front-facing sightline to origin.

    The production path is the compiled per-point sweep; tests hold it to
    exact agreement with a brute-force segment-intersection oracle.
    """
    origin = np.asarray(origin, dtype=np.float64)
    if not fm.contains(origin):
        raise ValueError(f"origin {origin.tolist()} is not in free space")
    mask = _kernels.visible_point_mask(origin[0], origin[1],
                                       pcm.positions, pcm.normals, fm.edges)
    return VisibilityResult(visible_indices=np.nonzero(mask)[0].astype(np.int64))


def lidar_scan(fm, origin, num_rays, yaw=0.0):
    """Noise-free simulated LiDAR: nearest-edge depth per ray.

    Ray k travels at world angle yaw + 2*pi*k/num_rays. Hit semantics and
    incident angles come from the intersected edge; misses record +inf
    depth and semantics -1.
    """
    origin = np.asarray(origin, dtype=np.float64)
    if num_rays < 1:
        raise ValueError("num_rays must be >= 1")
    if not fm.contains(origin):
        raise ValueError(f"origin {origin.tolist()} is not in free space")

    depths = np.full(num_rays, np.inf)
    semantics = np.full(num_rays, -1, dtype=np.int64)
    incident = np.zeros(num_rays)
    for k in range(num_rays):
        ang = yaw + TWO_PI * k / num_rays
        cx, cy = math.cos(ang), math.sin(ang)
        t, e = _kernels.cast_ray(origin[0], origin[1], cx, cy, fm.edges)
        if e < 0:
            continue
        depths[k] = t
        semantics[k] = fm.edge_labels[e]
        ax, ay, bx, by = fm.edges[e]
        L = math.hypot(bx - ax, by - ay)
        nx, ny = -(by - ay) / L, (bx - ax) / L
        psi = math.atan2(cx * ny - cy * nx, cx * nx + cy * ny)
        if psi < 0.0:
            psi += TWO_PI
        incident[k] = psi
    return DepthScan(origin=origin, num_rays=num_rays, depths=depths,
                     semantics=semantics, incident_angles=incident, yaw=float(yaw))
