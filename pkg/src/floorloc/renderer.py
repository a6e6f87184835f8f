"""Latent-space rendering: codebook lookups aggregated into circular features.

Each map point carries an incident-angle codebook (G codes, circular
interpolation) and a distance codebook (H codes, clamped interpolation);
in the shared configuration one codebook pair exists per semantic class.
A rendered feature at a location is the per-segment mean of the summed
lookups of its visible points.
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

from ._geometry import TWO_PI
from .circfeat import CircularFeature, rotate
from .raycast import visible_points

CODEBOOK_MAGIC = b"LSRCB1"


@dataclass
class CodebookSet:
    """Per-class rendering codebooks.

    angle_codes: (C, G, D), indexed by incident angle (wraps),
    dist_codes:  (C, H, D), indexed by ray distance (saturates at d_max).
    class_of selects the map-point -> class rule: "semantic" shares one
    codebook pair per semantic label; an explicit integer array assigns
    classes per point (no trainer ships for that configuration).
    """
    angle_codes: np.ndarray
    dist_codes: np.ndarray
    d_max: float
    V: int
    class_of: object = "semantic"

    def __post_init__(self):
        self.angle_codes = np.ascontiguousarray(self.angle_codes, dtype=np.float64)
        self.dist_codes = np.ascontiguousarray(self.dist_codes, dtype=np.float64)
        if self.angle_codes.ndim != 3 or self.dist_codes.ndim != 3:
            raise ValueError("codebooks must be (classes, codes, D) arrays")
        if self.angle_codes.shape[0] != self.dist_codes.shape[0]:
            raise ValueError("angle and distance codebooks disagree on class count")
        if self.angle_codes.shape[2] != self.dist_codes.shape[2]:
            raise ValueError("angle and distance codebooks disagree on D")
        if self.d_max <= 0.0:
            raise ValueError("d_max must be positive")

    @property
    def num_classes(self):
        return self.angle_codes.shape[0]

    @property
    def G(self):
        return self.angle_codes.shape[1]

    @property
    def H(self):
        return self.dist_codes.shape[1]

    @property
    def D(self):
        return self.angle_codes.shape[2]

    def copy(self):
        return CodebookSet(self.angle_codes.copy(), self.dist_codes.copy(),
                           self.d_max, self.V, self.class_of)

    def point_classes(self, pcm):
        """Class index per map point under this set's assignment rule."""
        if isinstance(self.class_of, str) and self.class_of == "semantic":
            classes = pcm.classes
        else:
            classes = np.asarray(self.class_of, dtype=np.int64)
            if classes.shape != (len(pcm),):
                raise ValueError("per-point class array does not match the map")
        if classes.size and (classes.min() < 0 or classes.max() >= self.num_classes):
            raise ValueError("map point class outside codebook range")
        return classes


@dataclass
class RayDynamics:
    """View geometry of one map point from a rendering location."""
    d: float        # ray length, metres
    psi: float      # incident angle in [0, 2*pi)
    omega: float    # viewing-ray direction angle in [0, 2*pi)


def ray_dynamics(origin, point):
    """Distance, signed incident angle and viewing direction for one point.

    psi = atan2(cross(d, n), dot(d, n)) wrapped to [0, 2*pi), which keeps
    the four approach quadrants distinct; omega is the world bearing of
    the viewing ray.
    """
    origin = np.asarray(origin, dtype=np.float64)
    dx = float(point.t[0] - origin[0])
    dy = float(point.t[1] - origin[1])
    d = math.hypot(dx, dy)
    if d == 0.0:
        raise ValueError("origin coincides with the map point")
    nx, ny = float(point.n[0]), float(point.n[1])
    psi = math.atan2(dx * ny - dy * nx, dx * nx + dy * ny)
    if psi < 0.0:
        psi += TWO_PI
    omega = math.atan2(dy, dx)
    if omega < 0.0:
        omega += TWO_PI
    return RayDynamics(d=d, psi=psi, omega=omega)


def _dynamics_arrays(origin, positions, normals):
    """Vectorized (d, psi, omega) for many points."""
    d_vec = positions - origin[None, :]
    dist = np.hypot(d_vec[:, 0], d_vec[:, 1])
    cross = d_vec[:, 0] * normals[:, 1] - d_vec[:, 1] * normals[:, 0]
    dot = d_vec[:, 0] * normals[:, 0] + d_vec[:, 1] * normals[:, 1]
    psi = np.arctan2(cross, dot)
    psi[psi < 0.0] += TWO_PI
    omega = np.arctan2(d_vec[:, 1], d_vec[:, 0])
    omega[omega < 0.0] += TWO_PI
    return dist, psi, omega


def angle_code_indices(cb, psi):
    """Circular interpolation support for an incident angle: (i0, i1, frac)."""
    a = np.asarray(cb.G * np.asarray(psi) / TWO_PI)
    ia = np.floor(a).astype(np.int64)
    fa = a - ia
    return ia % cb.G, (ia + 1) % cb.G, fa


def dist_code_indices(cb, d):
    """Clamped interpolation support for a distance: (i0, i1, frac)."""
    b = np.minimum(cb.H * np.asarray(d) / cb.d_max, cb.H - 1.0)
    ib = np.floor(b).astype(np.int64)
    fb = b - ib
    ib1 = np.minimum(ib + 1, cb.H - 1)
    return ib, ib1, fb


def lookup_feature(cb, point_class, dyn):
    """Summed angle-code and distance-code lookup for one ray geometry."""
    c = int(point_class)
    if not 0 <= c < cb.num_classes:
        raise ValueError(f"unknown class id {c}")
    ia0, ia1, fa = angle_code_indices(cb, dyn.psi)
    ib0, ib1, fb = dist_code_indices(cb, dyn.d)
    angle = (1.0 - fa) * cb.angle_codes[c, int(ia0)] + fa * cb.angle_codes[c, int(ia1)]
    dist = (1.0 - fb) * cb.dist_codes[c, int(ib0)] + fb * cb.dist_codes[c, int(ib1)]
    return angle + dist


def _lookup_batch(cb, classes, d, psi):
    ia0, ia1, fa = angle_code_indices(cb, psi)
    ib0, ib1, fb = dist_code_indices(cb, d)
    angle = ((1.0 - fa)[:, None] * cb.angle_codes[classes, ia0]
             + fa[:, None] * cb.angle_codes[classes, ia1])
    dist = ((1.0 - fb)[:, None] * cb.dist_codes[classes, ib0]
            + fb[:, None] * cb.dist_codes[classes, ib1])
    return angle + dist


def visible_dynamics(pcm, fm, location):
    """Visible point indices plus their (d, psi, omega) from a location."""
    location = np.asarray(location, dtype=np.float64)
    vis = visible_points(pcm, fm, location).visible_indices
    dist, psi, omega = _dynamics_arrays(location, pcm.positions[vis], pcm.normals[vis])
    return vis, dist, psi, omega


def segment_index(omega, V):
    """Segment covering a viewing direction; guards the omega == 2*pi edge."""
    seg = (V * np.asarray(omega) / TWO_PI).astype(np.int64)
    return np.minimum(seg, V - 1)


def render(pcm, fm, cb, location):
    """Render the circular feature at a location in canonical orientation.

    Segment values are plain means of the lookups assigned to them;
    segments with no visible points are masked invalid.
    """
    location = np.asarray(location, dtype=np.float64)
    vis, dist, psi, omega = visible_dynamics(pcm, fm, location)
    classes = cb.point_classes(pcm)[vis]
    V = cb.V
    seg_sum = np.zeros((V, cb.D))
    seg_cnt = np.zeros(V, dtype=np.int64)
    if vis.size:
        feats = _lookup_batch(cb, classes, dist, psi)
        seg = segment_index(omega, V)
        np.add.at(seg_sum, seg, feats)
        np.add.at(seg_cnt, seg, 1)
    valid = seg_cnt > 0
    if not valid.any():
        raise ValueError("no visible map points from this location")
    seg_sum[valid] /= seg_cnt[valid, None]
    return CircularFeature(seg_sum, valid)


def render_pose(pcm, fm, cb, location, theta):
    """Pose-conditioned hypothesis feature: render then rotate by theta."""
    return rotate(render(pcm, fm, cb, location), theta)


def save_codebooks(cb, path):
    """Write the binary codebook file (shared per-class configuration only)."""
    if not (isinstance(cb.class_of, str) and cb.class_of == "semantic"):
        raise ValueError("only per-class codebooks serialize to the binary format")
    header = CODEBOOK_MAGIC + struct.pack(
        "<5Id", cb.G, cb.H, cb.V, cb.D, cb.num_classes, cb.d_max)
    with open(path, "wb") as fh:
        fh.write(header)
        for c in range(cb.num_classes):
            fh.write(cb.angle_codes[c].astype("<f8").tobytes(order="C"))
            fh.write(cb.dist_codes[c].astype("<f8").tobytes(order="C"))


def load_codebooks(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:6] != CODEBOOK_MAGIC:
        raise ValueError("not a codebook file (bad magic)")
    G, H, V, D, C = struct.unpack_from("<5I", blob, 6)
    (d_max,) = struct.unpack_from("<d", blob, 26)
    offset = 34
    per_class = (G + H) * D * 8
    if len(blob) != offset + C * per_class:
        raise ValueError("codebook file truncated or oversized")
    angle = np.empty((C, G, D))
    dist = np.empty((C, H, D))
    for c in range(C):
        angle[c] = np.frombuffer(blob, "<f8", G * D, offset).reshape(G, D)
        offset += G * D * 8
        dist[c] = np.frombuffer(blob, "<f8", H * D, offset).reshape(H, D)
        offset += H * D * 8
    return CodebookSet(angle_codes=angle, dist_codes=dist, d_max=float(d_max), V=int(V))
