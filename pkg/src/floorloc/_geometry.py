"""Small planar geometry helpers shared across modules.

Heavy per-cell loops live in _kernels; these are the numpy/python pieces
used for map validation, clearance checks and scene construction.
"""

import numpy as np

TWO_PI = 2.0 * np.pi


def ring_area(vertices):
    """Signed shoelace area of a closed ring (last vertex == first)."""
    v = np.asarray(vertices, dtype=np.float64)
    x, y = v[:-1, 0], v[:-1, 1]
    xn, yn = v[1:, 0], v[1:, 1]
    return 0.5 * float(np.sum(x * yn - xn * y))


def segments_properly_intersect(a0, a1, b0, b1):
    """True if open segments a and b cross at a single interior point.

    Shared endpoints and collinear overlap do not count.
    """
    a0 = np.asarray(a0, float)
    a1 = np.asarray(a1, float)
    b0 = np.asarray(b0, float)
    b1 = np.asarray(b1, float)
    r = a1 - a0
    s = b1 - b0
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0.0:
        return False
    q = b0 - a0
    t = (q[0] * s[1] - q[1] * s[0]) / denom
    u = (q[0] * r[1] - q[1] * r[0]) / denom
    return 0.0 < t < 1.0 and 0.0 < u < 1.0


def min_edge_distance(p, edges):
    """Distance from p to the nearest edge of an (E, 4) edge array."""
    p = np.asarray(p, float)
    e = np.asarray(edges, float)
    a = e[:, 0:2]
    ab = e[:, 2:4] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = p[None, :] - a
    t = np.where(denom > 0.0, np.einsum("ij,ij->i", ap, ab) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = np.hypot(p[0] - proj[:, 0], p[1] - proj[:, 1])
    return float(d.min())


def wrap_angle(theta):
    """Map an angle into [0, 2*pi)."""
    t = float(theta) % TWO_PI
    if t < 0.0:
        t += TWO_PI
    # -0.0 % 2pi can yield exactly 2pi on some platforms after rounding
    if t >= TWO_PI:
        t -= TWO_PI
    return t


def angle_diff(a, b):
    """Wrapped absolute angular difference, in [0, pi]."""
    d = abs(wrap_angle(a) - wrap_angle(b))
    return min(d, TWO_PI - d)
