"""Circular features: direction-binned feature rings and their algebra.

Segment alpha of a V-segment feature covers planar directions
[2*pi*alpha/V, 2*pi*(alpha+1)/V); the first and last segments are
angularly adjacent, so cyclic shifts rotate the encoded viewpoint.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._geometry import TWO_PI

_INT_SHIFT_TOL = 1e-9


@dataclass
class CircularFeature:
    segments: np.ndarray              # (V, D)
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        self.segments = np.array(self.segments, dtype=np.float64)
        if self.segments.ndim != 2:
            raise ValueError("segments must be a (V, D) matrix")
        if self.valid is None:
            self.valid = np.ones(self.segments.shape[0], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != (self.segments.shape[0],):
            raise ValueError("valid mask must have one entry per segment")
        if not self.valid.any():
            raise ValueError("feature needs at least one valid segment")
        self.segments[~self.valid] = 0.0

    @property
    def V(self):
        return self.segments.shape[0]

    @property
    def D(self):
        return self.segments.shape[1]

    def copy(self):
        return CircularFeature(self.segments.copy(), self.valid.copy())

    def to_json_dict(self):
        return {
            "V": self.V,
            "D": self.D,
            "valid": [bool(v) for v in self.valid],
            "segments": [[float(x) for x in row] for row in self.segments],
        }

    @classmethod
    def from_json_dict(cls, doc):
        f = cls(np.asarray(doc["segments"], dtype=np.float64),
                np.asarray(doc["valid"], dtype=bool))
        if f.V != int(doc["V"]) or f.D != int(doc["D"]):
            raise ValueError("feature dims disagree with declared V/D")
        return f


def _segment_cosines(a, b, joint):
    """Per-segment cosine over a joint mask; zero-norm segments give 0."""
    dots = np.einsum("ij,ij->i", a.segments, b.segments)
    na = np.linalg.norm(a.segments, axis=1)
    nb = np.linalg.norm(b.segments, axis=1)
    denom = na * nb
    cos = np.zeros(a.V)
    ok = joint & (denom > 0.0)
    cos[ok] = dots[ok] / denom[ok]
    return cos


def similarity(a, b):
    """Mean segment cosine over jointly valid segments, mapped into [0,1].

    The denominator is the joint-validity count, so partial fields of view
    renormalize to the same range as full panoramas.
    """
    if a.V != b.V or a.D != b.D:
        raise ValueError(f"shape mismatch: ({a.V},{a.D}) vs ({b.V},{b.D})")
    joint = a.valid & b.valid
    n = int(joint.sum())
    if n == 0:
        raise ValueError("no jointly valid segments")
    cos = _segment_cosines(a, b, joint)
    return float(cos[joint].sum() / (2.0 * n) + 0.5)


def rotate(f, theta):
    """Rotate the encoded viewpoint by theta radians (counter-clockwise).

    Output segment alpha reads input index (alpha + V*theta/2pi) mod V;
    fractional shifts interpolate linearly between the two adjacent
    segments and stay valid only if both sources are valid.
    """
    V = f.V
    shift = (V * theta / TWO_PI) % V
    nearest = round(shift)
    if abs(shift - nearest) < _INT_SHIFT_TOL:
        idx = np.arange(V)
        src = (idx + int(nearest)) % V
        return CircularFeature(f.segments[src].copy(), f.valid[src].copy())

    i = int(math.floor(shift))
    frac = shift - i
    idx = np.arange(V)
    s0 = (idx + i) % V
    s1 = (idx + i + 1) % V
    segments = (1.0 - frac) * f.segments[s0] + frac * f.segments[s1]
    valid = f.valid[s0] & f.valid[s1]
    segments[~valid] = 0.0
    return CircularFeature(segments, valid)


def context(f):
    """Mean of the normalized valid segments: a map-level summary vector."""
    norms = np.linalg.norm(f.segments, axis=1)
    use = f.valid & (norms > 0.0)
    if not use.any():
        raise ValueError("context undefined: all valid segments have zero norm")
    unit = f.segments[use] / norms[use, None]
    return unit.sum(axis=0) / int(use.sum())


def mask_fov(f, center, fov):
    """Invalidate segments whose midpoint direction falls outside the window.

    The window is [center - fov/2, center + fov/2) on the circle; whole
    segments are kept or dropped by their angular midpoints.
    """
    if not 0.0 < fov <= TWO_PI + 1e-12:
        raise ValueError(f"fov must be in (0, 2*pi], got {fov}")
    V = f.V
    mids = TWO_PI * (np.arange(V) + 0.5) / V
    start = center - fov / 2.0
    rel = np.mod(mids - start, TWO_PI)
    inside = rel < fov
    valid = f.valid & inside
    segments = f.segments.copy()
    segments[~valid] = 0.0
    return CircularFeature(segments, valid)
