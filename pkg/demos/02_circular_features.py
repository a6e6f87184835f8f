"""
Circular features and their algebra
===================================

A circular feature is a ring of V direction-binned feature vectors whose
order encodes planar viewing direction. Rotating the camera cyclically
shifts the ring; comparing two features averages per-segment cosines.
"""

import numpy as np

from floorloc import CircularFeature, context, mask_fov, rotate, similarity

rng = np.random.default_rng(0)
V, D = 16, 32

# ---------------------------------------------------------------------------
# Self-similarity is 1, a negated feature scores 0, random pairs sit near
# the uninformative midpoint 0.5.

f = CircularFeature(rng.normal(size=(V, D)))
g = CircularFeature(rng.normal(size=(V, D)))
print(f"similarity(f, f)   = {similarity(f, f):.4f}")
print(f"similarity(f, -f)  = {similarity(f, CircularFeature(-f.segments)):.4f}")
print(f"similarity(f, g)   = {similarity(f, g):.4f}")

# ---------------------------------------------------------------------------
# Rotation by a whole number of segments is an exact cyclic shift, so a
# rotated copy is perfectly recoverable by searching shifts.

theta = 2 * np.pi * 5 / V
shifted = rotate(f, theta)
scores = [similarity(f, rotate(shifted, 2 * np.pi * k / V)) for k in range(V)]
best = int(np.argmax(scores))
print(f"best counter-shift: {best} segments (expected {V - 5}), "
      f"score {scores[best]:.4f}")

# ---------------------------------------------------------------------------
# Fractional rotations interpolate linearly between adjacent segments.

half = rotate(f, np.pi / V)  # half a segment
expected = 0.5 * (f.segments[0] + f.segments[1])
print(f"half-segment rotation interpolates: "
      f"max dev {np.abs(half.segments[0] - expected).max():.2e}")

# ---------------------------------------------------------------------------
# Perspective queries cover only part of the circle: masking invalidates
# segments outside the field of view and similarity renormalizes over the
# jointly valid ones.

narrow = mask_fov(f, center=0.0, fov=np.pi / 2)
print(f"90-degree FoV keeps {narrow.valid.sum()} of {V} segments")
print(f"masked self-similarity still 1: {similarity(narrow, f):.4f}")

# ---------------------------------------------------------------------------
# The context vector summarizes a whole feature as the mean of its
# normalized segments: a coarse, rotation-insensitive fingerprint.

print(f"context norm of f: {np.linalg.norm(context(f)):.4f} "
      f"(close to 0 for i.i.d. segments)")
aligned = CircularFeature(np.tile(rng.normal(size=D), (V, 1)))
print(f"context norm of an aligned feature: "
      f"{np.linalg.norm(context(aligned)):.4f} (unit for identical segments)")
