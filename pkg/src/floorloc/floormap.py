"""Polygonal floor maps and their rasterization into annotated point clouds.

A map is a set of closed rings with one semantic label per edge. Winding is
normalized so that free space always lies to the left of edge travel
direction (outer rings counter-clockwise, holes clockwise); edge normals
are the left perpendicular and therefore point into free space.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._geometry import min_edge_distance, ring_area, segments_properly_intersect

LABELS = ("wall", "door", "window")
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

DEFAULT_INTERVAL = 0.10  # metres between sampled boundary points

_COINCIDENT_TOL = 1e-9


class MapError(ValueError):
    """Raised for schema violations and invalid map geometry."""


@dataclass
class Ring:
    """Closed polyline with one label per edge.

    vertices has shape (K+1, 2) with vertices[-1] == vertices[0];
    labels[i] names edge vertices[i] -> vertices[i+1].
    """
    vertices: np.ndarray
    labels: list

    @property
    def num_edges(self):
        return len(self.labels)


@dataclass
class FloorMap:
    """Validated polygonal floor map with flattened edge arrays."""
    rings: list
    free_space_hint: np.ndarray | None = None
    # flattened across rings, built on construction
    edges: np.ndarray = field(default=None, repr=False)
    edge_labels: np.ndarray = field(default=None, repr=False)
    edge_ring: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.edges is None:
            self._flatten()

    def _flatten(self):
        segs = []
        labels = []
        ring_idx = []
        for r, ring in enumerate(self.rings):
            v = ring.vertices
            for i in range(ring.num_edges):
                segs.append((v[i, 0], v[i, 1], v[i + 1, 0], v[i + 1, 1]))
                labels.append(LABEL_INDEX[ring.labels[i]])
                ring_idx.append(r)
        self.edges = np.asarray(segs, dtype=np.float64)
        self.edge_labels = np.asarray(labels, dtype=np.int64)
        self.edge_ring = np.asarray(ring_idx, dtype=np.int64)

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def bbox(self):
        """(xmin, ymin, xmax, ymax) over all ring vertices."""
        allv = np.vstack([r.vertices for r in self.rings])
        return (float(allv[:, 0].min()), float(allv[:, 1].min()),
                float(allv[:, 0].max()), float(allv[:, 1].max()))

    def contains(self, point):
        """Even-odd free-space test for a single (x, y) point."""
        p = np.asarray(point, dtype=np.float64)
        return bool(_kernels.point_in_polygon(p[0], p[1], self.edges))

    def clearance(self, point):
        """Distance from a point to the nearest boundary edge."""
        return min_edge_distance(point, self.edges)

    def to_json_dict(self):
        """Open-ring document form (no duplicated closing vertex)."""
        doc = {"rings": []}
        for ring in self.rings:
            doc["rings"].append({
                "vertices": [[float(x), float(y)] for x, y in ring.vertices[:-1]],
                "labels": list(ring.labels),
            })
        if self.free_space_hint is not None:
            doc["free_space_hint"] = [float(self.free_space_hint[0]),
                                      float(self.free_space_hint[1])]
        return doc


@dataclass
class MapPoint:
    """One rasterized boundary sample."""
    t: np.ndarray          # position (2,), metres
    n: np.ndarray          # unit normal (2,), into free space
    s: np.ndarray          # semantic one-hot (3,)
    edge_id: int


@dataclass
class PointCloudMap:
    """Rasterized boundary points, stored as parallel arrays."""
    positions: np.ndarray   # (P, 2)
    normals: np.ndarray     # (P, 2)
    semantics: np.ndarray   # (P, 3) one-hot
    edge_ids: np.ndarray    # (P,)
    interval: float
    bbox: tuple

    def __len__(self):
        return self.positions.shape[0]

    def point(self, i):
        return MapPoint(self.positions[i].copy(), self.normals[i].copy(),
                        self.semantics[i].copy(), int(self.edge_ids[i]))

    @property
    def classes(self):
        """Semantic class index per point (argmax of the one-hot)."""
        return np.argmax(self.semantics, axis=1).astype(np.int64)


def _normalize_ring(vertices, labels, ring_idx):
    """Validate one raw ring and return (closed vertices, labels)."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != 2:
        raise MapError(f"ring {ring_idx}: vertices must be a list of [x, y] pairs")
    closed = v.shape[0] >= 2 and np.allclose(v[0], v[-1], atol=_COINCIDENT_TOL)
    if closed:
        v = v[:-1]
    if v.shape[0] < 3:
        raise MapError(f"ring {ring_idx}: degenerate ring (fewer than 3 distinct vertices)")
    if len(labels) != v.shape[0]:
        raise MapError(f"ring {ring_idx}: expected {v.shape[0]} labels, got {len(labels)}")
    for i, lab in enumerate(labels):
        if lab not in LABEL_INDEX:
            raise MapError(f"ring {ring_idx} edge {i}: unknown semantic label {lab!r}")

    vc = np.vstack([v, v[:1]])
    lengths = np.hypot(np.diff(vc[:, 0]), np.diff(vc[:, 1]))
    for i, L in enumerate(lengths):
        if L <= _COINCIDENT_TOL:
            raise MapError(f"ring {ring_idx} edge {i}: zero-length edge")

    n = v.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j - i) % n == 1 or (i - j) % n == 1:
                continue
            if segments_properly_intersect(vc[i], vc[i + 1], vc[j], vc[j + 1]):
                raise MapError(f"ring {ring_idx}: edges {i} and {j} intersect")
    return vc, list(labels)


def _orient_rings(raw_rings):
    """Set winding by nesting depth: even depth CCW (outer), odd CW (hole)."""
    edge_sets = []
    for vc, _labels in raw_rings:
        segs = np.column_stack([vc[:-1], vc[1:]])
        edge_sets.append(np.ascontiguousarray(segs, dtype=np.float64))

    rings = []
    for r, (vc, labels) in enumerate(raw_rings):
        depth = 0
        probe = 0.5 * (vc[0] + vc[1])
        for j, other in enumerate(edge_sets):
            if j == r:
                continue
            if _kernels.point_in_polygon(probe[0], probe[1], other):
                depth += 1
        want_ccw = depth % 2 == 0
        is_ccw = ring_area(vc) > 0.0
        if is_ccw != want_ccw:
            vc = vc[::-1].copy()
            labels = labels[::-1]
        rings.append(Ring(vc, labels))
    return rings


def build_floormap(rings_data, free_space_hint=None):
    """Construct a validated FloorMap from (vertices, labels) pairs."""
    if not rings_data:
        raise MapError("map has no rings")
    raw = [_normalize_ring(v, lab, i) for i, (v, lab) in enumerate(rings_data)]
    rings = _orient_rings(raw)
    hint = None
    if free_space_hint is not None:
        hint = np.asarray(free_space_hint, dtype=np.float64)
        if hint.shape != (2,):
            raise MapError("free_space_hint must be [x, y]")
    fm = FloorMap(rings=rings, free_space_hint=hint)
    if hint is not None and not fm.contains(hint):
        raise MapError("free_space_hint does not lie in free space")
    return fm


def parse_floormap(document):
    """Parse a floor-map JSON document (str or bytes) into a FloorMap.

    Schema: {"rings": [{"vertices": [[x,y],...], "labels": [...]}, ...],
             "free_space_hint": [x, y]}  with one label per edge
    vertices[i] -> vertices[i+1] (wrapping); a duplicated closing vertex
    is also accepted.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MapError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "rings" not in doc:
        raise MapError("document must be an object with a 'rings' array")
    rings_data = []
    for i, ring in enumerate(doc["rings"]):
        if not isinstance(ring, dict) or "vertices" not in ring or "labels" not in ring:
            raise MapError(f"ring {i}: must have 'vertices' and 'labels'")
        rings_data.append((ring["vertices"], ring["labels"]))
    return build_floormap(rings_data, doc.get("free_space_hint"))


def load_floormap(path):
    with open(path, "rb") as fh:
        return parse_floormap(fh.read())


def save_floormap(fm, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(fm.to_json_dict(), fh, indent=2)
        fh.write("\n")


def sample_free_position(fm, rng, clearance=0.0, max_tries=10000):
    """Rejection-sample a free-space point with a wall-clearance margin."""
    xmin, ymin, xmax, ymax = fm.bbox
    for _ in range(max_tries):
        p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        if not fm.contains(p):
            continue
        if clearance > 0.0 and fm.clearance(p) < clearance:
            continue
        return p
    raise MapError(f"could not sample a free position with clearance {clearance}")


def rasterize(fm, interval=DEFAULT_INTERVAL):
    """Sample boundary points every `interval` metres along each edge.

    An edge of length L yields floor(L/interval)+1 points at arclengths
    k*interval from its start; coincident corner points keep the first
    edge's normal. Deterministic for identical inputs.
    """
    if interval <= 0.0:
        raise MapError(f"interval must be positive, got {interval}")

    positions = []
    normals = []
    semantics = []
    edge_ids = []
    seen = {}

    def bucket_keys(x, y):
        bx = round(x / _COINCIDENT_TOL)
        by = round(y / _COINCIDENT_TOL)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                yield (bx + dx, by + dy)

    for e in range(fm.num_edges):
        ax, ay, bx, by = fm.edges[e]
        L = math.hypot(bx - ax, by - ay)
        # tolerate fp noise in L/interval so exact multiples keep endpoints
        count = int(math.floor(L / interval + 1e-9)) + 1
        ux, uy = (bx - ax) / L, (by - ay) / L
        nx, ny = -uy, ux  # left perpendicular: free-space side
        onehot = np.zeros(3)
        onehot[fm.edge_labels[e]] = 1.0
        for k in range(count):
            frac = min(k * interval / L, 1.0)
            px = ax + frac * (bx - ax)
            py = ay + frac * (by - ay)
            dup = False
            for key in bucket_keys(px, py):
                j = seen.get(key)
                if j is not None and math.hypot(px - positions[j][0],
                                                py - positions[j][1]) < _COINCIDENT_TOL:
                    dup = True
                    break
            if dup:
                continue
            seen[(round(px / _COINCIDENT_TOL), round(py / _COINCIDENT_TOL))] = len(positions)
            positions.append((px, py))
            normals.append((nx, ny))
            semantics.append(onehot)
            edge_ids.append(e)

    return PointCloudMap(
        positions=np.asarray(positions, dtype=np.float64),
        normals=np.asarray(normals, dtype=np.float64),
        semantics=np.asarray(semantics, dtype=np.float64),
        edge_ids=np.asarray(edge_ids, dtype=np.int64),
        interval=float(interval),
        bbox=fm.bbox,
    )
