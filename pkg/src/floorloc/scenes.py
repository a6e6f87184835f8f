"""Procedural rectilinear floor plans and query sets for desk-scale runs.

Styles: single_room (one rectangle), multi_room (rectangle partitioned by
internal walls with door openings), symmetric (180-degree rotationally
symmetric, wall labels only, for ambiguity studies). Deterministic per
seed.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import box
from shapely.ops import unary_union

from ._geometry import TWO_PI
from .floormap import build_floormap, sample_free_position, save_floormap
from .raycast import lidar_scan
from .training import encode_depth_query

WALL_THICKNESS = 0.2
DOOR_OPENING = 1.0


@dataclass
class SceneParams:
    width: float = None            # sampled from size_range when None
    height: float = None
    rooms: int = 3                 # multi_room partition count
    num_queries: int = 10
    door_edges: int = 2            # labelled door sub-edges
    window_edges: int = 1
    clearance: float = 0.3         # metres from any wall for query poses
    query_fov: float = TWO_PI
    query_V: int = 16
    query_D: int = 32
    size_range: tuple = (7.0, 12.0)


@dataclass
class SyntheticScene:
    floormap: object
    gt_queries: list
    seed: int
    style: str
    params: SceneParams = field(default=None, repr=False)


def _sample_dims(params, rng, snap=0.1):
    lo, hi = params.size_range
    w = params.width if params.width is not None else rng.uniform(lo, hi)
    h = params.height if params.height is not None else rng.uniform(0.6 * lo, 0.85 * hi)
    w = round(w / snap) * snap
    h = round(h / snap) * snap
    return float(w), float(h)


def _rect_ring(w, h):
    return [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]]


def _split_edge_labels(ring_vertices, ring_labels, edge_idx, seg_len, label, rng):
    """Insert a labelled sub-edge of seg_len into one edge of a ring."""
    a = np.asarray(ring_vertices[edge_idx], dtype=np.float64)
    b = np.asarray(ring_vertices[(edge_idx + 1) % len(ring_vertices)], dtype=np.float64)
    L = float(np.hypot(*(b - a)))
    margin = 0.2
    if L < seg_len + 2 * margin:
        return False
    s = rng.uniform(margin, L - seg_len - margin)
    p0 = (a + (s / L) * (b - a)).tolist()
    p1 = (a + ((s + seg_len) / L) * (b - a)).tolist()
    ring_vertices[edge_idx + 1:edge_idx + 1] = [p0, p1]
    ring_labels[edge_idx:edge_idx + 1] = [ring_labels[edge_idx], label, ring_labels[edge_idx]]
    return True


def _assign_labels(rings_data, rng, door_edges, window_edges):
    """Mark random qualifying edges with door/window sub-segments."""
    for label, want, seg_range in (("door", door_edges, (0.8, 1.0)),
                                   ("window", window_edges, (0.6, 0.8))):
        placed = 0
        attempts = 0
        while placed < want and attempts < 50 * max(1, want):
            attempts += 1
            ring_idx = int(rng.integers(len(rings_data)))
            vertices, labels = rings_data[ring_idx]
            edge_idx = int(rng.integers(len(labels)))
            if labels[edge_idx] != "wall":
                continue
            seg_len = float(rng.uniform(*seg_range))
            if _split_edge_labels(vertices, labels, edge_idx, seg_len, label, rng):
                placed += 1
    return rings_data


def _polygon_to_rings_data(poly):
    rings = []
    ext = [list(c) for c in poly.exterior.coords[:-1]]
    rings.append((ext, ["wall"] * len(ext)))
    for interior in poly.interiors:
        ring = [list(c) for c in interior.coords[:-1]]
        rings.append((ring, ["wall"] * len(ring)))
    return rings


def _multi_room_polygon(w, h, rooms, rng):
    """Outer rectangle minus internal walls, each pierced by a door opening."""
    walls = []
    cuts = {"v": [], "h": []}
    for _ in range(max(0, rooms - 1)):
        axis = "v" if rng.random() < 0.5 else "h"
        span = w if axis == "v" else h
        if span < 4.0:
            axis = "v" if axis == "h" else "h"
            span = w if axis == "v" else h
        ok = False
        for _ in range(20):
            pos = round(float(rng.uniform(1.8, span - 1.8)), 1)
            if all(abs(pos - p) > 1.5 for p in cuts[axis]):
                ok = True
                break
        if not ok:
            continue
        cuts[axis].append(pos)
        tw = WALL_THICKNESS / 2.0
        extent = h if axis == "v" else w
        gap0 = float(rng.uniform(0.5, extent - 0.5 - DOOR_OPENING))
        if axis == "v":
            solid = box(pos - tw, 0.0, pos + tw, extent)
            gap = box(pos - tw - 0.01, gap0, pos + tw + 0.01, gap0 + DOOR_OPENING)
        else:
            solid = box(0.0, pos - tw, extent, pos + tw)
            gap = box(gap0, pos - tw - 0.01, gap0 + DOOR_OPENING, pos + tw + 0.01)
        walls.append(solid.difference(gap))
    free = box(0.0, 0.0, w, h)
    if walls:
        free = free.difference(unary_union(walls))
    return free


def generate_scene(style, params=None, seed=0):
    """Build a deterministic synthetic scene with ground-truth queries."""
    params = params or SceneParams()
    rng = np.random.default_rng(seed)

    if style == "single_room":
        w, h = _sample_dims(params, rng)
        rings_data = [( _rect_ring(w, h), ["wall"] * 4 )]
        rings_data = _assign_labels(rings_data, rng, params.door_edges,
                                    params.window_edges)
    elif style == "symmetric":
        w, h = _sample_dims(params, rng, snap=0.2)
        rings_data = [( _rect_ring(w, h), ["wall"] * 4 )]
    elif style == "multi_room":
        rings_data = None
        for attempt in range(50):
            w, h = _sample_dims(params, rng)
            poly = _multi_room_polygon(w, h, params.rooms, rng)
            if poly.geom_type == "Polygon":
                rings_data = _polygon_to_rings_data(poly)
                break
        if rings_data is None:
            raise ValueError("could not realize a connected multi-room layout")
        rings_data = _assign_labels(rings_data, rng, params.door_edges,
                                    params.window_edges)
    else:
        raise ValueError(f"unknown scene style {style!r}")

    fm = build_floormap(rings_data)
    queries = []
    for _ in range(params.num_queries):
        t = sample_free_position(fm, rng, clearance=params.clearance)
        theta = float(rng.uniform(0.0, TWO_PI))
        queries.append(encode_depth_query(fm, (t, theta), fov=params.query_fov,
                                          V=params.query_V, D=params.query_D))
    return SyntheticScene(floormap=fm, gt_queries=queries, seed=seed,
                          style=style, params=params)


def save_scene(scene, out_dir, scan_rays=72):
    """Write map.json, queries.json, scans.json and gt.json into a directory."""
    os.makedirs(out_dir, exist_ok=True)
    save_floormap(scene.floormap, os.path.join(out_dir, "map.json"))

    queries = [q.to_json_dict() for q in scene.gt_queries]
    scans = []
    gts = []
    for q in scene.gt_queries:
        scan = lidar_scan(scene.floormap, q.t, scan_rays, yaw=q.theta)
        scans.append(scan.to_json_dict())
        gts.append([float(q.t[0]), float(q.t[1]), float(q.theta)])
    for name, payload in (("queries.json", queries), ("scans.json", scans),
                          ("gt.json", gts)):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
