"""Numba-compiled hot paths: visibility, ray casting, grid rendering, scoring.

Every kernel here has a slow reference twin, either a public numpy routine
in the package or a brute-force oracle in the test suite; the kernels are
only allowed to be faster, never different (tolerances pinned in tests).
Edges are passed as (E, 4) float64 arrays of [ax, ay, bx, by].
"""

import math

import numpy as np
from numba import njit

# Sightline hits closer than this to the target point do not occlude it;
# rasterized points sit exactly on edges and would otherwise self-occlude.
POINT_EPS = 1e-6


@njit(cache=True)
def point_in_polygon(x, y, edges):
    """Even-odd test against all edges; True means free space."""
    inside = False
    for e in range(edges.shape[0]):
        y1 = edges[e, 1]
        y2 = edges[e, 3]
        if (y1 > y) != (y2 > y):
            x1 = edges[e, 0]
            x2 = edges[e, 2]
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xint:
                inside = not inside
    return inside


@njit(cache=True)
def free_mask_for_cells(cells, edges):
    n = cells.shape[0]
    out = np.empty(n, np.bool_)
    for i in range(n):
        out[i] = point_in_polygon(cells[i, 0], cells[i, 1], edges)
    return out


@njit(cache=True)
def segment_occluded(ox, oy, px, py, edges):
    """True if the open sightline from (ox,oy) to (px,py) crosses an edge.

    Crossings within POINT_EPS metres of the target endpoint are ignored
    (the target itself lies on an edge); collinear grazing is a no-hit.
    """
    rx = px - ox
    ry = py - oy
    rlen = math.sqrt(rx * rx + ry * ry)
    if rlen == 0.0:
        return False
    tmax = 1.0 - POINT_EPS / rlen
    for e in range(edges.shape[0]):
        ax = edges[e, 0]
        ay = edges[e, 1]
        sx = edges[e, 2] - ax
        sy = edges[e, 3] - ay
        denom = rx * sy - ry * sx
        if denom == 0.0:
            continue
        qx = ax - ox
        qy = ay - oy
        t = (qx * sy - qy * sx) / denom
        if t <= 0.0 or t >= tmax:
            continue
        u = (qx * ry - qy * rx) / denom
        if u < 0.0 or u > 1.0:
            continue
        return True
    return False


@njit(cache=True)
def visible_point_mask(ox, oy, positions, normals, edges):
    """Visibility of every map point from one origin.

    A point is visible when it faces the origin (ray . normal < 0) and no
    edge blocks the sightline.
    """
    p = positions.shape[0]
    out = np.zeros(p, np.bool_)
    for i in range(p):
        px = positions[i, 0]
        py = positions[i, 1]
        dx = px - ox
        dy = py - oy
        if dx * normals[i, 0] + dy * normals[i, 1] >= 0.0:
            continue
        if segment_occluded(ox, oy, px, py, edges):
            continue
        out[i] = True
    return out


@njit(cache=True)
def cast_ray(ox, oy, cx, cy, edges):
    """Nearest edge hit along a unit direction. Returns (distance, edge index).

    No hit yields (inf, -1); rays collinear with an edge skip that edge.
    """
    best_t = np.inf
    best_e = -1
    for e in range(edges.shape[0]):
        ax = edges[e, 0]
        ay = edges[e, 1]
        sx = edges[e, 2] - ax
        sy = edges[e, 3] - ay
        denom = cx * sy - cy * sx
        if denom == 0.0:
            continue
        qx = ax - ox
        qy = ay - oy
        t = (qx * sy - qy * sx) / denom
        if t <= 1e-9 or t >= best_t:
            continue
        u = (qx * cy - qy * cx) / denom
        if u < 0.0 or u > 1.0:
            continue
        best_t = t
        best_e = e
    return best_t, best_e


@njit(cache=True)
def render_cells(cells, positions, normals, classes, edges,
                 angle_codes, dist_codes, d_max, num_segments):
    """Render hypothesis circular features for a batch of locations.

    For each cell: visible points contribute angle-code + distance-code
    lookups (circular / clamped linear interpolation) averaged into the
    segment that covers their viewing-ray direction.

    Returns (features (N, V, D) means, counts (N, V) of contributing points).
    """
    n_cells = cells.shape[0]
    n_pts = positions.shape[0]
    G = angle_codes.shape[1]
    H = dist_codes.shape[1]
    D = angle_codes.shape[2]
    V = num_segments
    two_pi = 2.0 * np.pi

    feats = np.zeros((n_cells, V, D))
    counts = np.zeros((n_cells, V), np.int64)

    for n in range(n_cells):
        ox = cells[n, 0]
        oy = cells[n, 1]
        for i in range(n_pts):
            px = positions[i, 0]
            py = positions[i, 1]
            dx = px - ox
            dy = py - oy
            nx = normals[i, 0]
            ny = normals[i, 1]
            if dx * nx + dy * ny >= 0.0:
                continue
            if segment_occluded(ox, oy, px, py, edges):
                continue

            d = math.sqrt(dx * dx + dy * dy)
            psi = math.atan2(dx * ny - dy * nx, dx * nx + dy * ny)
            if psi < 0.0:
                psi += two_pi
            omega = math.atan2(dy, dx)
            if omega < 0.0:
                omega += two_pi

            c = classes[i]
            a = G * psi / two_pi
            ia = int(math.floor(a))
            fa = a - ia
            ia0 = ia % G
            ia1 = (ia + 1) % G
            b = H * d / d_max
            if b > H - 1.0:
                b = H - 1.0
            ib = int(math.floor(b))
            fb = b - ib
            ib1 = ib + 1
            if ib1 > H - 1:
                ib1 = H - 1

            seg = int(V * omega / two_pi)
            if seg >= V:
                seg = V - 1

            for k in range(D):
                feats[n, seg, k] += ((1.0 - fa) * angle_codes[c, ia0, k]
                                     + fa * angle_codes[c, ia1, k]
                                     + (1.0 - fb) * dist_codes[c, ib, k]
                                     + fb * dist_codes[c, ib1, k])
            counts[n, seg] += 1

        for s in range(V):
            if counts[n, s] > 0:
                inv = 1.0 / counts[n, s]
                for k in range(D):
                    feats[n, s, k] *= inv
    return feats, counts


@njit(cache=True)
def rotation_search(q_seg, q_norm, q_valid, feats, valids, num_angles):
    """Best-rotation similarity per rendered cell feature.

    Mirrors similarity()/rotate(): joint validity mask, cosine mapped to
    [0,1] with the joint count as denominator, interpolated rotation for
    non-integer segment shifts, ties broken by the smallest angle index.
    Cells with no evaluable rotation score 0.
    """
    n_cells = feats.shape[0]
    V = feats.shape[1]
    D = feats.shape[2]
    scores = np.zeros(n_cells)
    best_k = np.zeros(n_cells, np.int64)
    hn = np.empty(V)

    for n in range(n_cells):
        for s in range(V):
            acc = 0.0
            for k in range(D):
                acc += feats[n, s, k] * feats[n, s, k]
            hn[s] = math.sqrt(acc)

        best = -1.0
        bi = 0
        for j in range(num_angles):
            shift = (V * j) / num_angles
            i = int(math.floor(shift))
            f = shift - i
            if f < 1e-9:
                integral = True
            elif f > 1.0 - 1e-9:
                integral = True
                i += 1
            else:
                integral = False

            total = 0.0
            cnt = 0
            if integral:
                for a in range(V):
                    src = (a + i) % V
                    if q_valid[a] and valids[n, src]:
                        cnt += 1
                        if q_norm[a] > 0.0 and hn[src] > 0.0:
                            dp = 0.0
                            for k in range(D):
                                dp += q_seg[a, k] * feats[n, src, k]
                            total += dp / (q_norm[a] * hn[src])
            else:
                for a in range(V):
                    s0 = (a + i) % V
                    s1 = (a + i + 1) % V
                    if q_valid[a] and valids[n, s0] and valids[n, s1]:
                        cnt += 1
                        dp = 0.0
                        nr = 0.0
                        for k in range(D):
                            v = (1.0 - f) * feats[n, s0, k] + f * feats[n, s1, k]
                            dp += v * q_seg[a, k]
                            nr += v * v
                        if nr > 0.0 and q_norm[a] > 0.0:
                            total += dp / (math.sqrt(nr) * q_norm[a])
            if cnt > 0:
                sc = total / (2.0 * cnt) + 0.5
                if sc > best:
                    best = sc
                    bi = j
        if best < 0.0:
            best = 0.0
            bi = 0
        scores[n] = best
        best_k[n] = bi
    return scores, best_k


@njit(cache=True)
def _gcd(a, b):
    while b != 0:
        a, b = b, a % b
    return a


@njit(cache=True)
def mcl_grid_scores(cells, edges, query_depths, num_angles, sigma_d, cutoff, max_range):
    """Best-rotation depth-scan likelihood per cell.

    Casts the union of all ray directions needed by the rotation samples
    once per cell, then scores each rotation by reindexing.
    """
    n_cells = cells.shape[0]
    n_rays = query_depths.shape[0]
    L = num_angles * n_rays // _gcd(num_angles, n_rays)
    step_rot = L // num_angles
    step_ray = L // n_rays
    two_pi = 2.0 * np.pi
    inv_two_sigma_sq = 1.0 / (2.0 * sigma_d * sigma_d)

    scores = np.zeros(n_cells)
    best_k = np.zeros(n_cells, np.int64)
    sim = np.empty(L)

    for n in range(n_cells):
        ox = cells[n, 0]
        oy = cells[n, 1]
        for m in range(L):
            ang = two_pi * m / L
            t, e = cast_ray(ox, oy, math.cos(ang), math.sin(ang), edges)
            if e < 0 or t > max_range:
                sim[m] = np.inf
            else:
                sim[m] = t

        best = -1.0
        bi = 0
        for j in range(num_angles):
            acc = 0.0
            for k in range(n_rays):
                qd = query_depths[k]
                sd = sim[(j * step_rot + k * step_ray) % L]
                q_inf = not np.isfinite(qd)
                s_inf = not np.isfinite(sd)
                if q_inf and s_inf:
                    cost = 0.0
                elif q_inf or s_inf:
                    cost = cutoff
                else:
                    delta = qd - sd
                    cost = delta * delta
                    if cost > cutoff:
                        cost = cutoff
                acc += cost
            sc = math.exp(-(acc / n_rays) * inv_two_sigma_sq)
            if sc > best:
                best = sc
                bi = j
        scores[n] = best
        best_k[n] = bi
    return scores, best_k
