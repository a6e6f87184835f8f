"""Metric learning over shared semantic codebooks.

Rendering is linear in the codebook entries, so every rendered feature is
tracked as a (V, slots) weight matrix over the flattened codebooks; loss
gradients w.r.t. segments pull back through that matrix exactly. Queries
come from deterministic geometric encoders standing in for learned image
encoders, so anchors carry no codebook gradient.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._geometry import TWO_PI
from .circfeat import CircularFeature, context, mask_fov, similarity
from .floormap import sample_free_position
from .raycast import lidar_scan
from .renderer import (CodebookSet, angle_code_indices, dist_code_indices,
                       render_pose, segment_index, visible_dynamics)

DEFAULT_NUM_NEGATIVES = 100
TRIPLET_MARGIN = 0.5
CONTEXT_MARGIN = 1.0


@dataclass
class QuerySample:
    """A query feature with its ground-truth pose."""
    t: np.ndarray
    theta: float
    feature: CircularFeature
    source: str          # "oracle_noisy" or "depth_encoded"
    fov: float

    def to_json_dict(self):
        return {"gt_pose": [float(self.t[0]), float(self.t[1]), float(self.theta)],
                "fov": float(self.fov), "source": self.source,
                "feature": self.feature.to_json_dict()}

    @classmethod
    def from_json_dict(cls, doc):
        x, y, theta = doc["gt_pose"]
        return cls(t=np.array([x, y]), theta=float(theta),
                   feature=CircularFeature.from_json_dict(doc["feature"]),
                   source=doc.get("source", "oracle_noisy"),
                   fov=float(doc.get("fov", TWO_PI)))


@dataclass
class TrainConfig:
    num_negatives: int = DEFAULT_NUM_NEGATIVES
    lr: float = 0.5
    epochs: int = 50
    noise_sigma: float = 0.0
    margin_triplet: float = TRIPLET_MARGIN
    margin_context: float = CONTEXT_MARGIN
    seed: int = 0


def init_codebooks(G, H, V, D, num_classes=3, d_max=10.0, seed=0):
    """I.i.d. normal codebooks with expected per-code norm near 1."""
    if min(G, H, V, D, num_classes) < 1:
        raise ValueError("codebook dimensions must be positive")
    rng = np.random.default_rng(seed)
    std = 1.0 / math.sqrt(D)
    angle = rng.normal(0.0, std, size=(num_classes, G, D))
    dist = rng.normal(0.0, std, size=(num_classes, H, D))
    return CodebookSet(angle_codes=angle, dist_codes=dist, d_max=float(d_max), V=int(V))


def encode_oracle_query(pcm, fm, cb, pose, noise_sigma=0.0, fov=TWO_PI, rng=None):
    """Noisy rendered feature at the ground-truth pose, FoV-masked.

    The mask is centred at 0 because render_pose already rotates the
    feature into the camera frame.
    """
    t, theta = pose
    feat = render_pose(pcm, fm, cb, t, theta)
    if noise_sigma > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        noisy = feat.segments + rng.normal(0.0, noise_sigma, size=feat.segments.shape)
        noisy[~feat.valid] = 0.0
        feat = CircularFeature(noisy, feat.valid)
    feat = mask_fov(feat, 0.0, fov)
    return QuerySample(t=np.asarray(t, dtype=np.float64), theta=float(theta),
                       feature=feat, source="oracle_noisy", fov=float(fov))


def depth_encoding_blocks(D):
    """(frequencies, layout) for the sinusoidal depth/angle encoder."""
    n_freq = max(1, D // 8)
    if 4 * n_freq + 3 > D:
        n_freq = max(1, (D - 3) // 4)
    if 4 * n_freq + 3 > D:
        raise ValueError(f"feature dimension {D} too small for the depth encoder")
    return n_freq


def encode_depth_query(fm, pose, fov=TWO_PI, V=16, D=128, d_max=10.0,
                       rays_per_segment=3):
    """Deterministic geometric query: depth rays encoded as sinusoids + one-hot.

    Each segment averages the encodings of rays_per_segment rays spread
    evenly across its camera-frame span (mirroring the per-segment
    averaging on the rendering side), so full panoramas rotate
    segment-for-segment with camera yaw. Segments whose rays all miss are
    invalid. Depths clamp at d_max before encoding.
    """
    t, theta = pose
    t = np.asarray(t, dtype=np.float64)
    n_freq = depth_encoding_blocks(D)
    n_rays = V * rays_per_segment
    scan = lidar_scan(fm, t, n_rays, yaw=float(theta) + math.pi / n_rays)
    segments = np.zeros((V, D))
    valid = np.zeros(V, dtype=bool)
    for a in range(V):
        hits = 0
        acc = np.zeros(D)
        for j in range(rays_per_segment):
            m = a * rays_per_segment + j
            d = scan.depths[m]
            if not np.isfinite(d):
                continue
            hits += 1
            dn = min(d, d_max) / d_max
            psi = scan.incident_angles[m]
            for k in range(n_freq):
                f = float(2 ** k)
                acc[2 * k] += math.sin(f * math.pi * dn)
                acc[2 * k + 1] += math.cos(f * math.pi * dn)
                acc[2 * n_freq + 2 * k] += math.sin(f * psi)
                acc[2 * n_freq + 2 * k + 1] += math.cos(f * psi)
            sem = int(scan.semantics[m])
            if 0 <= sem < 3:
                acc[4 * n_freq + sem] += 1.0
        if hits > 0:
            valid[a] = True
            segments[a] = acc / hits
    feat = mask_fov(CircularFeature(segments, valid), 0.0, fov)
    return QuerySample(t=t, theta=float(theta), feature=feat,
                       source="depth_encoded", fov=float(fov))


def triplet_loss(anchor, positive, negative, margin=TRIPLET_MARGIN):
    """2 * hinge on similarity(anchor, negative) - similarity(anchor, positive)."""
    return 2.0 * max(similarity(anchor, negative) - similarity(anchor, positive)
                     + margin, 0.0)


def context_loss(anchor, positive, negative, margin=CONTEXT_MARGIN):
    """Hinge on the context-vector cosines of the same triplet."""
    ca = context(anchor)
    cp = context(positive)
    cn = context(negative)

    def cos(u, v):
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0.0 or nv == 0.0:
            raise ValueError("zero-norm context")
        return float(u @ v) / (nu * nv)

    return max(cos(ca, cn) - cos(ca, cp) + margin, 0.0)


# --- linear weight tracking through the render path ---------------------

def _slot_layout(cb):
    """Flattened codebook row layout: all angle rows, then all distance rows."""
    return cb.num_classes * cb.G, cb.num_classes * (cb.G + cb.H)


def stacked_codes(cb):
    n_angle, n_slots = _slot_layout(cb)
    X = np.empty((n_slots, cb.D))
    X[:n_angle] = cb.angle_codes.reshape(n_angle, cb.D)
    X[n_angle:] = cb.dist_codes.reshape(n_slots - n_angle, cb.D)
    return X


def split_slot_gradient(cb, grad_x):
    n_angle, _ = _slot_layout(cb)
    g_angle = grad_x[:n_angle].reshape(cb.num_classes, cb.G, cb.D)
    g_dist = grad_x[n_angle:].reshape(cb.num_classes, cb.H, cb.D)
    return g_angle, g_dist


def _rotation_matrix(V, theta):
    """(V, V) linear operator implementing rotate() on segment rows."""
    shift = (V * theta / TWO_PI) % V
    nearest = round(shift)
    R = np.zeros((V, V))
    idx = np.arange(V)
    if abs(shift - nearest) < 1e-9:
        R[idx, (idx + int(nearest)) % V] = 1.0
    else:
        i = int(math.floor(shift))
        frac = shift - i
        R[idx, (idx + i) % V] = 1.0 - frac
        R[idx, (idx + i + 1) % V] = frac
    return R


def render_pose_with_weights(pcm, fm, cb, location, theta):
    """Rendered pose feature plus its (V, slots) codebook weight matrix.

    feature.segments equals weights @ stacked_codes(cb) up to rounding, so
    gradients w.r.t. segments pull back as weights.T @ grad.
    """
    classes = cb.point_classes(pcm)
    vis, dist, psi, omega = visible_dynamics(pcm, fm, location)
    n_angle, n_slots = _slot_layout(cb)
    V = cb.V
    W0 = np.zeros((V, n_slots))
    counts = np.zeros(V, dtype=np.int64)
    if vis.size:
        cls = classes[vis]
        seg = segment_index(omega, V)
        ia0, ia1, fa = angle_code_indices(cb, psi)
        ib0, ib1, fb = dist_code_indices(cb, dist)
        np.add.at(W0, (seg, cls * cb.G + ia0), 1.0 - fa)
        np.add.at(W0, (seg, cls * cb.G + ia1), fa)
        np.add.at(W0, (seg, n_angle + cls * cb.H + ib0), 1.0 - fb)
        np.add.at(W0, (seg, n_angle + cls * cb.H + ib1), fb)
        np.add.at(counts, seg, 1)
    valid0 = counts > 0
    if not valid0.any():
        raise ValueError("no visible map points from this location")
    W0[valid0] /= counts[valid0, None]

    R = _rotation_matrix(V, theta)
    W = R @ W0
    valid = (R @ valid0.astype(np.float64)) > 1.0 - 1e-12  # all sources valid
    W[~valid] = 0.0
    segments = W @ stacked_codes(cb)
    segments[~valid] = 0.0
    return CircularFeature(segments, valid), W


# --- analytic gradients ---------------------------------------------------

def _similarity_and_seg_grad(anchor, feat):
    """similarity plus d(similarity)/d(feat.segments), shape (V, D)."""
    joint = anchor.valid & feat.valid
    n = int(joint.sum())
    if n == 0:
        raise ValueError("no jointly valid segments")
    q = anchor.segments
    h = feat.segments
    qn = np.linalg.norm(q, axis=1)
    hn = np.linalg.norm(h, axis=1)
    grad = np.zeros_like(h)
    total = 0.0
    for a in np.nonzero(joint)[0]:
        if qn[a] == 0.0 or hn[a] == 0.0:
            continue
        dp = float(q[a] @ h[a])
        cos = dp / (qn[a] * hn[a])
        total += cos
        grad[a] = (q[a] / (qn[a] * hn[a]) - cos * h[a] / (hn[a] ** 2)) / (2.0 * n)
    return total / (2.0 * n) + 0.5, grad


def _context_parts(feat):
    """Context vector plus the per-segment data needed for its Jacobian."""
    norms = np.linalg.norm(feat.segments, axis=1)
    use = feat.valid & (norms > 0.0)
    if not use.any():
        raise ValueError("context undefined: all valid segments have zero norm")
    nv = int(use.sum())
    unit = np.zeros_like(feat.segments)
    unit[use] = feat.segments[use] / norms[use, None]
    cvec = unit[use].sum(axis=0) / nv
    return cvec, use, norms, unit, nv


def _context_cos_and_seg_grad(anchor_ctx, feat):
    """cos(anchor context, feat context) and its gradient w.r.t. segments."""
    cvec, use, norms, unit, nv = _context_parts(feat)
    na = np.linalg.norm(anchor_ctx)
    nc = np.linalg.norm(cvec)
    if na == 0.0 or nc == 0.0:
        raise ValueError("zero-norm context")
    cos = float(anchor_ctx @ cvec) / (na * nc)
    g_c = anchor_ctx / (na * nc) - cos * cvec / (nc ** 2)  # d cos / d cvec
    grad = np.zeros_like(feat.segments)
    for a in np.nonzero(use)[0]:
        u = unit[a]
        grad[a] = (g_c - (u @ g_c) * u) / (norms[a] * nv)
    return cos, grad


def triplet_context_gradients(anchor, pos, pos_w, negs, cfg):
    """Mean triplet + context losses and their codebook-slot gradients.

    negs is a list of (feature, weights). Returns (mean_triplet,
    mean_context, grad over slots (S, D)). Hinge kinks take the zero
    branch; anchors are constants.
    """
    n_neg = len(negs)
    if n_neg == 0:
        raise ValueError("need at least one negative")
    s_pos, g_pos_sim = _similarity_and_seg_grad(anchor, pos)
    anchor_ctx = context(anchor)
    cos_pos, g_pos_ctx = _context_cos_and_seg_grad(anchor_ctx, pos)

    n_slots = pos_w.shape[1]
    grad_slots = np.zeros((n_slots, pos.segments.shape[1]))
    pos_seg_grad = np.zeros_like(pos.segments)
    triplet_total = 0.0
    context_total = 0.0

    for feat, w in negs:
        s_neg, g_neg_sim = _similarity_and_seg_grad(anchor, feat)
        cos_neg, g_neg_ctx = _context_cos_and_seg_grad(anchor_ctx, feat)
        neg_seg_grad = np.zeros_like(feat.segments)

        t_val = 2.0 * max(s_neg - s_pos + cfg.margin_triplet, 0.0)
        triplet_total += t_val
        if t_val > 0.0:
            neg_seg_grad += (2.0 / n_neg) * g_neg_sim
            pos_seg_grad -= (2.0 / n_neg) * g_pos_sim

        c_val = max(cos_neg - cos_pos + cfg.margin_context, 0.0)
        context_total += c_val
        if c_val > 0.0:
            neg_seg_grad += (1.0 / n_neg) * g_neg_ctx
            pos_seg_grad -= (1.0 / n_neg) * g_pos_ctx

        grad_slots += w.T @ neg_seg_grad

    grad_slots += pos_w.T @ pos_seg_grad
    return triplet_total / n_neg, context_total / n_neg, grad_slots


def train_codebooks(maps, cb, cfg):
    """SGD over shared semantic codebooks on synthetic depth queries.

    maps is a list of (floormap, pointcloud) pairs. Each iteration samples
    one map and ground-truth pose, renders the positive there and
    cfg.num_negatives uniformly random free poses as negatives, and takes
    one gradient step on mean triplet + mean context loss. Returns the
    trained codebooks and a per-epoch loss curve.
    """
    if not maps:
        raise ValueError("empty dataset")
    if cfg.num_negatives < 1:
        raise ValueError("num_negatives must be >= 1")
    cb = cb.copy()
    rng = np.random.default_rng(cfg.seed)
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(maps))
        ep_triplet = []
        ep_context = []
        for mi in order:
            fm, pcm = maps[mi]
            gt_t = sample_free_position(fm, rng, clearance=0.3)
            # canonical orientations make the positive's rotation an exact
            # segment shift, which sharpens the codes it supervises
            gt_theta = TWO_PI * int(rng.integers(cb.V)) / cb.V
            anchor = encode_depth_query(fm, (gt_t, gt_theta), fov=TWO_PI,
                                        V=cb.V, D=cb.D, d_max=cb.d_max).feature
            pos, pos_w = render_pose_with_weights(pcm, fm, cb, gt_t, gt_theta)
            negs = []
            for _ in range(cfg.num_negatives):
                t = sample_free_position(fm, rng, clearance=0.05)
                theta = rng.uniform(0.0, TWO_PI)
                negs.append(render_pose_with_weights(pcm, fm, cb, t, theta))
            lt, lc, grad_slots = triplet_context_gradients(anchor, pos, pos_w, negs, cfg)
            if not (math.isfinite(lt) and math.isfinite(lc)):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} (triplet={lt}, context={lc})")
            g_angle, g_dist = split_slot_gradient(cb, grad_slots)
            cb.angle_codes -= cfg.lr * g_angle
            cb.dist_codes -= cfg.lr * g_dist
            ep_triplet.append(lt)
            ep_context.append(lc)
        curve.append({
            "epoch": epoch,
            "mean_triplet": float(np.mean(ep_triplet)),
            "mean_context": float(np.mean(ep_context)),
            "total": float(np.mean(ep_triplet) + np.mean(ep_context)),
        })
    return cb, curve


def loss_curve_csv(curve):
    lines = ["epoch,mean_triplet,mean_context,total"]
    for row in curve:
        lines.append(f"{row['epoch']},{row['mean_triplet']!r},"
                     f"{row['mean_context']!r},{row['total']!r}")
    return "\n".join(lines) + "\n"
