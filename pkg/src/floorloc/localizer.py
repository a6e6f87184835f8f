"""Pose recovery over a dense location grid with rotation reduction.

Locations are scored once in canonical orientation; the rotation is
recovered by cyclically shifting the hypothesis feature and keeping the
best of num_angles uniform samples. Peaks of the posterior grid are
refined by a derivative-free local search whose first step is always
accepted, which moves estimates off the sampling lattice.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._geometry import TWO_PI, wrap_angle
from .circfeat import rotate, similarity
from .renderer import render_pose

DEFAULT_CELL = 0.10
DEFAULT_NUM_ANGLES = 16
DEFAULT_PEAK_THRESHOLD = 0.8


@dataclass
class PoseHypothesis:
    t: np.ndarray
    theta: float
    score: float
    likelihood: float = 0.0

    def to_json_dict(self):
        return {"x": float(self.t[0]), "y": float(self.t[1]),
                "theta": float(self.theta), "score": float(self.score),
                "likelihood": float(self.likelihood)}


@dataclass
class RefineConfig:
    """Pattern-search schedule for pose refinement."""
    step_t: float = None            # initial translation step; half a cell if None
    step_r: float = None            # initial rotation step; half the angle spacing if None
    min_step_t: float = 0.01        # 1 cm
    min_step_r: float = math.radians(0.5)
    max_iters: int = 30


@dataclass
class PosteriorGrid:
    """Dense best-rotation similarity field over the map bounding box.

    scores[ix, iy] belongs to the cell centred at
    origin + (ix + 0.5, iy + 0.5) * cell. Non-free cells hold score 0 and
    are excluded from the likelihood normalization.
    """
    origin: np.ndarray
    cell: float
    scores: np.ndarray
    best_theta: np.ndarray
    free_mask: np.ndarray

    @property
    def shape(self):
        return self.scores.shape

    def cell_center(self, ix, iy):
        return self.origin + (np.array([ix, iy]) + 0.5) * self.cell

    def likelihoods(self):
        """Scores normalized to unit mass over free cells."""
        out = np.zeros_like(self.scores)
        total = self.scores[self.free_mask].sum()
        n_free = int(self.free_mask.sum())
        if n_free == 0:
            return out
        if total > 0.0:
            out[self.free_mask] = self.scores[self.free_mask] / total
        else:
            out[self.free_mask] = 1.0 / n_free
        return out

    def to_pgm_bytes(self):
        """16-bit binary PGM, rows top-down (max y first)."""
        w, h = self.scores.shape
        img = np.clip(np.round(self.scores * 65535.0), 0, 65535).astype(">u2")
        rows = img.T[::-1]  # (h, w), top row = max y
        header = f"P5\n{w} {h}\n65535\n".encode("ascii")
        return header + rows.tobytes(order="C")

    def to_csv_text(self):
        """One row per cell: x, y, score, best_theta (row-major in x)."""
        lines = ["x,y,score,best_theta"]
        w, h = self.scores.shape
        for iy in range(h):
            for ix in range(w):
                cx, cy = self.cell_center(ix, iy)
                lines.append(f"{float(cx)!r},{float(cy)!r},"
                             f"{float(self.scores[ix, iy])!r},"
                             f"{float(self.best_theta[ix, iy])!r}")
        return "\n".join(lines) + "\n"


def best_rotation(query, hyp, num_angles=DEFAULT_NUM_ANGLES):
    """Argmax over uniformly sampled rotations of the hypothesis feature.

    Returns (theta, score); ties keep the smallest angle index. Angles
    whose rotation leaves no jointly valid segment are skipped.
    """
    if query.V != hyp.V or query.D != hyp.D:
        raise ValueError("query and hypothesis feature shapes differ")
    if num_angles < 1:
        raise ValueError("num_angles must be >= 1")
    best_score = -1.0
    best_theta = 0.0
    for k in range(num_angles):
        theta = TWO_PI * k / num_angles
        rotated = rotate(hyp, theta)
        if not (query.valid & rotated.valid).any():
            continue
        s = similarity(query, rotated)
        if s > best_score:
            best_score = s
            best_theta = theta
    if best_score < 0.0:
        raise ValueError("no rotation leaves a jointly valid segment")
    return best_theta, best_score


def _grid_geometry(fm, cell):
    xmin, ymin, xmax, ymax = fm.bbox
    w = max(1, int(math.ceil((xmax - xmin) / cell - 1e-9)))
    h = max(1, int(math.ceil((ymax - ymin) / cell - 1e-9)))
    origin = np.array([xmin, ymin])
    xs = xmin + (np.arange(w) + 0.5) * cell
    ys = ymin + (np.arange(h) + 0.5) * cell
    centers = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)  # (w, h, 2)
    return origin, w, h, centers


class GridLocalizer:
    """Renders the hypothesis grid once and scores any number of queries.

    Rendering is query-independent, so batch evaluation reuses the per-cell
    features and visibility instead of re-rendering per query.
    """

    def __init__(self, pcm, fm, cb, cell=DEFAULT_CELL):
        self.pcm = pcm
        self.fm = fm
        self.cb = cb
        self.cell = float(cell)
        if self.cell <= 0.0:
            raise ValueError("cell must be positive")
        self.origin, self.w, self.h, centers = _grid_geometry(fm, self.cell)
        flat = centers.reshape(-1, 2)
        free = _kernels.free_mask_for_cells(flat, fm.edges)
        self.free_mask = free.reshape(self.w, self.h)
        if not free.any():
            raise ValueError("no grid cell centres lie in free space")
        self.free_cells = np.ascontiguousarray(flat[free])
        classes = cb.point_classes(pcm)
        feats, counts = _kernels.render_cells(
            self.free_cells, pcm.positions, pcm.normals, classes, fm.edges,
            cb.angle_codes, cb.dist_codes, cb.d_max, cb.V)
        self.features = feats
        self.valid = counts > 0

    def posterior(self, query, num_angles=DEFAULT_NUM_ANGLES):
        """Best-rotation similarity per free cell as a PosteriorGrid."""
        if query.V != self.cb.V or query.D != self.cb.D:
            raise ValueError("query feature shape mismatch with codebooks")
        q_seg = np.ascontiguousarray(query.segments)
        q_norm = np.linalg.norm(q_seg, axis=1)
        scores_flat, best_k = _kernels.rotation_search(
            q_seg, q_norm, query.valid, self.features, self.valid, num_angles)
        scores = np.zeros((self.w, self.h))
        theta = np.zeros((self.w, self.h))
        scores[self.free_mask] = scores_flat
        theta[self.free_mask] = TWO_PI * best_k / num_angles
        return PosteriorGrid(origin=self.origin.copy(), cell=self.cell,
                             scores=scores, best_theta=theta,
                             free_mask=self.free_mask.copy())

    def localize(self, query, num_angles=DEFAULT_NUM_ANGLES,
                 threshold=DEFAULT_PEAK_THRESHOLD, topk=3, do_refine=True,
                 refine_config=None):
        """score -> NMS peaks -> refine -> re-sort by refined score."""
        grid = self.posterior(query, num_angles)
        peaks = extract_peaks(grid, threshold)
        if do_refine:
            cfg = refine_config or RefineConfig()
            if cfg.step_t is None or cfg.step_r is None:
                cfg = RefineConfig(
                    step_t=cfg.step_t if cfg.step_t is not None else 0.5 * self.cell,
                    step_r=cfg.step_r if cfg.step_r is not None else 0.5 * TWO_PI / num_angles,
                    min_step_t=cfg.min_step_t, min_step_r=cfg.min_step_r,
                    max_iters=cfg.max_iters)
            peaks = [refine(self.pcm, self.fm, self.cb, query, p, cfg) for p in peaks]
            peaks.sort(key=lambda p: -p.score)
        return peaks[:topk]


def score_grid(pcm, fm, cb, query, cell=DEFAULT_CELL, num_angles=DEFAULT_NUM_ANGLES):
    """One-shot posterior grid (renders the hypothesis grid internally)."""
    return GridLocalizer(pcm, fm, cb, cell).posterior(query, num_angles)


def extract_peaks(grid, threshold=DEFAULT_PEAK_THRESHOLD):
    """Strict 3x3 free-cell maxima with score >= threshold, best first.

    Plateaus are suppressed (no strict winner); non-free neighbours are
    ignored. Likelihoods come from the grid normalization.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    w, h = grid.shape
    like = grid.likelihoods()
    peaks = []
    for ix in range(w):
        for iy in range(h):
            if not grid.free_mask[ix, iy]:
                continue
            s = grid.scores[ix, iy]
            if s < threshold:
                continue
            is_peak = True
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    if dx == 0 and dy == 0:
                        continue
                    jx, jy = ix + dx, iy + dy
                    if 0 <= jx < w and 0 <= jy < h and grid.free_mask[jx, jy]:
                        if grid.scores[jx, jy] >= s:
                            is_peak = False
                            break
                if not is_peak:
                    break
            if is_peak:
                peaks.append(PoseHypothesis(
                    t=grid.cell_center(ix, iy),
                    theta=float(grid.best_theta[ix, iy]),
                    score=float(s),
                    likelihood=float(like[ix, iy])))
    peaks.sort(key=lambda p: -p.score)
    return peaks


def refine(pcm, fm, cb, query, init, config=None, trace_out=None):
    """Pattern-search refinement of one pose hypothesis.

    Each iteration proposes +-step moves in x, y and theta, evaluated by
    re-rendering at the proposal; the best proposal of the first iteration
    is accepted unconditionally (unquantization), afterwards only
    improving proposals are taken and steps halve on failure. Returns the
    best pose seen, including the initial one. If trace_out is a list, the
    scores of accepted states are appended to it in order.
    """
    cfg = config or RefineConfig()
    step_t = cfg.step_t if cfg.step_t is not None else 0.5 * DEFAULT_CELL
    step_r = cfg.step_r if cfg.step_r is not None else 0.5 * TWO_PI / DEFAULT_NUM_ANGLES

    def evaluate(t, theta):
        if not fm.contains(t):
            return None
        try:
            feat = render_pose(pcm, fm, cb, t, theta)
            return similarity(query, feat)
        except ValueError:
            return None

    cur_t = np.asarray(init.t, dtype=np.float64).copy()
    cur_theta = wrap_angle(init.theta)
    cur_score = evaluate(cur_t, cur_theta)
    if cur_score is None:
        raise ValueError("initial pose is not in free space")

    best_t, best_theta, best_score = cur_t.copy(), cur_theta, cur_score
    first = True

    for _ in range(cfg.max_iters):
        proposals = [
            (cur_t + np.array([step_t, 0.0]), cur_theta),
            (cur_t + np.array([-step_t, 0.0]), cur_theta),
            (cur_t + np.array([0.0, step_t]), cur_theta),
            (cur_t + np.array([0.0, -step_t]), cur_theta),
            (cur_t, wrap_angle(cur_theta + step_r)),
            (cur_t, wrap_angle(cur_theta - step_r)),
        ]
        cand_best = None
        for t, theta in proposals:
            s = evaluate(t, theta)
            if s is None:
                continue
            if cand_best is None or s > cand_best[0]:
                cand_best = (s, t, theta)
        if cand_best is None:
            step_t *= 0.5
            step_r *= 0.5
            if step_t < cfg.min_step_t and step_r < cfg.min_step_r:
                break
            continue

        s, t, theta = cand_best
        if first or s > cur_score:
            # the first proposal is accepted even without improvement
            cur_t, cur_theta, cur_score = t, theta, s
            if trace_out is not None:
                trace_out.append(s)
            if s > best_score:
                best_t, best_theta, best_score = t.copy(), theta, s
        else:
            step_t *= 0.5
            step_r *= 0.5
            if step_t < cfg.min_step_t and step_r < cfg.min_step_r:
                break
        first = False

    return PoseHypothesis(t=best_t, theta=best_theta, score=float(best_score),
                          likelihood=init.likelihood)


def localize(pcm, fm, cb, query, cell=DEFAULT_CELL, num_angles=DEFAULT_NUM_ANGLES,
             threshold=DEFAULT_PEAK_THRESHOLD, topk=3, do_refine=True,
             refine_config=None):
    """Full pipeline: grid scoring, peak extraction, refinement, top-k."""
    return GridLocalizer(pcm, fm, cb, cell).localize(
        query, num_angles=num_angles, threshold=threshold, topk=topk,
        do_refine=do_refine, refine_config=refine_config)
