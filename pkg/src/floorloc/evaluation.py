"""Evaluation metrics, inverse-matching diagnostics and throughput timing."""

import math
import time
from dataclasses import dataclass

import numpy as np

from ._geometry import TWO_PI, angle_diff
from .localizer import GridLocalizer
from .renderer import render

RECALL_RADII = (0.1, 0.5, 1.0)   # metres
INLIER_RADIUS = 1.0
INLIER_ANGLE = math.radians(30.0)
TOPK_FOR_RECALL = 3

# Published throughput of a GPU implementation of this rendering scheme,
# reported next to benchmark output for context only; CPU numbers here are
# not comparable.
REFERENCE_GPU_SAMPLES_PER_SEC = 13238.0


@dataclass
class EvalReport:
    recall_at: dict          # radius (m) -> fraction
    recall_1m_30deg: float
    topk_recall_1m: float
    median_terr_under_1m: float   # cm
    median_rerr_under_1m: float   # degrees
    n_queries: int

    def to_json_dict(self):
        return {
            "recall_at": {f"{r}": v for r, v in self.recall_at.items()},
            "recall_1m_30deg": self.recall_1m_30deg,
            "topk_recall_1m": self.topk_recall_1m,
            "median_terr_under_1m_cm": self.median_terr_under_1m,
            "median_rerr_under_1m_deg": self.median_rerr_under_1m,
            "n_queries": self.n_queries,
        }


def evaluate(results, gts):
    """Recall/accuracy metrics for per-query hypothesis lists.

    results[i] is the (possibly empty) ranked hypothesis list for query i;
    gts[i] is (t, theta). Medians cover only queries whose top-1
    translation error is under 1 m. Rotation error is the wrapped
    absolute difference.
    """
    if len(results) != len(gts):
        raise ValueError("results and ground truths differ in length")
    n = len(gts)
    if n == 0:
        raise ValueError("no queries to evaluate")

    terr = np.full(n, np.inf)
    rerr = np.full(n, np.inf)
    topk_hit = np.zeros(n, dtype=bool)
    for i, (hyps, gt) in enumerate(zip(results, gts)):
        gt_t, gt_theta = gt
        gt_t = np.asarray(gt_t, dtype=np.float64)
        if hyps:
            top = hyps[0]
            terr[i] = float(np.hypot(*(np.asarray(top.t) - gt_t)))
            rerr[i] = angle_diff(top.theta, gt_theta)
        for h in hyps[:TOPK_FOR_RECALL]:
            if np.hypot(*(np.asarray(h.t) - gt_t)) < INLIER_RADIUS:
                topk_hit[i] = True
                break

    recall_at = {r: float(np.mean(terr < r)) for r in RECALL_RADII}
    inlier = (terr < INLIER_RADIUS) & (rerr < INLIER_ANGLE)
    under = terr < INLIER_RADIUS
    med_t = float(np.median(terr[under]) * 100.0) if under.any() else float("nan")
    med_r = float(np.degrees(np.median(rerr[under]))) if under.any() else float("nan")
    return EvalReport(
        recall_at=recall_at,
        recall_1m_30deg=float(np.mean(inlier)),
        topk_recall_1m=float(np.mean(topk_hit)),
        median_terr_under_1m=med_t,
        median_rerr_under_1m=med_r,
        n_queries=n,
    )


def inverse_match(query, pcm, cb):
    """Greedy per-segment decode against all code-centre combinations.

    For each valid query segment, returns the (class, distance,
    incident angle) whose angle-code + distance-code sum has maximal
    cosine similarity with the segment; invalid segments map to None.
    Ties keep the lowest (class, angle index, distance index). The map
    argument matters only for per-point codebook assignments; per-class
    sets ignore it.
    """
    C, G, H, D = cb.num_classes, cb.G, cb.H, cb.D
    cand = (cb.angle_codes[:, :, None, :] + cb.dist_codes[:, None, :, :])
    cand = cand.reshape(C * G * H, D)
    norms = np.linalg.norm(cand, axis=1)

    out = []
    for a in range(query.V):
        if not query.valid[a]:
            out.append(None)
            continue
        seg = query.segments[a]
        sn = np.linalg.norm(seg)
        if sn == 0.0:
            scores = np.zeros(cand.shape[0])
        else:
            scores = np.where(norms > 0.0, cand @ seg / (np.where(norms > 0, norms, 1) * sn), 0.0)
        idx = int(np.argmax(scores))
        c, rem = divmod(idx, G * H)
        k, j = divmod(rem, H)
        out.append((c, cb.d_max * j / H, TWO_PI * k / G))
    return out


@dataclass
class BenchResult:
    cells: int
    seconds: list
    samples_per_sec: list
    workers: int = 1      # scoring kernels run single-threaded

    @property
    def mean_sps(self):
        return float(np.mean(self.samples_per_sec))

    @property
    def std_sps(self):
        return float(np.std(self.samples_per_sec))

    def csv_text(self):
        lines = ["cells,seconds,samples_per_sec"]
        for s, sps in zip(self.seconds, self.samples_per_sec):
            lines.append(f"{self.cells},{s!r},{sps!r}")
        return "\n".join(lines) + "\n"

    def summary_text(self):
        return (f"{self.cells} poses, {self.mean_sps:.0f} +- {self.std_sps:.0f} "
                f"samples/sec over {len(self.seconds)} repetitions "
                f"({self.workers} worker)\n"
                f"reference GPU implementation (context only, not comparable): "
                f"{REFERENCE_GPU_SAMPLES_PER_SEC:.0f} samples/sec\n")


def bench_throughput(pcm, fm, cb, cell=0.1, repetitions=3, num_angles=16):
    """Poses scored per second for the full grid scoring path.

    Each repetition renders the hypothesis grid and runs best-rotation
    scoring for one query (rasterization excluded; compilation warmed up
    on a single-cell run beforehand). Wall-clock based.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    # warm up JIT kernels on a tiny instance so compilation is not timed
    warm = GridLocalizer(pcm, fm, cb, cell=max(fm.bbox[2] - fm.bbox[0],
                                               fm.bbox[3] - fm.bbox[1]))
    center = np.asarray([(fm.bbox[0] + fm.bbox[2]) / 2, (fm.bbox[1] + fm.bbox[3]) / 2])
    probe = center if fm.contains(center) else warm.free_cells[0]
    query = render(pcm, fm, cb, probe)
    warm.posterior(query, num_angles)

    seconds = []
    sps = []
    cells = None
    for _ in range(repetitions):
        t0 = time.perf_counter()
        loc = GridLocalizer(pcm, fm, cb, cell=cell)
        loc.posterior(query, num_angles)
        dt = time.perf_counter() - t0
        cells = len(loc.free_cells)
        seconds.append(dt)
        sps.append(cells / dt)
    return BenchResult(cells=cells, seconds=seconds, samples_per_sec=sps)
