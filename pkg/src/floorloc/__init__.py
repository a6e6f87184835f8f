"""floorloc: latent-space rendering localization on 2D floor maps.

Rasterize polygonal maps into annotated point clouds, render
view-dependent circular features from per-class codebooks, score queries
over a dense pose grid with rotation reduction, refine the best
estimates, train the codebooks with triplet + context metric losses, and
compare against a classical depth-scan MCL baseline.
"""

from .baseline_mcl import ScanLikelihoodConfig, mcl_localize, scan_likelihood
from .circfeat import CircularFeature, context, mask_fov, rotate, similarity
from .evaluation import (BenchResult, EvalReport, bench_throughput, evaluate,
                         inverse_match)
from .floormap import (FloorMap, MapError, MapPoint, PointCloudMap,
                       build_floormap, load_floormap, parse_floormap,
                       rasterize, sample_free_position, save_floormap)
from .localizer import (GridLocalizer, PoseHypothesis, PosteriorGrid,
                        RefineConfig, best_rotation, extract_peaks, localize,
                        refine, score_grid)
from .raycast import DepthScan, VisibilityResult, lidar_scan, visible_points
from .renderer import (CodebookSet, RayDynamics, load_codebooks, lookup_feature,
                       ray_dynamics, render, render_pose, save_codebooks)
from .scenes import SceneParams, SyntheticScene, generate_scene, save_scene
from .training import (QuerySample, TrainConfig, context_loss,
                       encode_depth_query, encode_oracle_query, init_codebooks,
                       train_codebooks, triplet_loss)

__version__ = "0.1.0"

__all__ = [
    "BenchResult", "CircularFeature", "CodebookSet", "DepthScan", "EvalReport",
    "FloorMap", "GridLocalizer", "MapError", "MapPoint", "PointCloudMap",
    "PoseHypothesis", "PosteriorGrid", "QuerySample", "RayDynamics",
    "RefineConfig", "ScanLikelihoodConfig", "SceneParams", "SyntheticScene",
    "TrainConfig", "VisibilityResult", "bench_throughput", "best_rotation",
    "build_floormap", "context", "context_loss", "encode_depth_query",
    "encode_oracle_query", "evaluate", "extract_peaks", "generate_scene",
    "init_codebooks", "inverse_match", "lidar_scan", "load_codebooks",
    "load_floormap", "localize", "lookup_feature", "mask_fov", "mcl_localize",
    "parse_floormap", "rasterize", "ray_dynamics", "refine", "render",
    "render_pose", "rotate", "sample_free_position", "save_codebooks",
    "save_floormap", "save_scene", "scan_likelihood", "score_grid",
    "similarity", "train_codebooks", "triplet_loss", "visible_points",
]
