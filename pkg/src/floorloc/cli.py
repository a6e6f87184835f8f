"""Command-line interface. All text output is UTF-8 with '.' decimals and LF."""

import argparse
import json
import os
import sys

import numpy as np

from ._geometry import TWO_PI
from .baseline_mcl import ScanLikelihoodConfig, mcl_localize
from .circfeat import CircularFeature
from .evaluation import bench_throughput, evaluate, inverse_match
from .floormap import LABELS, load_floormap, rasterize
from .localizer import GridLocalizer, PoseHypothesis
from .raycast import DepthScan
from .renderer import load_codebooks, render_pose, save_codebooks
from .scenes import SceneParams, generate_scene, save_scene
from .training import TrainConfig, init_codebooks, loss_curve_csv, train_codebooks


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _json_text(obj):
    return json.dumps(obj, indent=2) + "\n"


def _load_query_feature(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "segments" in doc:
        return CircularFeature.from_json_dict(doc)
    return CircularFeature.from_json_dict(doc["feature"])


def _load_scan(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return DepthScan.from_json_dict(doc)


def _hyps_json(hyps):
    return _json_text([h.to_json_dict() for h in hyps])


def cmd_rasterize(args):
    fm = load_floormap(args.map)
    pcm = rasterize(fm, interval=args.interval)
    lines = ["x,y,nx,ny,label,edge_id"]
    for i in range(len(pcm)):
        x, y = (float(v) for v in pcm.positions[i])
        nx, ny = (float(v) for v in pcm.normals[i])
        lab = LABELS[int(np.argmax(pcm.semantics[i]))]
        lines.append(f"{x!r},{y!r},{nx!r},{ny!r},{lab},{int(pcm.edge_ids[i])}")
    _write_text(args.out, "\n".join(lines) + "\n")


def cmd_render(args):
    fm = load_floormap(args.map)
    cb = load_codebooks(args.codebooks)
    pcm = rasterize(fm, interval=args.interval)
    feat = render_pose(pcm, fm, cb, np.array([args.x, args.y]), args.theta)
    _write_text(args.out, _json_text(feat.to_json_dict()))


def cmd_localize(args):
    fm = load_floormap(args.map)
    cb = load_codebooks(args.codebooks)
    pcm = rasterize(fm, interval=args.interval)
    query = _load_query_feature(args.query)
    loc = GridLocalizer(pcm, fm, cb, cell=args.cell)
    hyps = loc.localize(query, num_angles=args.angles, threshold=args.threshold,
                        topk=args.topk, do_refine=not args.no_refine)
    if args.posterior or args.posterior_csv:
        grid = loc.posterior(query, num_angles=args.angles)
        if args.posterior:
            with open(args.posterior, "wb") as fh:
                fh.write(grid.to_pgm_bytes())
        if args.posterior_csv:
            _write_text(args.posterior_csv, grid.to_csv_text())
    _write_text(args.out, _hyps_json(hyps))


def _find_maps(dataset_dir):
    paths = []
    for root, _dirs, files in os.walk(dataset_dir):
        for name in sorted(files):
            if name == "map.json" or (root == dataset_dir and name.endswith(".json")
                                      and name not in ("queries.json", "scans.json",
                                                       "gt.json")):
                paths.append(os.path.join(root, name))
    return sorted(paths)


def cmd_train(args):
    map_paths = _find_maps(args.dataset_dir)
    if not map_paths:
        raise SystemExit(f"no map.json files under {args.dataset_dir}")
    maps = []
    for p in map_paths:
        fm = load_floormap(p)
        maps.append((fm, rasterize(fm, interval=args.interval)))
    cb = init_codebooks(args.G, args.H, args.V, args.D, num_classes=3,
                        d_max=args.dmax, seed=args.seed)
    cfg = TrainConfig(num_negatives=args.negatives, lr=args.lr,
                      epochs=args.epochs, seed=args.seed)
    trained, curve = train_codebooks(maps, cb, cfg)
    save_codebooks(trained, args.out)
    if args.curve:
        _write_text(args.curve, loss_curve_csv(curve))
    sys.stdout.write(f"trained codebooks written to {args.out} "
                     f"(final loss {curve[-1]['total']:.4f})\n")


def cmd_baseline(args):
    fm = load_floormap(args.map)
    scan = _load_scan(args.scan)
    if args.rays != scan.num_rays:
        raise SystemExit(f"scan has {scan.num_rays} rays, --rays says {args.rays}")
    cfg = ScanLikelihoodConfig(num_rays=scan.num_rays, sigma_d=args.sigma)
    grid, peaks = mcl_localize(scan, fm, cell=args.cell, num_angles=args.angles,
                               cfg=cfg, threshold=args.threshold, topk=args.topk)
    if args.posterior:
        with open(args.posterior, "wb") as fh:
            fh.write(grid.to_pgm_bytes())
    _write_text(args.out, _hyps_json(peaks))


def cmd_gen_scene(args):
    params = SceneParams(num_queries=args.queries, rooms=args.rooms,
                         query_V=args.V, query_D=args.D,
                         query_fov=args.fov if args.fov else TWO_PI)
    scene = generate_scene(args.style, params, seed=args.seed)
    save_scene(scene, args.out, scan_rays=args.scan_rays)
    sys.stdout.write(f"scene ({args.style}, seed {args.seed}) written to {args.out}\n")


def cmd_eval(args):
    with open(args.results, "r", encoding="utf-8") as fh:
        results_doc = json.load(fh)
    with open(args.gt, "r", encoding="utf-8") as fh:
        gt_doc = json.load(fh)
    results = []
    for hyps in results_doc:
        results.append([PoseHypothesis(t=np.array([h["x"], h["y"]]),
                                       theta=float(h["theta"]),
                                       score=float(h.get("score", 0.0)),
                                       likelihood=float(h.get("likelihood", 0.0)))
                        for h in hyps])
    gts = [(np.array([g[0], g[1]]), float(g[2])) for g in gt_doc]
    report = evaluate(results, gts)
    _write_text(args.out, _json_text(report.to_json_dict()))


def cmd_bench(args):
    fm = load_floormap(args.map)
    cb = load_codebooks(args.codebooks)
    pcm = rasterize(fm, interval=args.interval)
    result = bench_throughput(pcm, fm, cb, cell=args.cell, repetitions=args.reps,
                              num_angles=args.angles)
    if args.out:
        _write_text(args.out, result.csv_text())
    sys.stdout.write(result.summary_text())


def cmd_invmatch(args):
    query = _load_query_feature(args.query)
    cb = load_codebooks(args.codebooks)
    matches = inverse_match(query, None, cb)
    doc = []
    for m in matches:
        if m is None:
            doc.append(None)
        else:
            c, d, psi = m
            doc.append({"class": LABELS[c] if c < len(LABELS) else int(c),
                        "distance": d, "incident_angle": psi})
    _write_text(args.out, _json_text(doc))


def build_parser():
    p = argparse.ArgumentParser(prog="floorloc",
                                description="2D floor-map localization toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common_out(sp):
        sp.add_argument("--out", default=None, help="output path (default stdout)")

    sp = sub.add_parser("rasterize", help="sample a map boundary into points")
    sp.add_argument("map")
    sp.add_argument("--interval", type=float, default=0.1)
    add_common_out(sp)
    sp.set_defaults(func=cmd_rasterize)

    sp = sub.add_parser("render", help="render a circular feature at a pose")
    sp.add_argument("map")
    sp.add_argument("codebooks")
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--y", type=float, required=True)
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--interval", type=float, default=0.1)
    add_common_out(sp)
    sp.set_defaults(func=cmd_render)

    sp = sub.add_parser("localize", help="localize a query feature on a map")
    sp.add_argument("map")
    sp.add_argument("codebooks")
    sp.add_argument("query")
    sp.add_argument("--cell", type=float, default=0.1)
    sp.add_argument("--angles", type=int, default=16)
    sp.add_argument("--threshold", type=float, default=0.8)
    sp.add_argument("--topk", type=int, default=3)
    sp.add_argument("--no-refine", action="store_true")
    sp.add_argument("--interval", type=float, default=0.1)
    sp.add_argument("--posterior", default=None, help="write 16-bit PGM here")
    sp.add_argument("--posterior-csv", default=None)
    add_common_out(sp)
    sp.set_defaults(func=cmd_localize)

    sp = sub.add_parser("train", help="train codebooks on a scene directory")
    sp.add_argument("dataset_dir")
    sp.add_argument("--epochs", type=int, default=50)
    sp.add_argument("--lr", type=float, default=0.5)
    sp.add_argument("--negatives", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--curve", default=None, help="write loss curve CSV here")
    sp.add_argument("--G", type=int, default=32)
    sp.add_argument("--H", type=int, default=32)
    sp.add_argument("--V", type=int, default=16)
    sp.add_argument("--D", type=int, default=32)
    sp.add_argument("--dmax", type=float, default=10.0)
    sp.add_argument("--interval", type=float, default=0.1)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("baseline", help="classical depth-scan MCL")
    sp.add_argument("map")
    sp.add_argument("scan")
    sp.add_argument("--rays", type=int, default=72)
    sp.add_argument("--cell", type=float, default=0.1)
    sp.add_argument("--angles", type=int, default=16)
    sp.add_argument("--sigma", type=float, default=0.25)
    sp.add_argument("--threshold", type=float, default=0.0)
    sp.add_argument("--topk", type=int, default=3)
    sp.add_argument("--posterior", default=None)
    add_common_out(sp)
    sp.set_defaults(func=cmd_baseline)

    sp = sub.add_parser("gen-scene", help="generate a synthetic scene")
    sp.add_argument("--style", choices=("single_room", "multi_room", "symmetric"),
                    required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--queries", type=int, default=10)
    sp.add_argument("--rooms", type=int, default=3)
    sp.add_argument("--V", type=int, default=16)
    sp.add_argument("--D", type=int, default=32)
    sp.add_argument("--fov", type=float, default=None)
    sp.add_argument("--scan-rays", type=int, default=72)
    sp.set_defaults(func=cmd_gen_scene)

    sp = sub.add_parser("eval", help="score localization results against GT")
    sp.add_argument("results")
    sp.add_argument("gt")
    add_common_out(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("bench", help="grid-scoring throughput")
    sp.add_argument("map")
    sp.add_argument("codebooks")
    sp.add_argument("--reps", type=int, default=3)
    sp.add_argument("--cell", type=float, default=0.1)
    sp.add_argument("--angles", type=int, default=16)
    sp.add_argument("--interval", type=float, default=0.1)
    sp.add_argument("--out", default=None, help="write CSV here")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("invmatch", help="inverse-match a query against codebooks")
    sp.add_argument("query")
    sp.add_argument("codebooks")
    add_common_out(sp)
    sp.set_defaults(func=cmd_invmatch)

    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
