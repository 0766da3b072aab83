"""Command-line interface.

Subcommands: explore (one logged rollout), train, evaluate, ablate,
pose (run the estimation pipeline on a saved cloud), mesh-info. Global
flags: --config, --seed, --out-dir, --workers.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, load_config
from .env import TactileEnv
from .errors import TouchPoseError
from .harness import (
    RESULT_HEADER,
    evaluate,
    render_table,
    run_ablation,
    run_episode,
    write_manifest,
)
from .mesh import load_cloud, load_mesh, save_mesh
from .objects import get_object, object_names
from .plots import emit_plots
from .policy.train import train
from .recon.camera import save_pgm
from .recon.pipeline import PosePipeline
from .rewards import RewardEngine


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="touchpose",
        description="Tactile exploration and object pose estimation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"touchpose {__version__}")
    parser.add_argument("--config", type=str, default=None, help="config file path")
    parser.add_argument("--seed", type=int, default=0, help="base random seed")
    parser.add_argument("--out-dir", type=str, default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explore", help="run one logged exploration rollout")
    p.add_argument("--object", required=True, choices=object_names())
    p.add_argument("--policy", default="grid", help="grid, random, or checkpoint path")
    p.add_argument("--steps", type=int, default=150)

    p = sub.add_parser("train", help="train an exploration policy")
    p.add_argument("--object", required=True, choices=object_names())
    p.add_argument("--budget", type=int, default=None, help="env steps (default run.budget)")
    p.add_argument("--seeds", type=str, default=None, help="comma list; default --seed")

    p = sub.add_parser("evaluate", help="seeded rollouts of one policy on one object")
    p.add_argument("--object", required=True, choices=object_names())
    p.add_argument("--policy", default="grid", help="grid, random, or checkpoint path")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--cap", type=int, default=None)

    p = sub.add_parser("ablate", help="variant x object result table")
    p.add_argument("--checkpoints", type=str, default=None, help="trained checkpoint dir")

    p = sub.add_parser("pose", help="estimate pose from a saved contact cloud")
    p.add_argument("--cloud", required=True, help="PLY contact cloud")
    p.add_argument("--object", default=None, choices=object_names())
    p.add_argument("--model", default=None, help="OBJ model path (alternative to --object)")
    p.add_argument("--gt-json", default=None, help="ground-truth pose JSON for scoring")
    p.add_argument("--dump-depth", action="store_true", help="write PGM depth images")
    p.add_argument("--mesh-out", default=None, help="save the reconstructed surface OBJ")

    p = sub.add_parser("plot", help="render SVG charts from training curve CSVs")
    p.add_argument("curves", nargs="+", help="curve CSV files")

    p = sub.add_parser("mesh-info", help="summarize an object or OBJ file")
    p.add_argument("target", help="bundled object name or OBJ path")
    return parser


def _load_gt(path):
    from .geometry import RigidTransform

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return RigidTransform(np.asarray(data["rotation"], float),
                          np.asarray(data["translation"], float))


def _cmd_explore(args, cfg: Config) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mesh = get_object(args.object)
    log_path = out / f"explore_{args.object}_seed{args.seed}.jsonl"
    metrics = run_episode(
        mesh, cfg, args.policy, args.seed, args.steps,
        engine=RewardEngine(cfg.reward), jsonl_path=log_path,
    )
    write_manifest(out, "explore", cfg, [args.seed], {"object": args.object})
    print(f"log: {log_path}")
    print(
        f"steps={metrics.steps} contacts={metrics.contacts} "
        f"iou={metrics.iou:.4f} auc={metrics.auc:.4f} end={metrics.terminated_reason}"
    )
    return 0


def _train_one(task):
    mesh_name, cfg, seed, out_dir, tag, budget = task
    return train(get_object(mesh_name), cfg, seed, out_dir, tag, budget)


def _cmd_train(args, cfg: Config) -> int:
    seeds = (
        [int(s) for s in args.seeds.split(",") if s.strip()]
        if args.seeds
        else [args.seed]
    )
    tasks = [
        (
            args.object,
            cfg,
            s,
            args.out_dir,
            f"{cfg.reward.variant}_{args.object}_seed{s}",
            args.budget,
        )
        for s in seeds
    ]
    if args.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_train_one, tasks))
    else:
        results = [_train_one(t) for t in tasks]
    write_manifest(
        Path(args.out_dir), "train", cfg, seeds,
        {"object": args.object, "variant": cfg.reward.variant},
    )
    for r in results:
        print(f"checkpoint: {r.checkpoint}  curves: {r.curves}  "
              f"updates={r.updates} env_steps={r.env_steps} episodes={r.episodes}")
    return 0


def _cmd_evaluate(args, cfg: Config) -> int:
    row = evaluate(
        args.policy, args.object, cfg,
        trials=args.trials, cap=args.cap, base_seed=args.seed,
    )
    out = Path(args.out_dir)
    write_manifest(out, "evaluate", cfg, row.seeds, {"object": args.object})
    print("  ".join(RESULT_HEADER))
    print("  ".join(row.csv_row()))
    return 0


def _cmd_ablate(args, cfg: Config) -> int:
    rows, csv_path, text_path = run_ablation(
        cfg, args.out_dir, args.checkpoints,
        workers=args.workers,
        log_fn=lambda r: print("  ".join(r.csv_row())),
    )
    write_manifest(Path(args.out_dir), "ablate", cfg, cfg.run.seeds)
    print(f"csv: {csv_path}")
    print(text_path.read_text(encoding="utf-8"))
    return 0


def _cmd_pose(args, cfg: Config) -> int:
    if (args.object is None) == (args.model is None):
        print("pose: give exactly one of --object or --model", file=sys.stderr)
        return 2
    model = get_object(args.object) if args.object else load_mesh(args.model)
    cloud = load_cloud(args.cloud)
    env = TactileEnv(model, cfg)
    pipeline = PosePipeline(model, env.start_position, env.center, cfg.recon)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    surface = pipeline.reconstruct(cloud)
    if args.mesh_out:
        save_mesh(surface, args.mesh_out)
    if args.dump_depth:
        images, _ = pipeline.render_observations(surface, seed=args.seed)
        for i, img in enumerate(images):
            if img is not None:
                save_pgm(img, out / f"depth_{i:02d}.pgm")
    gt = _load_gt(args.gt_json) if args.gt_json else None
    est = (
        pipeline.estimate_scored(cloud, gt, seed=args.seed)
        if gt is not None
        else pipeline.estimate(cloud, seed=args.seed)
    )
    record = {
        "rotation": [[float(x) for x in row] for row in est.transform.rotation],
        "translation": [float(x) for x in est.transform.translation],
        "hypothesis": est.hypothesis_id,
        "rms": est.rms,
        "add_s": est.add_s,
        "auc": est.auc,
    }
    (out / "pose.json").write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(record, indent=2))
    return 0


def _cmd_plot(args, cfg: Config) -> int:
    written = emit_plots(args.curves, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_mesh_info(args, cfg: Config) -> int:
    if args.target in object_names():
        mesh = get_object(args.target)
    else:
        mesh = load_mesh(args.target)
    lo, hi = mesh.bounds()
    edges: dict = {}
    for f in mesh.faces:
        for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            key = (min(e), max(e))
            edges[key] = edges.get(key, 0) + 1
    boundary = sum(1 for c in edges.values() if c == 1)
    print(f"vertices: {mesh.num_vertices}")
    print(f"faces: {mesh.num_faces}")
    print(f"area: {mesh.area:.6f} m^2")
    print(f"bounds: min={lo.round(4).tolist()} max={hi.round(4).tolist()}")
    print(f"boundary edges: {boundary} (0 means watertight)")
    return 0


_COMMANDS = {
    "explore": _cmd_explore,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "ablate": _cmd_ablate,
    "pose": _cmd_pose,
    "plot": _cmd_plot,
    "mesh-info": _cmd_mesh_info,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except TouchPoseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
