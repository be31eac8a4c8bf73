"""Command-line entry point.

Subcommands: sample, degrade, eval, sweep, ingest-bop, report.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .aggregate import SuccessCurve, default_bin_edges, write_curves_csv, \
    write_summary_csv
from .degrade import DegradeParams, degrade_mesh
from .errors import (ConfigError, DataError, GraspGaugeError, ParameterError,
                     SamplingError)
from .gripper import GripperPose, load_gripper_registry
from .mesh import load_mesh, save_obj, save_ply
from .oracle import SimParams, evaluate_grasp
from .runner import (_BUILTIN_OBJECTS, ExperimentCondition, ingest_bop_poses,
                     load_config, run_condition, save_pose_pairs,
                     sweep_level_summary)
from .sampler import build_library, save_library
from .se3 import RigidTransform


def _resolve_mesh(spec: str, units: str):
    if spec in _BUILTIN_OBJECTS:
        return _BUILTIN_OBJECTS[spec](), spec
    if not os.path.exists(spec):
        raise ConfigError(f"mesh {spec!r} is neither a builtin object "
                          f"({', '.join(_BUILTIN_OBJECTS)}) nor a file")
    name = os.path.splitext(os.path.basename(spec))[0]
    return load_mesh(spec, units=units), name


def _cmd_sample(args):
    mesh, object_id = _resolve_mesh(args.mesh, args.units)
    registry = {g.name: g for g in load_gripper_registry(args.registry)}
    if args.gripper not in registry:
        raise ConfigError(f"gripper {args.gripper!r} not in registry "
                          f"({', '.join(sorted(registry))})")
    gripper = registry[args.gripper]
    sim = SimParams(friction=gripper.finger_friction)
    ident = RigidTransform.identity()

    def oracle(c):
        return evaluate_grasp(mesh, ident, gripper,
                              GripperPose(c.t_o2g, c.opening), sim)

    lib = build_library(mesh, gripper, args.n, args.seed, oracle,
                        object_id=args.object_id or object_id)
    save_library(args.out, lib)
    print(f"sampled {len(lib.candidates)} candidates, "
          f"{len(lib.successful_at_identity)} verified holds -> {args.out}")
    return 0


def _cmd_degrade(args):
    mesh, _ = _resolve_mesh(args.mesh, args.units)
    params = DegradeParams(
        vertex_noise_sigma=args.vertex_noise,
        smoothing_iterations=args.smooth_iters,
        decimation_ratio=args.decimation_ratio,
        hole_punch_count=args.holes)
    out_mesh = degrade_mesh(mesh, params, args.seed)
    if args.out.lower().endswith(".ply"):
        save_ply(args.out, out_mesh, binary=args.binary)
    else:
        save_obj(args.out, out_mesh)
    print(f"degraded mesh: {len(mesh.triangles)} -> "
          f"{len(out_mesh.triangles)} faces -> {args.out}")
    return 0


_EVAL_OVERRIDES = ["condition", "seed", "n_samples", "out", "jobs",
                   "objects", "grippers", "poses", "sweep_sigma_t_mm",
                   "sweep_sigma_r_deg", "trials_per_level", "rot_axis",
                   "base_pose_t_mm", "friction", "density_kg_m3",
                   "close_resolution_mm", "lift_load_factor",
                   "degrade_vertex_noise_mm", "degrade_smooth_iters",
                   "degrade_decimation_ratio", "degrade_hole_count",
                   "camera", "symmetries", "recon", "mesh_units",
                   "gripper_registry", "pose_map", "contact_patch_samples"]


def _collect_overrides(args):
    return {k: getattr(args, k, None) for k in _EVAL_OVERRIDES}


def _cmd_eval(args):
    cfg = load_config(args.config, _collect_overrides(args))
    rows, records = run_condition(cfg)
    agg = [r for r in rows if r["object"] == "__aggregate__"]
    for r in agg:
        print(f"{r['gripper']}: S_est = {r.get('s_est_pct', 'n/a')}%")
    print(f"artifacts in {cfg.out_dir}")
    return 0


def _cmd_sweep(args):
    cfg = load_config(args.config, _collect_overrides(args))
    if len(cfg.sweep_levels) < 2:
        raise ConfigError("sweep needs at least two noise levels "
                          "(sweep_sigma_t_mm / sweep_sigma_r_deg lists)")
    rows, records = run_condition(cfg)
    path = sweep_level_summary(cfg, records)
    print(f"sweep summary -> {path}")
    return 0


def _cmd_ingest_bop(args):
    pairs, report = ingest_bop_poses(args.est, args.gt, units=args.units)
    save_pose_pairs(args.out, pairs)
    print(json.dumps(report if not report["unmatched"] else
                     {**report, "unmatched": report["unmatched"][:10]},
                     indent=2))
    if report["n_matched"] == 0 and report["n_estimate_rows"] > 0:
        raise DataError("no estimate row matched the ground truth")
    return 0


def _cmd_report(args):
    rows = []
    with open(args.records) as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise DataError(f"{args.records}:{lineno}: {e.msg}")
    if not rows:
        raise DataError(f"{args.records}: no records")
    os.makedirs(args.out, exist_ok=True)

    by_pair = {}
    for r in rows:
        by_pair.setdefault((r["object_id"], r["gripper"], r["condition"]),
                           []).append(r)
    summary = []
    for (obj, grip, cond) in sorted(by_pair):
        recs = by_pair[(obj, grip, cond)]
        cats = [r["outcome"] for r in recs]
        n = len(cats)
        summary.append({
            "object": obj, "gripper": grip, "condition": cond,
            "n_trials": n,
            "s_est_pct": round(100.0 * cats.count("success") / n, 6),
            "frac_success": round(cats.count("success") / n, 6),
            "frac_slipped": round(cats.count("slipped") / n, 6),
            "frac_no_contact": round(cats.count("no_contact") / n, 6),
            "frac_collision": round(cats.count("collision") / n, 6),
        })
    write_summary_csv(os.path.join(args.out, "summary.csv"), summary)

    curves = []
    metrics = ["add_mm", "adi_mm", "mssd_mm", "mspd_px", "translation_mm",
               "rotation_deg"]
    for metric in metrics:
        values = np.asarray([r["errors"][metric] for r in rows])
        succ = np.asarray([r["outcome"] == "success" for r in rows])
        edges = default_bin_edges(values, args.bins)
        rates, counts = [], []
        for i in range(len(edges) - 1):
            lo, hi = edges[i], edges[i + 1]
            mask = (values >= lo) & ((values < hi) if i < len(edges) - 2
                                     else (values <= hi))
            nbin = int(mask.sum())
            counts.append(nbin)
            rates.append(100.0 * float(succ[mask].mean()) if nbin else None)
        curves.append(SuccessCurve(metric, list(edges), rates, counts))
    write_curves_csv(os.path.join(args.out, "curves.csv"), curves)
    print(f"report -> {args.out}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="graspgauge",
        description="Deterministic benchmark linking 6D pose error and mesh "
                    "fidelity to parallel-jaw grasp success.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="build an antipodal grasp library")
    sp.add_argument("--mesh", required=True,
                    help="mesh file or builtin object name")
    sp.add_argument("--gripper", required=True)
    sp.add_argument("--registry", default=None,
                    help="gripper registry config (default: bundled)")
    sp.add_argument("--n", type=int, default=5000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--units", choices=["mm", "meters"], default="mm")
    sp.add_argument("--object-id", default="")
    sp.set_defaults(func=_cmd_sample)

    dp = sub.add_parser("degrade", help="apply reconstruction-style defects")
    dp.add_argument("--mesh", required=True)
    dp.add_argument("--out", required=True)
    dp.add_argument("--vertex-noise", type=float, default=0.0,
                    help="Gaussian vertex jitter sigma, mm")
    dp.add_argument("--smooth-iters", type=int, default=0)
    dp.add_argument("--decimation-ratio", type=float, default=1.0)
    dp.add_argument("--holes", type=int, default=0)
    dp.add_argument("--seed", type=int, default=0)
    dp.add_argument("--units", choices=["mm", "meters"], default="mm")
    dp.add_argument("--binary", action="store_true",
                    help="write binary PLY when --out ends in .ply")
    dp.set_defaults(func=_cmd_degrade)

    def add_eval_flags(ep):
        ep.add_argument("--config", default=None,
                        help="key-value experiment config file")
        for key in _EVAL_OVERRIDES:
            ep.add_argument("--" + key.replace("_", "-"), dest=key,
                            default=None)

    ep = sub.add_parser("eval", help="run one experimental condition")
    add_eval_flags(ep)
    ep.set_defaults(func=_cmd_eval)

    wp = sub.add_parser("sweep", help="run a pose-noise sweep")
    add_eval_flags(wp)
    wp.set_defaults(func=_cmd_sweep)

    ip = sub.add_parser("ingest-bop", help="pair BOP estimates with GT")
    ip.add_argument("--est", required=True, help="BOP result CSV")
    ip.add_argument("--gt", required=True, help="scene_gt JSON")
    ip.add_argument("--units", choices=["mm", "m"], default="mm")
    ip.add_argument("--out", required=True)
    ip.set_defaults(func=_cmd_ingest_bop)

    rp = sub.add_parser("report", help="summaries and curves from records")
    rp.add_argument("--records", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--bins", type=int, default=10)
    rp.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, SamplingError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except GraspGaugeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
