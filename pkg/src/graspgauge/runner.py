"""End-to-end experiment orchestration.

A run builds grasp libraries per object-gripper pair, produces pose pairs
(ingested from files or synthesized noise sweeps), executes every
verified-good grasp under each estimated pose, and writes deterministic
artifacts: records.jsonl, summary.csv, curves.csv, and a manifest.

All randomness derives from one experiment seed through named streams
keyed by object/gripper names, so reordering the config cannot change any
pair's results, and a fixed seed reproduces files byte for byte at any
worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import multiprocessing as mp
import os
from configparser import ConfigParser, Error as ConfigParserError
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import primitives, seeding
from .aggregate import default_bin_edges, s_gen, write_curves_csv, \
    write_summary_csv
from .degrade import DegradeParams, degrade_mesh
from .errors import ConfigError, DataError, FormatError, ParameterError
from .gripper import GripperModel, GripperPose, load_gripper_registry
from .mesh import TriMesh, load_mesh
from .metrics import (CameraIntrinsics, SymmetrySet, default_intrinsics,
                      error_vector, load_intrinsics, load_symmetry_sidecar)
from .oracle import SimParams, TrialRecord, evaluate_grasp
from .sampler import GraspLibrary, build_library
from .se3 import (PosePair, RigidTransform, compose, gripper_target_est,
                  perturb_pose, translation)

PROVENANCE = {
    # Reference dynamic-simulation settings this quasi-static harness
    # stands in for; recorded in every manifest, never simulated here.
    "object_friction": 0.5,
    "gravity_mps2": -9.81,
    "reference_dynamics_rate_hz": 240,
    "reference_dynamics_solver_iterations": 100,
}


class ExperimentCondition(str, Enum):
    GT_GRASP_GT_REF = "gt-gt"
    GT_GRASP_RECON_REF = "gt-recon"
    RECON_GRASP_RECON_REF = "recon-recon"

    @property
    def uses_recon_for_grasps(self) -> bool:
        return self is ExperimentCondition.RECON_GRASP_RECON_REF


@dataclass
class ObjectSpec:
    object_id: str
    gt_mesh: TriMesh
    recon_mesh: Optional[TriMesh] = None
    symmetry: SymmetrySet = field(default_factory=SymmetrySet)


@dataclass
class ExperimentConfig:
    objects: List[ObjectSpec]
    grippers: List[GripperModel]
    condition: ExperimentCondition = ExperimentCondition.GT_GRASP_GT_REF
    seed: int = 0
    n_samples: int = 5000
    out_dir: str = "runs/out"
    jobs: int = 1
    sim: SimParams = field(default_factory=SimParams)
    camera: CameraIntrinsics = field(default_factory=default_intrinsics)
    base_pose: RigidTransform = field(
        default_factory=lambda: translation([0.0, 0.0, 600.0]))
    # synthetic sweep: one (sigma_t, sigma_r) per level
    sweep_levels: List[Tuple[float, float]] = field(
        default_factory=lambda: [(0.0, 0.0)])
    trials_per_level: int = 1
    rot_axis: Optional[str] = None            # None=random, or "x"/"y"/"z"
    pose_pairs: Optional[Dict[str, List[PosePair]]] = None  # by object_id
    degrade: DegradeParams = field(default_factory=DegradeParams)
    t_w2c: RigidTransform = field(default_factory=RigidTransform.identity)
    raw: dict = field(default_factory=dict)   # resolved key-value echo


_AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]),
         "z": np.array([0.0, 0.0, 1.0])}


def synthesize_pose_pairs(cfg: ExperimentConfig, object_id: str):
    """Per-level noisy estimates around the base pose. The same pairs
    serve every gripper; draws are keyed by object name, level, trial."""
    axis = _AXES[cfg.rot_axis] if cfg.rot_axis else None
    pairs = []
    for li, (sig_t, sig_r) in enumerate(cfg.sweep_levels):
        for ti in range(cfg.trials_per_level):
            s = int(seeding.stream(cfg.seed, f"pose:{object_id}", li, ti)
                    .integers(0, 2**31 - 1))
            est = perturb_pose(cfg.base_pose, sig_t, sig_r, s, axis=axis)
            pairs.append((li, PosePair(gt=cfg.base_pose, est=est)))
    return pairs


def run_trial(library: GraspLibrary, pair: PosePair, mesh_true: TriMesh,
              gripper: GripperModel, params: SimParams, *,
              mesh_ref: Optional[TriMesh] = None,
              sym: Optional[SymmetrySet] = None,
              cam: Optional[CameraIntrinsics] = None,
              t_w2c: Optional[RigidTransform] = None,
              condition: str = "", object_id: str = "",
              pair_index: int = 0) -> List[TrialRecord]:
    """Execute every verified-good grasp of the library under the
    estimated pose, against the object at its true pose."""
    if t_w2c is None:
        t_w2c = RigidTransform.identity()
    errors = error_vector(mesh_ref if mesh_ref is not None else mesh_true,
                          pair, sym, cam)
    t_obj_world = compose(t_w2c, pair.gt)
    records = []
    for gi in library.successful_at_identity:
        cand = library.candidates[gi]
        target = gripper_target_est(t_w2c, pair.est, cand.t_o2g)
        outcome = evaluate_grasp(mesh_true, t_obj_world, gripper,
                                 GripperPose(target, cand.opening), params)
        records.append(TrialRecord(
            object_id=object_id or library.object_id,
            gripper_name=gripper.name, grasp_index=gi,
            pose_gt=pair.gt, pose_est=pair.est, errors=errors,
            outcome=outcome, condition=condition))
    return records


def record_to_json(r: TrialRecord, pair_index: int, level: Optional[int]):
    return {
        "object_id": r.object_id,
        "gripper": r.gripper_name,
        "condition": r.condition,
        "pair_index": pair_index,
        "level": level,
        "grasp_index": r.grasp_index,
        "pose_gt": {"R": [float(x) for x in r.pose_gt.rotation.reshape(9)],
                    "t": [float(x) for x in r.pose_gt.translation]},
        "pose_est": {"R": [float(x) for x in r.pose_est.rotation.reshape(9)],
                     "t": [float(x) for x in r.pose_est.translation]},
        "errors": r.errors.as_dict(),
        "outcome": r.outcome.category.value,
        "closing_travel_mm": r.outcome.closing_travel_mm,
        "failure_detail": r.outcome.failure_detail,
    }


# -- worker pool -------------------------------------------------------------
_POOL_CTX: dict = {}


def _pair_task(task):
    oi, gi, pi = task
    ctx = _POOL_CTX
    spec = ctx["objects"][oi]
    gripper = ctx["grippers"][gi]
    level, pair = ctx["pairs"][oi][pi]
    lib = ctx["libraries"][(oi, gi)]
    records = run_trial(
        lib, pair, spec.gt_mesh, gripper, ctx["sim"],
        mesh_ref=spec.gt_mesh, sym=spec.symmetry, cam=ctx["camera"],
        t_w2c=ctx["t_w2c"], condition=ctx["condition"],
        object_id=spec.object_id, pair_index=pi)
    return [(record_to_json(r, pi, level), r.outcome.category.value)
            for r in records]


def _run_tasks(tasks, jobs: int):
    if jobs <= 1:
        return [_pair_task(t) for t in tasks]
    with mp.get_context("fork").Pool(jobs) as pool:
        return pool.map(_pair_task, tasks,
                        chunksize=max(1, len(tasks) // (jobs * 4)))


def run_condition(cfg: ExperimentConfig):
    """Run one experimental condition end to end; returns the summary
    rows and writes records.jsonl / summary.csv / curves.csv / manifest."""
    global _POOL_CTX
    os.makedirs(cfg.out_dir, exist_ok=True)

    # grasp-source mesh per condition; evaluation always runs on GT
    libraries = {}
    lib_meta = {}
    for oi, spec in enumerate(cfg.objects):
        if cfg.condition.uses_recon_for_grasps:
            grasp_mesh = spec.recon_mesh
            if grasp_mesh is None:
                grasp_mesh = degrade_mesh(
                    spec.gt_mesh, cfg.degrade,
                    int(seeding.stream(cfg.seed,
                                       f"degrade:{spec.object_id}")
                        .integers(0, 2**31 - 1)))
                spec.recon_mesh = grasp_mesh
        else:
            grasp_mesh = spec.gt_mesh
        for gi, gripper in enumerate(cfg.grippers):
            lib_seed = int(seeding.stream(
                cfg.seed, f"library:{spec.object_id}:{gripper.name}")
                .integers(0, 2**31 - 1))
            def oracle(c, _mesh=spec.gt_mesh, _g=gripper):
                return evaluate_grasp(
                    _mesh, RigidTransform.identity(), _g,
                    GripperPose(c.t_o2g, c.opening), cfg.sim)
            lib = build_library(grasp_mesh, gripper, cfg.n_samples, lib_seed,
                                oracle, object_id=spec.object_id)
            libraries[(oi, gi)] = lib
            lib_meta[(oi, gi)] = {
                "object": spec.object_id, "gripper": gripper.name,
                "n_total": lib.n_total_sampled,
                "n_candidates": len(lib.candidates),
                "n_gt": len(lib.successful_at_identity),
            }

    # pose pairs per object
    pairs = {}
    for oi, spec in enumerate(cfg.objects):
        if cfg.pose_pairs is not None:
            if spec.object_id not in cfg.pose_pairs:
                raise DataError(
                    f"pose file provides no pairs for {spec.object_id!r}")
            pairs[oi] = [(None, p) for p in cfg.pose_pairs[spec.object_id]]
        else:
            pairs[oi] = synthesize_pose_pairs(cfg, spec.object_id)

    # trials for pairs with nonempty G_gt, canonical task order
    tasks = []
    coverage_skipped = []
    for oi, spec in enumerate(cfg.objects):
        for gi, gripper in enumerate(cfg.grippers):
            if not libraries[(oi, gi)].successful_at_identity:
                coverage_skipped.append(
                    {"object": spec.object_id, "gripper": gripper.name,
                     "reason": "empty verified grasp set"})
                continue
            for pi in range(len(pairs[oi])):
                tasks.append((oi, gi, pi))
    tasks.sort(key=lambda t: (cfg.objects[t[0]].object_id,
                              cfg.grippers[t[1]].name, t[2]))

    _POOL_CTX = {"objects": cfg.objects, "grippers": cfg.grippers,
                 "pairs": pairs, "libraries": libraries, "sim": cfg.sim,
                 "camera": cfg.camera, "t_w2c": cfg.t_w2c,
                 "condition": cfg.condition.value}
    results = _run_tasks(tasks, cfg.jobs)

    records_path = os.path.join(cfg.out_dir, "records.jsonl")
    flat = []
    with open(records_path, "w") as f:
        for task_records in results:
            for row, _cat in task_records:
                f.write(json.dumps(row) + "\n")
                flat.append(row)

    summary_rows = _summarize(cfg, libraries, lib_meta, flat)
    write_summary_csv(os.path.join(cfg.out_dir, "summary.csv"), summary_rows)
    _write_curves(cfg, flat)
    _write_manifest(cfg, lib_meta, coverage_skipped, len(flat))
    return summary_rows, records_path


def _summarize(cfg, libraries, lib_meta, rows):
    by_pair: Dict[Tuple[str, str], List[dict]] = {}
    for r in rows:
        by_pair.setdefault((r["object_id"], r["gripper"]), []).append(r)
    out = []
    pair_s_est = []
    pooled = []
    for (oi, gi), lib in sorted(
            libraries.items(),
            key=lambda kv: (cfg.objects[kv[0][0]].object_id,
                            cfg.grippers[kv[0][1]].name)):
        meta = lib_meta[(oi, gi)]
        key = (meta["object"], meta["gripper"])
        recs = by_pair.get(key, [])
        row = {
            "object": meta["object"], "gripper": meta["gripper"],
            "condition": cfg.condition.value,
            "n_total": meta["n_total"], "n_gt": meta["n_gt"],
            "s_gen_pct": round(s_gen(meta["n_gt"], meta["n_total"]), 6),
            "n_trials": len(recs),
        }
        if recs:
            cats = [r["outcome"] for r in recs]
            se = 100.0 * sum(c == "success" for c in cats) / len(cats)
            row["s_est_pct"] = round(se, 6)
            n = len(cats)
            row["frac_success"] = round(sum(c == "success" for c in cats) / n, 6)
            row["frac_slipped"] = round(sum(c == "slipped" for c in cats) / n, 6)
            row["frac_no_contact"] = round(
                sum(c == "no_contact" for c in cats) / n, 6)
            row["frac_collision"] = round(
                sum(c == "collision" for c in cats) / n, 6)
            pair_s_est.append(se)
            pooled.extend(cats)
        out.append(row)
    if pair_s_est:
        out.append({"object": "__aggregate__", "gripper": "mean_over_pairs",
                    "condition": cfg.condition.value,
                    "s_est_pct": round(float(np.mean(pair_s_est)), 6)})
    if pooled:
        out.append({"object": "__aggregate__", "gripper": "pooled_trials",
                    "condition": cfg.condition.value,
                    "n_trials": len(pooled),
                    "s_est_pct": round(
                        100.0 * pooled.count("success") / len(pooled), 6)})
    return out


_CURVE_METRICS = ["add_mm", "adi_mm", "mssd_mm", "mspd_px",
                  "translation_mm", "rotation_deg"]


def _write_curves(cfg, rows):
    curves = []
    if rows:
        from .aggregate import SuccessCurve
        for metric in _CURVE_METRICS:
            values = np.asarray([r["errors"][metric] for r in rows])
            succ = np.asarray([r["outcome"] == "success" for r in rows])
            edges = default_bin_edges(values)
            rates, counts = [], []
            for i in range(len(edges) - 1):
                lo, hi = edges[i], edges[i + 1]
                mask = (values >= lo) & ((values < hi) if i < len(edges) - 2
                                         else (values <= hi))
                n = int(mask.sum())
                counts.append(n)
                rates.append(100.0 * float(succ[mask].mean()) if n else None)
            curves.append(SuccessCurve(metric, list(edges), rates, counts))
    write_curves_csv(os.path.join(cfg.out_dir, "curves.csv"), curves)


def _write_manifest(cfg, lib_meta, coverage_skipped, n_records):
    resolved = dict(cfg.raw)
    resolved.update({
        "condition": cfg.condition.value, "seed": cfg.seed,
        "n_samples": cfg.n_samples,
        "objects": [o.object_id for o in cfg.objects],
        "grippers": [g.name for g in cfg.grippers],
        "sweep_levels": cfg.sweep_levels,
        "trials_per_level": cfg.trials_per_level,
    })
    blob = json.dumps(resolved, sort_keys=True, default=str)
    manifest = {
        "config": resolved,
        "config_sha256": hashlib.sha256(blob.encode()).hexdigest(),
        "sim_params": {
            "friction": cfg.sim.friction,
            "gravity_mps2": list(cfg.sim.gravity),
            "close_resolution_mm": cfg.sim.close_resolution,
            "contact_patch_samples": cfg.sim.contact_patch_samples,
            "lift_load_factor": cfg.sim.lift_load_factor,
            "density_kg_m3": cfg.sim.density_kg_m3,
        },
        "provenance": PROVENANCE,
        "libraries": sorted(lib_meta.values(),
                            key=lambda m: (m["object"], m["gripper"])),
        "coverage_skipped": coverage_skipped,
        "n_records": n_records,
    }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)


# -- sweep summary ------------------------------------------------------------

def sweep_level_summary(cfg: ExperimentConfig, records_path):
    """Pooled per-level success rate table written next to the records."""
    by_level: Dict[int, List[dict]] = {}
    with open(records_path) as f:
        for line in f:
            row = json.loads(line)
            if row["level"] is None:
                continue
            by_level.setdefault(row["level"], []).append(row)
    path = os.path.join(cfg.out_dir, "sweep_summary.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["level", "sigma_t_mm", "sigma_r_deg", "n_trials",
                    "s_est_pct", "mean_add_mm", "mean_adi_mm",
                    "mean_mssd_mm", "mean_mspd_px", "mean_translation_mm",
                    "mean_rotation_deg"])
        for li in sorted(by_level):
            rows = by_level[li]
            sig_t, sig_r = cfg.sweep_levels[li]
            se = 100.0 * sum(r["outcome"] == "success" for r in rows) / len(rows)
            means = [float(np.mean([r["errors"][m] for r in rows]))
                     for m in _CURVE_METRICS]
            w.writerow([li, sig_t, sig_r, len(rows), f"{se:.6g}"]
                       + [f"{m:.6g}" for m in means])
    return path


# -- BOP ingestion -------------------------------------------------------------

def ingest_bop_poses(est_csv_path, gt_json_path, units: str = "mm"):
    """Pair estimator results (BOP CSV) with scene ground truth (BOP
    scene_gt JSON). Returns ({(scene, im, obj): PosePair}, report)."""
    if units not in ("mm", "m"):
        raise ParameterError("units must be 'mm' or 'm'")
    scale = 1000.0 if units == "m" else 1.0

    with open(gt_json_path) as f:
        try:
            gt_raw = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(
                f"{gt_json_path}: invalid JSON at line {e.lineno}: {e.msg}")
    # nested {scene: {im: [...]}} or flat {im: [...]}
    flat = all(isinstance(v, list) for v in gt_raw.values())
    gt = {}
    scenes = gt_raw.items() if not flat else [(None, gt_raw)]
    for scene_id, ims in scenes:
        for im_id, anns in ims.items():
            for ann in anns:
                try:
                    key = (None if scene_id is None else int(scene_id),
                           int(im_id), int(ann["obj_id"]))
                    r = np.asarray(ann["cam_R_m2c"],
                                   dtype=np.float64).reshape(3, 3)
                    t = np.asarray(ann["cam_t_m2c"],
                                   dtype=np.float64) * scale
                except (KeyError, ValueError) as e:
                    raise FormatError(f"{gt_json_path}: bad annotation "
                                      f"(scene {scene_id}, im {im_id}): {e}")
                gt[key] = RigidTransform(r, t)

    pairs = {}
    unmatched = []
    n_rows = 0
    with open(est_csv_path, newline="") as f:
        reader = csv.reader(f)
        for rowno, row in enumerate(reader, 1):
            if not row or not row[0].strip():
                continue
            if rowno == 1 and not row[0].strip().lstrip("-").isdigit():
                continue        # header line
            if len(row) < 6:
                raise FormatError(f"{est_csv_path}:{rowno}: expected at "
                                  f"least 6 columns, got {len(row)}")
            try:
                scene = int(row[0])
                im = int(row[1])
                obj = int(row[2])
                r = np.asarray([float(x) for x in row[4].split()],
                               dtype=np.float64)
                t = np.asarray([float(x) for x in row[5].split()],
                               dtype=np.float64)
                if r.size != 9 or t.size != 3:
                    raise ValueError(f"need 9 R floats and 3 t floats, got "
                                     f"{r.size}/{t.size}")
            except ValueError as e:
                raise FormatError(f"{est_csv_path}:{rowno}: {e}")
            n_rows += 1
            est = RigidTransform(r.reshape(3, 3), t * scale)
            key = (scene, im, obj)
            gt_pose = gt.get(key)
            if gt_pose is None and flat:
                gt_pose = gt.get((None, im, obj))
            if gt_pose is None:
                unmatched.append(key)
                continue
            pairs[key] = PosePair(gt=gt_pose, est=est)
    report = {"n_estimate_rows": n_rows, "n_matched": len(pairs),
              "n_unmatched": len(unmatched),
              "unmatched": [list(k) for k in unmatched[:100]]}
    return pairs, report


def save_pose_pairs(path, pairs: dict):
    with open(path, "w") as f:
        for (scene, im, obj) in sorted(pairs):
            p = pairs[(scene, im, obj)]
            f.write(json.dumps({
                "scene_id": scene, "im_id": im, "obj_id": obj,
                "R_gt": [float(x) for x in p.gt.rotation.reshape(9)],
                "t_gt": [float(x) for x in p.gt.translation],
                "R_est": [float(x) for x in p.est.rotation.reshape(9)],
                "t_est": [float(x) for x in p.est.translation],
            }) + "\n")


def load_pose_pairs(path) -> Dict[str, List[PosePair]]:
    """Pose-pair JSONL grouped by obj_id (stringified)."""
    out: Dict[str, List[PosePair]] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                gt = RigidTransform(
                    np.asarray(row["R_gt"], dtype=np.float64).reshape(3, 3),
                    np.asarray(row["t_gt"], dtype=np.float64))
                est = RigidTransform(
                    np.asarray(row["R_est"], dtype=np.float64).reshape(3, 3),
                    np.asarray(row["t_est"], dtype=np.float64))
                out.setdefault(str(row["obj_id"]), []).append(
                    PosePair(gt=gt, est=est))
            except (KeyError, ValueError, json.JSONDecodeError) as e:
                raise FormatError(f"{path}:{lineno}: bad pose pair: {e}")
    return out


# -- config file ---------------------------------------------------------------

_BUILTIN_OBJECTS = {
    "cube40": primitives.cube,
    "box306090": primitives.box,
    "cylinder_r25_h80": primitives.cylinder,
    "icosphere_r30": primitives.icosphere,
    "l_bracket": primitives.l_bracket,
}

DESK_OBJECTS = list(_BUILTIN_OBJECTS)
DESK_GRIPPERS = ["Franka Hand", "Robotiq 2F-85", "WSG 50"]


def _parse_mapping(raw: str) -> Dict[str, str]:
    out = {}
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"expected name=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Key-value experiment config; every key can be overridden."""
    kv: Dict[str, str] = {}
    if path is not None:
        cp = ConfigParser()
        try:
            with open(path) as f:
                cp.read_file(f)
        except ConfigParserError as e:
            raise ConfigError(f"{path}: {e}")
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}")
        if "experiment" not in cp:
            raise ConfigError(f"{path}: missing [experiment] section")
        kv.update({k: v for k, v in cp["experiment"].items()})
    for k, v in (overrides or {}).items():
        if v is not None:
            kv[k.replace("-", "_")] = str(v)

    def get(key, default):
        return kv.get(key, default)

    def get_float(key, default):
        try:
            return float(get(key, default))
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, "
                              f"got {kv[key]!r}")

    def get_floats(key, default):
        raw = str(get(key, default)).replace(",", " ").split()
        try:
            return [float(x) for x in raw]
        except ValueError:
            raise ConfigError(f"config key {key!r} must be numbers")

    try:
        condition = ExperimentCondition(get("condition", "gt-gt"))
    except ValueError:
        raise ConfigError(f"unknown condition {kv['condition']!r}; choose "
                          f"gt-gt, gt-recon, or recon-recon")

    units = get("mesh_units", "mm")
    registry_path = get("gripper_registry", "") or None
    registry = {g.name: g for g in load_gripper_registry(registry_path)}
    gripper_names = [s.strip() for s in
                     get("grippers", ",".join(DESK_GRIPPERS)).split(",")
                     if s.strip()]
    grippers = []
    for name in gripper_names:
        if name not in registry:
            raise ConfigError(f"gripper {name!r} not in registry "
                              f"({', '.join(sorted(registry))})")
        grippers.append(registry[name])

    sym_map = _parse_mapping(get("symmetries", ""))
    recon_map = _parse_mapping(get("recon", ""))
    objects = []
    names = [s.strip() for s in
             get("objects", ",".join(DESK_OBJECTS)).split(",") if s.strip()]
    for name in names:
        if name in _BUILTIN_OBJECTS:
            mesh = _BUILTIN_OBJECTS[name]()
            object_id = name
        else:
            if not os.path.exists(name):
                raise ConfigError(f"object {name!r} is neither a builtin "
                                  f"({', '.join(_BUILTIN_OBJECTS)}) nor a file")
            mesh = load_mesh(name, units=units)
            object_id = os.path.splitext(os.path.basename(name))[0]
        sym = (load_symmetry_sidecar(sym_map[object_id])
               if object_id in sym_map else SymmetrySet())
        recon = (load_mesh(recon_map[object_id], units=units)
                 if object_id in recon_map else None)
        objects.append(ObjectSpec(object_id=object_id, gt_mesh=mesh,
                                  recon_mesh=recon, symmetry=sym))
    if not objects:
        raise ConfigError("no objects configured")

    sim = SimParams(
        friction=get_float("friction", 0.5),
        close_resolution=get_float("close_resolution_mm", 0.05),
        contact_patch_samples=int(get_float("contact_patch_samples", 64)),
        lift_load_factor=get_float("lift_load_factor", 2.0),
        density_kg_m3=get_float("density_kg_m3", 500.0),
    )
    camera = (load_intrinsics(get("camera", "")) if get("camera", "")
              else default_intrinsics())

    sig_t = get_floats("sweep_sigma_t_mm", "0")
    sig_r = get_floats("sweep_sigma_r_deg", "0")
    if len(sig_t) == 1 and len(sig_r) > 1:
        sig_t = sig_t * len(sig_r)
    if len(sig_r) == 1 and len(sig_t) > 1:
        sig_r = sig_r * len(sig_t)
    if len(sig_t) != len(sig_r):
        raise ConfigError("sweep sigma lists must have matching lengths")

    rot_axis = get("rot_axis", "random").lower()
    if rot_axis not in ("random", "x", "y", "z"):
        raise ConfigError("rot_axis must be random, x, y, or z")

    pose_pairs = None
    poses_path = get("poses", "")
    if poses_path:
        raw_pairs = load_pose_pairs(poses_path)
        pose_map = _parse_mapping(get("pose_map", ""))
        if pose_map:
            pose_pairs = {}
            for obj_name, key in pose_map.items():
                if key not in raw_pairs:
                    raise ConfigError(
                        f"pose_map: obj key {key!r} not in {poses_path} "
                        f"(has {sorted(raw_pairs)})")
                pose_pairs[obj_name] = raw_pairs[key]
        elif len(raw_pairs) == 1:
            only = next(iter(raw_pairs.values()))
            pose_pairs = {name: only for name in names}
        else:
            pose_pairs = raw_pairs

    base_t = get_floats("base_pose_t_mm", "0 0 600")
    if len(base_t) != 3:
        raise ConfigError("base_pose_t_mm needs exactly 3 numbers")

    degrade = DegradeParams(
        vertex_noise_sigma=get_float("degrade_vertex_noise_mm", 0.0),
        smoothing_iterations=int(get_float("degrade_smooth_iters", 0)),
        decimation_ratio=get_float("degrade_decimation_ratio", 1.0),
        hole_punch_count=int(get_float("degrade_hole_count", 0)),
    )

    return ExperimentConfig(
        objects=objects, grippers=grippers, condition=condition,
        seed=int(get_float("seed", 0)),
        n_samples=int(get_float("n_samples", 5000)),
        out_dir=get("out", "runs/out"),
        jobs=int(get_float("jobs", 1)),
        sim=sim, camera=camera,
        base_pose=translation(base_t),
        sweep_levels=list(zip(sig_t, sig_r)),
        trials_per_level=int(get_float("trials_per_level", 1)),
        rot_axis=None if rot_axis == "random" else rot_axis,
        pose_pairs=pose_pairs,
        degrade=degrade,
        raw=dict(kv),
    )
