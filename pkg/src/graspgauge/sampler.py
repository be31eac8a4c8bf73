"""Antipodal grasp candidate sampling and canonical library construction.

The sampler draws a surface point, shoots a ray through the body along
the inward normal, and keeps the entry/exit pair when both surface
normals lie inside the friction cone of the connecting line and the pair
fits the gripper stroke. The only free orientation is the roll about the
closing axis; position and the other two rotations are fixed by the
contact line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import seeding
from .errors import FormatError, ParameterError, SamplingError
from .gripper import GripperModel
from .mesh import SurfaceSample, TriMesh, _sample_surface_arrays, ray_cast_bulk
from .oracle import GraspOutcome, OutcomeCategory
from .se3 import RigidTransform

RAY_OFFSET = 1e-3        # mm the ray origin is nudged inside the surface
DEFAULT_CLEARANCE = 10.0  # mm added to grasp width for the commanded opening
WIDTH_FACTOR = 0.95       # accepted width <= factor * max_opening
ATTEMPT_FACTOR = 50       # attempt budget per requested sample


@dataclass(frozen=True)
class GraspCandidate:
    t_o2g: RigidTransform            # gripper pose in the object frame
    opening: float                   # commanded opening, mm
    grasp_width: float               # contact-to-contact distance, mm
    roll_angle: float                # radians, about the closing axis
    contact_a: Optional[SurfaceSample] = None
    contact_b: Optional[SurfaceSample] = None


@dataclass
class GraspLibrary:
    object_id: str
    gripper_name: str
    candidates: List[GraspCandidate]
    successful_at_identity: tuple    # index set, this is G_gt
    n_total_sampled: int             # requested sample budget N_total

    @property
    def g_gt(self) -> tuple:
        return self.successful_at_identity


def _roll_frame(axis: np.ndarray, roll: float) -> np.ndarray:
    """Right-handed rotation with x = closing axis and the approach axis
    set by rolling about x from a deterministic reference."""
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(axis)))] = 1.0
    t1 = ref - (ref @ axis) * axis
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(axis, t1)
    y = np.cos(roll) * t1 + np.sin(roll) * t2
    z = np.cross(axis, y)
    return np.stack([axis, y, z], axis=1)


def sample_antipodal(mesh: TriMesh, gripper: GripperModel, n: int, seed: int,
                     clearance: float = DEFAULT_CLEARANCE,
                     width_factor: float = WIDTH_FACTOR) -> List[GraspCandidate]:
    """Up to n antipodal candidates, deterministic per seed.

    Raises SamplingError only when the whole attempt budget (50 per
    requested sample) yields nothing.
    """
    if n <= 0:
        raise ParameterError("sample count must be positive")
    budget = ATTEMPT_FACTOR * n
    p1, n1, f1 = _sample_surface_arrays(
        mesh, budget, seeding.stream(seed, "antipodal-surface"))
    rolls = seeding.stream(seed, "antipodal-roll").uniform(
        0.0, 2.0 * np.pi, budget)

    mu = gripper.finger_friction
    cos_limit = 1.0 / np.sqrt(1.0 + mu * mu)
    max_width = width_factor * gripper.max_opening

    out: List[GraspCandidate] = []
    chunk = max(256, 4 * n)
    for s in range(0, budget, chunk):
        if len(out) >= n:
            break
        pp1 = p1[s:s + chunk]
        nn1 = n1[s:s + chunk]
        ff1 = f1[s:s + chunk]
        origins = pp1 - RAY_OFFSET * nn1
        t, f2 = ray_cast_bulk(mesh, origins, -nn1)
        hit = f2 >= 0
        p2 = origins + (-nn1) * np.where(hit, t, 0.0)[:, None]
        n2 = np.where(hit[:, None], mesh.face_normals[np.where(hit, f2, 0)],
                      0.0)
        dvec = pp1 - p2
        width = np.linalg.norm(dvec, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = dvec / width[:, None]           # direction contact_b -> contact_a
        ok = hit & (width > RAY_OFFSET) & (width <= max_width)
        ok &= np.einsum("ij,ij->i", nn1, u) >= cos_limit
        ok &= np.einsum("ij,ij->i", n2, -u) >= cos_limit
        for k in np.flatnonzero(ok):
            if len(out) >= n:
                break
            axis = -u[k]                        # contact_a -> contact_b
            rot = _roll_frame(axis, rolls[s + k])
            center = 0.5 * (pp1[k] + p2[k])
            w = float(width[k])
            opening = min(w + clearance, gripper.max_opening)
            out.append(GraspCandidate(
                t_o2g=RigidTransform(rot, center),
                opening=opening,
                grasp_width=w,
                roll_angle=float(rolls[s + k]),
                contact_a=SurfaceSample(pp1[k], nn1[k], int(ff1[k])),
                contact_b=SurfaceSample(p2[k], mesh.face_normals[f2[k]],
                                        int(f2[k])),
            ))
    if not out:
        raise SamplingError(
            f"no antipodal pair accepted in {budget} attempts "
            f"(acceptance rate 0/{budget}); object may exceed the "
            f"{gripper.name} stroke")
    return out


def build_library(mesh: TriMesh, gripper: GripperModel, n: int, seed: int,
                  oracle: Callable[[GraspCandidate], GraspOutcome],
                  object_id: str = "") -> GraspLibrary:
    """Sample candidates and keep the oracle-verified successes as G_gt.

    N_total stays the requested budget n: a mesh whose geometry starves
    the sampler scores a lower generation rate rather than hiding it.
    """
    candidates = sample_antipodal(mesh, gripper, n, seed)
    good = tuple(i for i, c in enumerate(candidates)
                 if oracle(c).category == OutcomeCategory.SUCCESS)
    return GraspLibrary(object_id=object_id, gripper_name=gripper.name,
                        candidates=candidates, successful_at_identity=good,
                        n_total_sampled=n)


def save_library(path, lib: GraspLibrary):
    """One candidate per JSON line."""
    good = set(lib.successful_at_identity)
    with open(path, "w") as f:
        for i, c in enumerate(lib.candidates):
            f.write(json.dumps({
                "object_id": lib.object_id,
                "gripper": lib.gripper_name,
                "R": [float(x) for x in c.t_o2g.rotation.reshape(9)],
                "t": [float(x) for x in c.t_o2g.translation],
                "opening_mm": c.opening,
                "width_mm": c.grasp_width,
                "success_at_identity": i in good,
            }) + "\n")


def load_library(path) -> GraspLibrary:
    candidates = []
    good = []
    object_id = ""
    gripper_name = ""
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                object_id = row["object_id"]
                gripper_name = row["gripper"]
                pose = RigidTransform(
                    np.asarray(row["R"], dtype=np.float64).reshape(3, 3),
                    np.asarray(row["t"], dtype=np.float64))
                cand = GraspCandidate(
                    t_o2g=pose, opening=float(row["opening_mm"]),
                    grasp_width=float(row["width_mm"]), roll_angle=0.0)
                if row["success_at_identity"]:
                    good.append(len(candidates))
                candidates.append(cand)
            except (KeyError, ValueError, json.JSONDecodeError) as e:
                raise FormatError(f"{path}:{lineno}: bad library row: {e}")
    return GraspLibrary(object_id=object_id, gripper_name=gripper_name,
                        candidates=candidates,
                        successful_at_identity=tuple(good),
                        n_total_sampled=len(candidates))
