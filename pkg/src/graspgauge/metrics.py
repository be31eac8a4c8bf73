"""Geometric pose-error metrics: ADD, ADI, MSSD, MSPD, translation and
rotation error, with object symmetry sets and pinhole projection.

Formulas follow the BOP-challenge conventions (documented in the README):

    ADD  = mean_v || gt(v) - est(v) ||
    ADI  = mean_v min_w || gt(v) - est(w) ||
    MSSD = min_S max_v || gt(v) - est(S(v)) ||
    MSPD = min_S max_v || proj(gt(v)) - proj(est(S(v))) ||

computed over a deterministic vertex subsample (at most 1000 points,
index stride).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import FormatError, ParameterError
from .mesh import TriMesh
from .se3 import RigidTransform, axis_angle_matrix

VERTEX_SUBSAMPLE_CAP = 1000
CONTINUOUS_SYM_STEPS = 64


@dataclass(frozen=True)
class SymmetrySet:
    """Discrete symmetry transforms (identity always included) plus
    continuous rotation axes discretized for the max-style metrics."""

    discrete: tuple = ()
    continuous_axes: tuple = ()   # ((axis 3-vector, step count), ...)

    def __post_init__(self):
        disc = [RigidTransform.identity()]
        for s in self.discrete:
            disc.append(s)
        axes = []
        for axis, count in self.continuous_axes:
            a = np.asarray(axis, dtype=np.float64)
            n = np.linalg.norm(a)
            if n == 0:
                raise ParameterError("symmetry axis must be nonzero")
            axes.append((a / n, int(count)))
        object.__setattr__(self, "discrete", tuple(disc))
        object.__setattr__(self, "continuous_axes", tuple(axes))

    def expanded(self):
        """All symmetry transforms with continuous axes discretized."""
        out = list(self.discrete)
        for axis, count in self.continuous_axes:
            for k in range(1, count):
                ang = 2.0 * np.pi * k / count
                out.append(RigidTransform(axis_angle_matrix(axis, ang),
                                          np.zeros(3)))
        return out


def identity_symmetry() -> SymmetrySet:
    return SymmetrySet()


def octahedral_rotations():
    """The 24 proper rotations of a cube, as symmetry transforms."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            r = np.zeros((3, 3))
            for row, (col, s) in enumerate(zip(perm, signs)):
                r[row, col] = s
            if np.linalg.det(r) > 0.5:
                out.append(RigidTransform(r, np.zeros(3)))
    return out


def load_symmetry_sidecar(path, steps: int = CONTINUOUS_SYM_STEPS) -> SymmetrySet:
    """BOP models_info style sidecar: row-major 4x4 discrete transforms
    plus continuous axes."""
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    disc = []
    for m in obj.get("symmetries_discrete", []):
        arr = np.asarray(m, dtype=np.float64)
        if arr.size != 16:
            raise FormatError(f"{path}: discrete symmetry needs 16 floats")
        disc.append(RigidTransform.from_matrix(arr.reshape(4, 4)))
    axes = []
    for c in obj.get("symmetries_continuous", []):
        if "axis" not in c:
            raise FormatError(f"{path}: continuous symmetry needs 'axis'")
        axes.append((np.asarray(c["axis"], dtype=np.float64), steps))
    return SymmetrySet(tuple(disc), tuple(axes))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ParameterError("focal lengths must be positive")

    def project(self, pts: np.ndarray) -> np.ndarray:
        """Pinhole projection to pixels; every point must have z > 0."""
        pts = np.asarray(pts, dtype=np.float64)
        z = pts[..., 2]
        if np.any(z <= 0.0):
            raise ParameterError("point behind camera (nonpositive depth)")
        return np.stack([self.fx * pts[..., 0] / z + self.cx,
                         self.fy * pts[..., 1] / z + self.cy], axis=-1)


def default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=600.0, fy=600.0, cx=320.0, cy=240.0)


def load_intrinsics(path) -> CameraIntrinsics:
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    try:
        return CameraIntrinsics(fx=float(obj["fx"]), fy=float(obj["fy"]),
                                cx=float(obj["cx"]), cy=float(obj["cy"]),
                                width=int(obj.get("width", 640)),
                                height=int(obj.get("height", 480)))
    except KeyError as e:
        raise FormatError(f"{path}: camera intrinsics missing key {e}")


@dataclass(frozen=True)
class PoseErrorVector:
    add: float          # mm
    adi: float          # mm
    mssd: float         # mm
    mspd: float         # px
    translation: float  # mm
    rotation: float     # degrees

    def as_dict(self) -> dict:
        return {"add_mm": self.add, "adi_mm": self.adi, "mssd_mm": self.mssd,
                "mspd_px": self.mspd, "translation_mm": self.translation,
                "rotation_deg": self.rotation}

FIELD_BY_NAME = {"add": "add", "adi": "adi", "mssd": "mssd", "mspd": "mspd",
                 "translation": "translation", "rotation": "rotation"}


def vertex_subsample(mesh: TriMesh, cap: int = VERTEX_SUBSAMPLE_CAP) -> np.ndarray:
    v = mesh.vertices
    if len(v) <= cap:
        return v
    stride = int(np.ceil(len(v) / cap))
    return v[::stride]


def add_metric(points: np.ndarray, gt: RigidTransform,
               est: RigidTransform) -> float:
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 0:
        raise ParameterError("ADD needs a nonempty point set")
    return float(np.linalg.norm(gt.apply(points) - est.apply(points),
                                axis=1).mean())


def adi_metric(points: np.ndarray, gt: RigidTransform,
               est: RigidTransform) -> float:
    points = np.asarray(points, dtype=np.float64)
    if len(points) == 0:
        raise ParameterError("ADI needs a nonempty point set")
    d, _ = cKDTree(est.apply(points)).query(gt.apply(points), k=1)
    return float(d.mean())


def mssd_metric(points: np.ndarray, gt: RigidTransform, est: RigidTransform,
                sym: Optional[SymmetrySet] = None) -> float:
    points = np.asarray(points, dtype=np.float64)
    sym = sym or identity_symmetry()
    gt_pts = gt.apply(points)
    best = np.inf
    for s in sym.expanded():
        d = np.linalg.norm(gt_pts - est.apply(s.apply(points)), axis=1).max()
        best = min(best, float(d))
    return best


def mspd_metric(points: np.ndarray, gt: RigidTransform, est: RigidTransform,
                sym: Optional[SymmetrySet] = None,
                cam: Optional[CameraIntrinsics] = None) -> float:
    points = np.asarray(points, dtype=np.float64)
    sym = sym or identity_symmetry()
    cam = cam or default_intrinsics()
    gt_px = cam.project(gt.apply(points))
    best = np.inf
    for s in sym.expanded():
        px = cam.project(est.apply(s.apply(points)))
        d = np.linalg.norm(gt_px - px, axis=1).max()
        best = min(best, float(d))
    return best


def translation_rotation_error(gt: RigidTransform, est: RigidTransform):
    """(translation error mm, geodesic rotation error degrees)."""
    dt = float(np.linalg.norm(gt.translation - est.translation))
    cosang = 0.5 * (np.trace(gt.rotation.T @ est.rotation) - 1.0)
    ang = float(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
    return dt, ang


def error_vector(mesh: TriMesh, pair, sym: Optional[SymmetrySet] = None,
                 cam: Optional[CameraIntrinsics] = None) -> PoseErrorVector:
    """All six pose-error metrics over the mesh's deterministic vertex
    subsample."""
    pts = vertex_subsample(mesh)
    dt, dr = translation_rotation_error(pair.gt, pair.est)
    return PoseErrorVector(
        add=add_metric(pts, pair.gt, pair.est),
        adi=adi_metric(pts, pair.gt, pair.est),
        mssd=mssd_metric(pts, pair.gt, pair.est, sym),
        mspd=mspd_metric(pts, pair.gt, pair.est, sym, cam),
        translation=dt,
        rotation=dr,
    )
