"""Rigid-body transform algebra and the perception-to-action pose chain.

Conventions used across the package: rotations are 3x3 orthonormal
matrices, translations are millimeters, and a transform T_a2b maps
points from frame b into frame a via ``p_a = R @ p_b + t``. Angles are
degrees at API boundaries and radians internally.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError

# Drift on R^T R - I beyond this triggers re-orthonormalization.
ORTHO_TOL = 1e-9


def _polar_orthonormalize(r: np.ndarray) -> np.ndarray:
    # Nearest rotation in the Frobenius sense (polar decomposition via SVD).
    u, _, vt = np.linalg.svd(r)
    q = u @ vt
    if np.linalg.det(q) < 0.0:
        u[:, -1] = -u[:, -1]
        q = u @ vt
    return q


def _rotation_drift(r: np.ndarray) -> float:
    return float(np.max(np.abs(r.T @ r - np.eye(3))))


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """An SE(3) pose: orthonormal rotation plus translation in mm."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if _rotation_drift(r) > ORTHO_TOL:
            r = _polar_orthonormalize(r)
        # triple product instead of np.linalg.det: cheaper, same sign
        det = (r[0, 0] * (r[1, 1] * r[2, 2] - r[1, 2] * r[2, 1])
               - r[0, 1] * (r[1, 0] * r[2, 2] - r[1, 2] * r[2, 0])
               + r[0, 2] * (r[1, 0] * r[2, 1] - r[1, 1] * r[2, 0]))
        if det < 0.0:
            raise ParameterError("rotation matrix has negative determinant")
        r = r.copy()
        t = t.copy()
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        return RigidTransform(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) point array (or a single 3-vector)."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


@dataclass(frozen=True)
class PosePair:
    """Ground-truth and estimated object pose in the camera frame."""

    gt: RigidTransform
    est: RigidTransform


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Return a @ b as homogeneous transforms."""
    return RigidTransform(a.rotation @ b.rotation,
                          a.rotation @ b.translation + a.translation)


def invert(t: RigidTransform) -> RigidTransform:
    rt = t.rotation.T
    return RigidTransform(rt, -(rt @ t.translation))


def gripper_target_gt(t_w2c: RigidTransform, t_c2o_gt: RigidTransform,
                      t_o2g: RigidTransform) -> RigidTransform:
    """World-frame gripper pose implied by the true object pose."""
    return compose(compose(t_w2c, t_c2o_gt), t_o2g)


def gripper_target_est(t_w2c: RigidTransform, t_c2o_est: RigidTransform,
                       t_o2g: RigidTransform) -> RigidTransform:
    """World-frame gripper pose a robot would target from the estimate."""
    return compose(compose(t_w2c, t_c2o_est), t_o2g)


def rot_x(deg: float) -> RigidTransform:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return RigidTransform(np.array([[1, 0, 0], [0, c, -s], [0, s, c]]), np.zeros(3))


def rot_y(deg: float) -> RigidTransform:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return RigidTransform(np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]]), np.zeros(3))


def rot_z(deg: float) -> RigidTransform:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return RigidTransform(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]), np.zeros(3))


def axis_angle_matrix(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation about a (not necessarily unit) axis."""
    a = np.asarray(axis, dtype=np.float64).reshape(3)
    n = np.linalg.norm(a)
    if n == 0.0:
        raise ParameterError("rotation axis must be nonzero")
    a = a / n
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(angle_rad) * k + (1.0 - np.cos(angle_rad)) * (k @ k)


def translation(t) -> RigidTransform:
    return RigidTransform(np.eye(3), np.asarray(t, dtype=np.float64))


def perturb_pose(t: RigidTransform, sigma_t_mm: float, sigma_r_deg: float,
                 seed: int, axis=None) -> RigidTransform:
    """Draw a noisy version of `t` for synthetic estimator-error sweeps.

    Translation noise is isotropic Gaussian added in the parent (camera)
    frame. Rotation noise is a right-multiplied rotation by |N(0, sigma_r)|
    about an axis drawn uniformly on the sphere, or about the given fixed
    axis (object frame) when `axis` is supplied. Deterministic per seed.
    """
    if sigma_t_mm < 0 or sigma_r_deg < 0:
        raise ParameterError("perturbation sigmas must be nonnegative")
    if sigma_t_mm == 0 and sigma_r_deg == 0:
        return t
    rng = np.random.default_rng(seed)
    dt = rng.normal(0.0, 1.0, 3) * sigma_t_mm if sigma_t_mm > 0 else np.zeros(3)
    r = t.rotation
    if sigma_r_deg > 0:
        if axis is None:
            v = rng.normal(0.0, 1.0, 3)
            v = v / np.linalg.norm(v)
        else:
            v = np.asarray(axis, dtype=np.float64)
            v = v / np.linalg.norm(v)
        angle = abs(rng.normal(0.0, np.radians(sigma_r_deg)))
        r = t.rotation @ axis_angle_matrix(v, angle)
    return RigidTransform(r, t.translation + dt)


def pose_to_json(t: RigidTransform) -> dict:
    """{"R": [9 floats row-major], "t": [3 floats, mm]}"""
    return {"R": [float(x) for x in t.rotation.reshape(9)],
            "t": [float(x) for x in t.translation]}


def pose_from_json(obj: dict) -> RigidTransform:
    try:
        r = np.asarray(obj["R"], dtype=np.float64).reshape(3, 3)
        t = np.asarray(obj["t"], dtype=np.float64).reshape(3)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"pose JSON needs 'R' (9 floats) and 't' (3 floats): {e}")
    return RigidTransform(r, t)


def save_pose(path, t: RigidTransform):
    with open(path, "w") as f:
        json.dump(pose_to_json(t), f)


def load_pose(path) -> RigidTransform:
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}")
    return pose_from_json(obj)
