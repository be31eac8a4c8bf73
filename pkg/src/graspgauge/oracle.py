"""Quasi-static grasp outcome classifier.

One grasp attempt against a mesh at a known true pose is classified into
success / slipped / no_contact / collision by three deterministic stages:

  1. approach   -- palm or fully-open finger boxes overlapping the object
                   is a collision;
  2. closing    -- each finger independently sweeps inward; first contact
                   is found by binary search on the swept volume (the
                   swept predicate is monotone, so the search is exact to
                   close_resolution);
  3. stability  -- contact patches sampled on the inner finger faces give
                   per-finger centroid + mean normal; the hold must pass
                   an antipodal friction-cone test and a linearized-cone
                   wrench feasibility test against a scaled gravity load.

Everything is a pure function of its inputs: identical inputs give
bit-identical outcomes and diagnostics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import nnls

from .bvh import closest_point_on_triangles, triangles_overlap_box
from .errors import ContentError, ParameterError
from .gripper import GripperModel, GripperPose, finger_boxes
from .mesh import TriMesh
from .metrics import PoseErrorVector
from .se3 import RigidTransform, compose, invert

logger = logging.getLogger(__name__)

WRENCH_FEAS_TOL = 1e-8
MIN_VOLUME_MM3 = 1.0


@dataclass(frozen=True)
class SimParams:
    friction: float = 0.5
    gravity: tuple = (0.0, 0.0, -9.81)      # m/s^2, world frame
    close_resolution: float = 0.05          # mm
    contact_patch_samples: int = 64
    lift_load_factor: float = 2.0
    density_kg_m3: float = 500.0

    def __post_init__(self):
        if self.friction <= 0:
            raise ParameterError("friction must be positive")
        if self.close_resolution <= 0:
            raise ParameterError("close_resolution must be positive")
        if self.lift_load_factor < 1:
            raise ParameterError("lift_load_factor must be >= 1")
        if self.contact_patch_samples <= 0:
            raise ParameterError("contact_patch_samples must be positive")
        if self.density_kg_m3 <= 0:
            raise ParameterError("density must be positive")


class OutcomeCategory(str, Enum):
    SUCCESS = "success"
    SLIPPED = "slipped"
    NO_CONTACT = "no_contact"
    COLLISION = "collision"


@dataclass(frozen=True)
class GraspOutcome:
    category: OutcomeCategory
    contact_points: tuple = ()      # world frame, mm
    closing_travel_mm: float = 0.0  # summed over both fingers
    failure_detail: str = ""


@dataclass
class TrialRecord:
    object_id: str
    gripper_name: str
    grasp_index: int
    pose_gt: RigidTransform
    pose_est: RigidTransform
    errors: PoseErrorVector
    outcome: GraspOutcome
    condition: str


def object_mass_properties(mesh: TriMesh, density_kg_m3: float):
    """(mass kg, centroid mm) from uniform density over the mesh volume.

    Open meshes fall back to |signed volume| with a logged warning.
    """
    if density_kg_m3 <= 0:
        raise ParameterError("density must be positive")
    vol, centroid = mesh.signed_volume_centroid
    if not mesh.is_closed:
        logger.warning("mesh is not closed; using |signed volume| = %.3f mm^3",
                       abs(vol))
    if abs(vol) < MIN_VOLUME_MM3:
        raise ContentError(f"mesh volume {abs(vol):.2e} mm^3 is below "
                           f"{MIN_VOLUME_MM3} mm^3")
    return density_kg_m3 * abs(vol) * 1e-9, centroid


def _cross3(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _tangent_basis(d: np.ndarray):
    ref = np.zeros(3)
    ref[int(np.argmin(np.abs(d)))] = 1.0
    t1 = ref - (ref @ d) * d
    t1 /= np.linalg.norm(t1)
    return t1, _cross3(d, t1)


def _cone_edges(push_dir: np.ndarray, mu: float) -> np.ndarray:
    """Four unit edges of the linearized friction cone around push_dir."""
    t1, t2 = _tangent_basis(push_dir)
    scale = 1.0 / np.sqrt(1.0 + mu * mu)
    return np.stack([(push_dir + mu * t) * scale
                     for t in (t1, -t1, t2, -t2)])


def _wrench_feasible(contacts, normals, patch_radii, mu, f_ext, torque_ref,
                     length_scale):
    """Can nonnegative combinations of the contact wrenches balance the
    external force (torque taken about torque_ref)?

    Each contact contributes a 4-edge linearized friction cone. Because a
    finger presses with a pad, not a point, each cone edge also carries
    soft-finger torsion about the press direction, bounded by
    mu * patch_radius per unit normal force; two pure point contacts
    cannot resist any torque about their common axis, which would make
    almost every real grasp infeasible.
    """
    cos_a = 1.0 / np.sqrt(1.0 + mu * mu)    # normal share of a cone edge
    blocks = []
    for c, n, r_pad in zip(contacts, normals, patch_radii):
        push = -n
        lever = (c - torque_ref) / length_scale
        tors = (mu * r_pad * cos_a / length_scale) * push
        e = _cone_edges(push, mu)                   # (4, 3)
        torque = np.cross(np.broadcast_to(lever, (4, 3)), e)
        block = np.empty((6, 8))
        block[:3, 0::2] = e.T
        block[:3, 1::2] = e.T
        block[3:, 0::2] = (torque + tors).T
        block[3:, 1::2] = (torque - tors).T
        blocks.append(block)
    a = np.concatenate(blocks, axis=1)
    b = np.concatenate([-f_ext, np.zeros(3)])
    _, resid = nnls(a, b)
    return resid <= WRENCH_FEAS_TOL * max(1.0, float(np.linalg.norm(b)))


def _swept_finger_box(gripper: GripperModel, opening: float, gap: float,
                      side: float):
    """Gripper-frame box covering a finger's sweep from `opening` down to
    `gap` (side -1 = left, +1 = right)."""
    hx, hy, hz = gripper.finger_halfextents
    a = side * (gap / 2.0)
    b = side * (opening / 2.0 + 2.0 * hx)
    lo, hi = min(a, b), max(a, b)
    center = np.array([(lo + hi) / 2.0, 0.0, -hz])
    half = np.array([(hi - lo) / 2.0, hy, hz])
    return center, half


class _SweptBoxTester:
    """SAT tester for the closing sweep with per-axis data precomputed.

    The swept box keeps its orientation and y/z extents; only the x
    interval changes between binary-search iterations, so each triangle's
    projections onto all 13 SAT axes are computed once. Identical
    inequality conventions to `triangles_overlap_box` (touch = overlap).
    """

    def __init__(self, tri_g, hy, hz):
        n = len(tri_g)
        v = tri_g                                    # (n, 3, 3)
        e = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1],
                      v[:, 0] - v[:, 2]], axis=1)    # (n, 3, 3)
        normals = np.cross(e[:, 0], e[:, 1])
        # axes: box x/y/z, 9 edge crosses, triangle normal -> (n, 13, 3)
        axes = np.empty((n, 13, 3))
        axes[:, 0] = (1.0, 0.0, 0.0)
        axes[:, 1] = (0.0, 1.0, 0.0)
        axes[:, 2] = (0.0, 0.0, 1.0)
        zeros = np.zeros(n)
        k = 3
        for j in range(3):                           # edge x unit axes
            ex, ey, ez = e[:, j, 0], e[:, j, 1], e[:, j, 2]
            axes[:, k] = np.stack([zeros, ez, -ey], axis=1)
            axes[:, k + 1] = np.stack([-ez, zeros, ex], axis=1)
            axes[:, k + 2] = np.stack([ey, -ex, zeros], axis=1)
            k += 3
        axes[:, 12] = normals
        proj = np.einsum("nkd,nvd->nkv", axes, v)    # vertex projections
        self.pmin = proj.min(axis=2)                 # (n, 13)
        self.pmax = proj.max(axis=2)
        self.ax = axes[:, :, 0]
        self.q = hy * np.abs(axes[:, :, 1]) + hz * np.abs(axes[:, :, 2])
        self.abs_ax = np.abs(axes[:, :, 0])
        self.cz = -hz * axes[:, :, 2]   # box center sits at z = -hz

    def touches(self, cx, hx):
        """Any triangle overlapping the box with x interval
        [cx - hx, cx + hx] (y/z extents fixed at construction)?"""
        c = cx * self.ax + self.cz
        r = hx * self.abs_ax + self.q
        ok = (self.pmin <= c + r) & (self.pmax >= c - r)
        return bool(np.any(np.all(ok, axis=1)))


@lru_cache(maxsize=64)
def _patch_grid(hy: float, hz: float):
    """Coarse probe lattice over a finger's inner face, in face (y, z)
    coordinates, plus the cell half sizes. Coarse cells are refined
    around the contact, so ~2.5 mm spacing suffices here."""
    gy = int(np.clip(np.ceil(2.0 * hy / 2.5), 8, 24))
    gz = int(np.clip(np.ceil(2.0 * hz / 2.5), 8, 32))
    ys = (np.arange(gy) + 0.5) / gy * 2.0 * hy - hy
    zs = (np.arange(gz) + 0.5) / gz * 2.0 * hz - 2.0 * hz
    yy, zz = np.meshgrid(ys, zs, indexing="ij")
    yz = np.stack([yy.ravel(), zz.ravel()], axis=1)
    yz.flags.writeable = False
    return yz, np.array([hy / gy, hz / gz])


class _FaceProber:
    """Exact distances from probe points on a finger face to a fixed
    candidate triangle subset, with an AABB pair prefilter.

    Works entirely in the gripper frame; `tri_g` must hold the candidate
    triangles already transformed there.
    """

    def __init__(self, tri_g: np.ndarray, faces: np.ndarray, face_x: float):
        self.tri_g = tri_g
        self.faces = faces
        self.face_x = face_x
        self.tri_lo = tri_g.min(axis=1)
        self.tri_hi = tri_g.max(axis=1)

    def query(self, yz: np.ndarray, reach: float):
        """(d, face, surface point in gripper frame) per probe; probes
        with no candidate within `reach` of its AABB report d = +inf."""
        pts = np.column_stack([np.full(len(yz), self.face_x), yz])
        gap_lo = np.maximum(self.tri_lo[None, :, :] - pts[:, None, :], 0.0)
        gap_hi = np.maximum(pts[:, None, :] - self.tri_hi[None, :, :], 0.0)
        g = np.maximum(gap_lo, gap_hi)
        near = np.einsum("pkd,pkd->pk", g, g) <= reach * reach
        rows, cols = np.nonzero(near)
        n = len(yz)
        d_out = np.full(n, np.inf)
        f_out = np.full(n, -1, dtype=np.int64)
        p_out = np.zeros((n, 3))
        if len(rows) == 0:
            return d_out, f_out, p_out
        sp, d2 = closest_point_on_triangles(pts[rows], self.tri_g[cols])
        # per-probe minimum with smallest-face tie rule
        order = np.lexsort((self.faces[cols], d2, rows))
        rs = rows[order]
        first = np.unique(rs, return_index=True)[1]
        pick = order[first]
        d_out[rows[pick]] = np.sqrt(d2[pick])
        f_out[rows[pick]] = self.faces[cols[pick]]
        p_out[rows[pick]] = sp[pick]
        return d_out, f_out, p_out


def evaluate_grasp(mesh_true: TriMesh, t_obj_true: RigidTransform,
                   gripper: GripperModel, target: GripperPose,
                   params: SimParams) -> GraspOutcome:
    """Classify one grasp attempt; see the module docstring for stages."""
    if not (gripper.min_opening <= target.opening <= gripper.max_opening):
        raise ParameterError(
            f"commanded opening {target.opening} outside stroke of "
            f"{gripper.name}")
    opening = target.opening
    # Work in the object's canonical frame.
    t_rel = compose(invert(t_obj_true), target.t_w2g)
    inv_rel = invert(t_rel)
    hx, hy, hz = gripper.finger_halfextents
    res = params.close_resolution

    # One BVH traversal answers stage 1 (approach boxes) and fetches the
    # closing-sweep candidates: all five boxes share the gripper axes.
    left, right, palm = finger_boxes(gripper, GripperPose(t_rel, opening))
    sweep_lo = gripper.min_opening - 2.0 * res
    swept = [_swept_finger_box(gripper, opening, sweep_lo, side)
             for side in (-1.0, 1.0)]
    # inflate so the stage-3 contact slab is a subset of the candidates
    pad = np.array([0.0, res, res])
    halves = [palm.halfextents, left.halfextents, right.halfextents,
              swept[0][1] + pad, swept[1][1] + pad]
    box_centers = [palm.pose.translation, left.pose.translation,
                   right.pose.translation]
    for c_loc, _ in swept:
        box_centers.append(t_rel.rotation @ c_loc + t_rel.translation)
    overlap, collected = mesh_true.bvh.multi_box_query(
        np.asarray(box_centers), t_rel.rotation, np.asarray(halves),
        [False, False, False, True, True])

    # ---- stage 1: approach collision -------------------------------------
    for j, name in ((0, "palm"), (1, "left finger"), (2, "right finger")):
        inside = np.all(np.abs(
            t_rel.rotation.T @ (mesh_true.vertices[0] - box_centers[j]))
            <= halves[j])
        if overlap[j] or inside:
            return GraspOutcome(
                OutcomeCategory.COLLISION,
                failure_detail=f"{name} overlaps object at approach")

    # ---- stage 2: closing -------------------------------------------------
    def first_contact_gap(side: float, cand):
        """Largest known-touching gap for one finger (within resolution),
        plus the candidate triangles in the gripper frame for stage 3."""
        if not cand:
            return None, None, None
        cand = np.asarray(cand)
        tri_g = inv_rel.apply(
            mesh_true.tri_pts[cand].reshape(-1, 3)).reshape(-1, 3, 3)
        tester = _SweptBoxTester(tri_g, hy, hz)

        def touches(gap: float) -> bool:
            c, h = _swept_finger_box(gripper, opening, gap, side)
            return tester.touches(float(c[0]), float(h[0]))

        lo = gripper.min_opening
        if not touches(lo):
            return None, cand, tri_g
        hi = opening
        while hi - lo > res:
            mid = 0.5 * (lo + hi)
            if touches(mid):
                lo = mid
            else:
                hi = mid
        return lo, cand, tri_g

    gap_l, cand_l, tri_l = first_contact_gap(-1.0, collected[3])
    gap_r, cand_r, tri_r = first_contact_gap(+1.0, collected[4])
    full_travel = opening - gripper.min_opening
    if gap_l is None and gap_r is None:
        return GraspOutcome(
            OutcomeCategory.NO_CONTACT, closing_travel_mm=full_travel,
            failure_detail="fingers closed to the stroke limit without contact")
    if gap_l is None or gap_r is None:
        side = "right" if gap_l is None else "left"
        gap = gap_r if gap_l is None else gap_l
        travel = (opening - gap) / 2.0 + full_travel / 2.0
        return GraspOutcome(
            OutcomeCategory.SLIPPED, closing_travel_mm=travel,
            failure_detail=f"one-sided contact: only the {side} finger "
            f"touched; the object would be pushed away")
    travel = (opening - gap_l) / 2.0 + (opening - gap_r) / 2.0

    # ---- stage 3: stability -----------------------------------------------
    def contact_patch(gap: float, side: float, cand, tri_g):
        # Triangles within close_resolution of the inner face live in a
        # thin slab around the face; the (inflated) sweep candidates are
        # a superset of that slab, so the exact query restricted to them
        # is exact for every qualifying probe point.
        slab_c = np.array([side * gap / 2.0, 0.0, -hz])
        slab_h = np.array([res, hy + res, hz + res])
        in_slab = triangles_overlap_box(tri_g - slab_c, slab_h)
        if not np.any(in_slab):
            return None
        prober = _FaceProber(tri_g[in_slab], cand[in_slab],
                             side * gap / 2.0)
        yz, cell = _patch_grid(hy, hz)
        d, faces, surf = prober.query(yz, res + 2.0 * float(cell.max()))
        # Curved or slanted contacts can qualify on a region smaller than
        # a coarse cell: refine deterministically around the best probes
        # until the patch is found.
        n_want = params.contact_patch_samples
        for _ in range(4):
            if np.count_nonzero(d <= res) > 0:
                break
            finite = np.flatnonzero(np.isfinite(d))
            if len(finite) == 0:
                break
            seeds = finite[np.lexsort((finite, d[finite]))[:32]]
            off = np.array([-1.0, 0.0, 1.0]) / 3.0
            oy, oz = np.meshgrid(off * 2.0 * cell[0], off * 2.0 * cell[1],
                                 indexing="ij")
            children = (yz[seeds][:, None, :]
                        + np.stack([oy.ravel(), oz.ravel()], axis=1)[None])
            children = children.reshape(-1, 2)
            keep = np.ones(len(children), dtype=bool)
            keep[4::9] = False          # centers duplicate their seed
            children = children[keep]
            cell = cell / 3.0
            cd, cf, cs = prober.query(children, res + 2.0 * float(cell.max()))
            yz = np.vstack([yz, children])
            d = np.concatenate([d, cd])
            faces = np.concatenate([faces, cf])
            surf = np.vstack([surf, cs])
        idx = np.flatnonzero(d <= res)
        if len(idx) == 0:
            return None
        if len(idx) > n_want:
            sel = np.unique(np.linspace(0, len(idx) - 1, n_want).round()
                            .astype(int))
            idx = idx[sel]
        normals = mesh_true.face_normals[faces[idx]]
        mean_n = normals.mean(axis=0)
        norm = np.linalg.norm(mean_n)
        if norm < 1e-12:
            return "degenerate"
        center = surf[idx].mean(axis=0)
        pad_radius = float(np.linalg.norm(surf[idx] - center, axis=1).mean())
        # centroid back in the object frame (mean commutes with the map)
        return t_rel.apply(center), mean_n / norm, pad_radius

    patch_l = contact_patch(gap_l, -1.0, cand_l, tri_l)
    patch_r = contact_patch(gap_r, +1.0, cand_r, tri_r)
    if patch_l is None or patch_r is None:
        return GraspOutcome(
            OutcomeCategory.SLIPPED, closing_travel_mm=travel,
            failure_detail="contact off the finger face (edge or corner "
            "touch); no stable pad contact")
    if isinstance(patch_l, str) or isinstance(patch_r, str):
        return GraspOutcome(
            OutcomeCategory.SLIPPED, closing_travel_mm=travel,
            failure_detail="contact normals cancel out; no defined press "
            "direction")
    c_l, n_l, pad_l = patch_l
    c_r, n_r, pad_r = patch_r

    mu = params.friction
    cos_limit = 1.0 / np.sqrt(1.0 + mu * mu)   # cos(atan(mu))
    cos_opp = float(n_l @ -n_r)
    if cos_opp < cos_limit:
        ang = np.degrees(np.arccos(np.clip(cos_opp, -1.0, 1.0)))
        lim = np.degrees(np.arctan(mu))
        return GraspOutcome(
            OutcomeCategory.SLIPPED, closing_travel_mm=travel,
            contact_points=_world_points(t_obj_true, (c_l, c_r)),
            failure_detail=f"contact normals opposed at {ang:.2f} deg, "
            f"outside the {lim:.2f} deg friction cone")

    vol, centroid = mesh_true.signed_volume_centroid
    mass = params.density_kg_m3 * abs(vol) * 1e-9
    if abs(vol) < MIN_VOLUME_MM3:
        mass = 0.0      # degenerate shell: classify with a zero load
    g_vec = np.asarray(params.gravity, dtype=np.float64)
    g_norm = np.linalg.norm(g_vec)
    if g_norm > 0 and mass > 0:
        ghat_obj = t_obj_true.rotation.T @ (g_vec / g_norm)
        f_ext = params.lift_load_factor * mass * g_norm * ghat_obj
    else:
        f_ext = np.zeros(3)
    feasible = _wrench_feasible(
        (c_l, c_r), (n_l, n_r), (pad_l, pad_r), mu, f_ext, centroid,
        max(1.0, mesh_true.diameter / 2.0))
    if not feasible:
        return GraspOutcome(
            OutcomeCategory.SLIPPED, closing_travel_mm=travel,
            contact_points=_world_points(t_obj_true, (c_l, c_r)),
            failure_detail="contact wrenches cannot resist the lift load "
            f"({params.lift_load_factor:g}x gravity)")
    return GraspOutcome(
        OutcomeCategory.SUCCESS, closing_travel_mm=travel,
        contact_points=_world_points(t_obj_true, (c_l, c_r)))


def _world_points(t_obj_true: RigidTransform, pts) -> tuple:
    return tuple(t_obj_true.apply(p) for p in pts)
