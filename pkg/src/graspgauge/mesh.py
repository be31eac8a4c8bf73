"""Triangle meshes (mm units) with accelerated ray / proximity / overlap
queries, surface sampling, and Chamfer distance.

Meshes are immutable after construction; every query is read-only and
safe to call concurrently. Watertightness is never assumed.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from . import seeding
from .bvh import Bvh, closest_point_on_triangles, ray_triangle_ts
from .errors import ContentError, FormatError, ParameterError
from .se3 import RigidTransform, compose, invert

DEGENERATE_AREA = 1e-9  # mm^2, faces at or below are dropped at load


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray          # (n, 3) float64, mm
    triangles: np.ndarray         # (m, 3) int64
    n_degenerate_filtered: int = 0

    @cached_property
    def tri_pts(self) -> np.ndarray:
        return self.vertices[self.triangles]

    @cached_property
    def face_normals(self) -> np.ndarray:
        t = self.tri_pts
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def face_areas(self) -> np.ndarray:
        t = self.tri_pts
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        return 0.5 * np.linalg.norm(n, axis=1)

    @cached_property
    def bvh(self) -> Bvh:
        return Bvh(self.tri_pts)

    @cached_property
    def diameter(self) -> float:
        """Max pairwise vertex distance, via the convex hull when possible."""
        v = self.vertices
        if len(v) > 16:
            try:
                v = v[ConvexHull(v).vertices]
            except QhullError:
                pass
        best = 0.0
        for s in range(0, len(v), 512):
            blk = v[s:s + 512]
            d2 = np.sum((blk[:, None, :] - v[None, :, :]) ** 2, axis=2)
            best = max(best, float(d2.max()))
        return float(np.sqrt(best))

    @cached_property
    def content_crc(self) -> int:
        return zlib.crc32(self.vertices.tobytes()) ^ zlib.crc32(
            self.triangles.tobytes())

    @cached_property
    def signed_volume_centroid(self):
        """Signed volume (mm^3) and volume centroid by tetrahedron
        integration against the origin."""
        t = self.tri_pts
        vol6 = np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2]))
        vol = float(vol6.sum() / 6.0)
        if vol == 0.0:
            return 0.0, np.zeros(3)
        weighted = ((t[:, 0] + t[:, 1] + t[:, 2]) / 4.0) * vol6[:, None] / 6.0
        return vol, weighted.sum(axis=0) / vol

    @cached_property
    def is_closed(self) -> bool:
        """True when every edge is shared by exactly two faces, after
        welding vertices with bit-identical coordinates (grid-built
        primitives duplicate seam vertices)."""
        _, canon = np.unique(self.vertices, axis=0, return_inverse=True)
        tris = canon[self.triangles]
        e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        _, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.tri_pts.mean(axis=1))

    @cached_property
    def _max_tri_radius(self) -> float:
        cen = self.tri_pts.mean(axis=1)
        r = np.linalg.norm(self.tri_pts - cen[:, None, :], axis=2)
        return float(r.max())


class SurfaceSample(NamedTuple):
    point: np.ndarray
    normal: np.ndarray
    face_index: int


class RayHit(NamedTuple):
    distance: float
    face_index: int
    normal: np.ndarray


def make_mesh(vertices, triangles) -> TriMesh:
    """Build a TriMesh: validate indices, drop degenerate faces, keep
    the vertex array untouched (file order preserved)."""
    v = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64).reshape(-1, 3))
    t = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64).reshape(-1, 3))
    if len(v) == 0 or len(t) == 0:
        raise ContentError("mesh has no vertices or no faces")
    if t.min() < 0 or t.max() >= len(v):
        raise ContentError(
            f"triangle index out of range (vertices: {len(v)}, "
            f"max index: {t.max()})")
    p = v[t]
    areas = 0.5 * np.linalg.norm(
        np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    keep = areas > DEGENERATE_AREA
    dropped = int(np.count_nonzero(~keep))
    t = t[keep]
    if len(t) == 0:
        raise ContentError("mesh has no non-degenerate faces")
    v.flags.writeable = False
    t.flags.writeable = False
    mesh = TriMesh(v, t, n_degenerate_filtered=dropped)
    if not mesh.diameter > 0.0:
        raise ContentError("mesh diameter is zero")
    return mesh


def transformed(mesh: TriMesh, t: RigidTransform) -> TriMesh:
    return make_mesh(t.apply(mesh.vertices), mesh.triangles)


# ---------------------------------------------------------------------------
# loading / saving
# ---------------------------------------------------------------------------

def load_mesh(path, units: str = "mm") -> TriMesh:
    """Load an OBJ or PLY (ascii / binary little-endian) mesh.

    `units="meters"` rescales vertices by 1000 (YCB-V meshes ship in
    meters); everything downstream works in millimeters.
    """
    if units not in ("mm", "meters"):
        raise ParameterError(f"units must be 'mm' or 'meters', got {units!r}")
    path = str(path)
    with open(path, "rb") as f:
        head = f.read(4)
    if head[:3] == b"ply":
        v, t = _parse_ply(path)
    else:
        v, t = _parse_obj(path)
    if units == "meters":
        v = v * 1000.0
    return make_mesh(v, t)


def _parse_obj(path):
    verts, faces = [], []
    with open(path, "r", errors="replace") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise FormatError(f"{path}:{lineno}: vertex needs 3 coords")
                try:
                    verts.append([float(parts[1]), float(parts[2]),
                                  float(parts[3])])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad vertex number")
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise FormatError(f"{path}:{lineno}: face needs >= 3 vertices")
                idx = []
                for token in parts[1:]:
                    s = token.split("/")[0]
                    try:
                        i = int(s)
                    except ValueError:
                        raise FormatError(f"{path}:{lineno}: bad face index {token!r}")
                    if i == 0:
                        raise FormatError(f"{path}:{lineno}: OBJ indices are 1-based")
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                # fan-triangulate polygons
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not faces:
        raise ContentError(f"{path}: no vertices or faces found")
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64)


_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply(path):
    with open(path, "rb") as f:
        data = f.read()
    # header is ascii regardless of body encoding
    end = data.find(b"end_header")
    if end < 0:
        raise FormatError(f"{path}: missing end_header")
    body_start = data.find(b"\n", end) + 1
    header = data[:end].decode("ascii", errors="replace").splitlines()

    fmt = None
    elements = []  # (name, count, [(proptype, name) or ('list', ct, it, name)])
    for lineno, line in enumerate(header, 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
            if fmt not in ("ascii", "binary_little_endian"):
                raise FormatError(
                    f"{path}:{lineno}: unsupported PLY format {fmt!r}")
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise FormatError(f"{path}:{lineno}: property before element")
            if parts[1] == "list":
                elements[-1][2].append(("list", parts[2], parts[3], parts[4]))
            else:
                elements[-1][2].append((parts[1], parts[2]))
    if fmt is None:
        raise FormatError(f"{path}: missing format line")

    verts = None
    faces = []
    if fmt == "ascii":
        lines = data[body_start:].decode("ascii", errors="replace").split("\n")
        cursor = 0
        for name, count, props in elements:
            rows = []
            for i in range(count):
                while cursor < len(lines) and not lines[cursor].strip():
                    cursor += 1
                if cursor >= len(lines):
                    raise FormatError(
                        f"{path}: truncated element {name!r} "
                        f"({i} of {count} rows)")
                rows.append(lines[cursor].split())
                cursor += 1
            if name == "vertex":
                cols = {p[1]: k for k, p in enumerate(props) if p[0] != "list"}
                try:
                    xi, yi, zi = cols["x"], cols["y"], cols["z"]
                    verts = np.asarray(
                        [[float(r[xi]), float(r[yi]), float(r[zi])]
                         for r in rows], dtype=np.float64)
                except (KeyError, ValueError, IndexError) as e:
                    raise FormatError(f"{path}: bad vertex element: {e}")
            elif name == "face":
                for r in rows:
                    n = int(r[0])
                    if len(r) < n + 1:
                        raise FormatError(f"{path}: truncated face row")
                    idx = [int(x) for x in r[1:n + 1]]
                    for k in range(1, n - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
    else:
        offset = body_start
        for name, count, props in elements:
            if any(p[0] == "list" for p in props):
                # rows vary in length; walk them
                fixed_before = []
                for p in props:
                    if p[0] == "list":
                        break
                    fixed_before.append(p)
                if name != "face" and fixed_before != props:
                    raise FormatError(
                        f"{path}: list property in unsupported element {name!r}")
                for i in range(count):
                    lp = next(p for p in props if p[0] == "list")
                    ct = np.dtype("<" + _PLY_TYPES[lp[1]])
                    it = np.dtype("<" + _PLY_TYPES[lp[2]])
                    if offset + ct.itemsize > len(data):
                        raise FormatError(
                            f"{path}: truncated at byte {offset} "
                            f"(face {i} of {count})")
                    n = int(np.frombuffer(data, ct, 1, offset)[0])
                    offset += ct.itemsize
                    if offset + n * it.itemsize > len(data):
                        raise FormatError(f"{path}: truncated at byte {offset}")
                    idx = np.frombuffer(data, it, n, offset).astype(np.int64)
                    offset += n * it.itemsize
                    for k in range(1, n - 1):
                        faces.append([int(idx[0]), int(idx[k]), int(idx[k + 1])])
            else:
                dt = np.dtype([(p[1], "<" + _PLY_TYPES[p[0]]) for p in props])
                nbytes = dt.itemsize * count
                if offset + nbytes > len(data):
                    raise FormatError(
                        f"{path}: truncated element {name!r} at byte {offset}")
                arr = np.frombuffer(data, dt, count, offset)
                offset += nbytes
                if name == "vertex":
                    try:
                        verts = np.stack([arr["x"], arr["y"], arr["z"]],
                                         axis=1).astype(np.float64)
                    except KeyError as e:
                        raise FormatError(f"{path}: vertex missing property {e}")
    if verts is None or not faces:
        raise ContentError(f"{path}: no vertices or faces found")
    return verts, np.asarray(faces, dtype=np.int64)


def save_obj(path, mesh: TriMesh):
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            f.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def save_ply(path, mesh: TriMesh, binary: bool = False):
    header = (
        "ply\nformat {} 1.0\nelement vertex {}\n"
        "property double x\nproperty double y\nproperty double z\n"
        "element face {}\nproperty list uchar int vertex_indices\n"
        "end_header\n").format(
            "binary_little_endian" if binary else "ascii",
            len(mesh.vertices), len(mesh.triangles))
    if binary:
        with open(path, "wb") as f:
            f.write(header.encode("ascii"))
            f.write(mesh.vertices.astype("<f8").tobytes())
            for t in mesh.triangles:
                f.write(struct.pack("<Biii", 3, int(t[0]), int(t[1]), int(t[2])))
    else:
        with open(path, "w") as f:
            f.write(header)
            for v in mesh.vertices:
                f.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
            for t in mesh.triangles:
                f.write(f"3 {t[0]} {t[1]} {t[2]}\n")


# ---------------------------------------------------------------------------
# queries
# ---------------------------------------------------------------------------

def ray_cast(mesh: TriMesh, origin, direction) -> Optional[RayHit]:
    """Nearest intersection with t > 1e-6 mm, or None."""
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise ParameterError("ray direction must be unit length")
    hit = mesh.bvh.ray_cast(np.asarray(origin, dtype=np.float64), direction)
    if hit is None:
        return None
    t, face = hit
    return RayHit(t, face, mesh.face_normals[face])


def ray_cast_bulk(mesh: TriMesh, origins, directions):
    """Brute-force batched ray cast over all triangles.

    Returns (t, face) arrays; misses get t = +inf, face = -1. Uses the
    same kernel and tie rule as the BVH path, so per-ray results match
    `ray_cast` exactly.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    n = len(origins)
    t_out = np.full(n, np.inf)
    f_out = np.full(n, -1, dtype=np.int64)
    tri = mesh.tri_pts
    chunk = max(1, int(2_000_000 // max(1, len(tri))))
    for s in range(0, n, chunk):
        o = origins[s:s + chunk, None, :]
        d = directions[s:s + chunk, None, :]
        ts = ray_triangle_ts(o, d, tri[None, :, :, :])
        best = ts.argmin(axis=1)          # first minimum = smallest face
        tb = ts[np.arange(len(best)), best]
        hit = np.isfinite(tb)
        t_out[s:s + chunk][hit] = tb[hit]
        f_out[s:s + chunk][hit] = best[hit]
    return t_out, f_out


def closest_point(mesh: TriMesh, p):
    """(surface point, distance mm, face index) closest to p."""
    pt, d2, face = mesh.bvh.closest_point(np.asarray(p, dtype=np.float64))
    return pt, float(np.sqrt(d2)), face


def closest_points_bulk(mesh: TriMesh, points):
    """Exact nearest surface points for a batch of query points.

    KD-tree over face centroids proposes candidates; the candidate set is
    grown until the k-th centroid distance certifies no closer triangle
    exists. Ties resolve to the smallest face index, matching the BVH.
    Returns (distances, faces, surface_points).
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(points)
    m = len(mesh.triangles)
    r_max = mesh._max_tri_radius
    tree = mesh._centroid_tree

    d_out = np.empty(n)
    f_out = np.empty(n, dtype=np.int64)
    p_out = np.empty((n, 3))
    pending = np.arange(n)
    k = min(8, m)
    while len(pending):
        pts = points[pending]
        d_cen, cand = tree.query(pts, k=k)
        if k == 1:
            d_cen = d_cen[:, None]
            cand = cand[:, None]
        sp, d2 = closest_point_on_triangles(pts[:, None, :],
                                            mesh.tri_pts[cand])
        best_d2 = d2.min(axis=1)
        tie = d2 == best_d2[:, None]
        face_masked = np.where(tie, cand, m + 1)
        col = face_masked.argmin(axis=1)
        rows = np.arange(len(pending))
        d_out[pending] = np.sqrt(best_d2)
        f_out[pending] = cand[rows, col]
        p_out[pending] = sp[rows, col]
        if k >= m:
            break
        # certified when no triangle outside the candidate set can be closer
        ok = d_cen[:, -1] >= np.sqrt(best_d2) + r_max
        pending = pending[~ok]
        k = min(m, k * 4)
    return d_out, f_out, p_out


def box_overlap(mesh: TriMesh, t_mesh: RigidTransform, box_halfextents,
                t_box: RigidTransform) -> bool:
    """True iff any mesh triangle intersects the oriented box (touch
    counts), or the box contains the whole mesh."""
    rel = compose(invert(t_mesh), t_box)
    center = rel.translation
    axes = rel.rotation
    half = np.asarray(box_halfextents, dtype=np.float64)
    if mesh.bvh.box_overlap(center, axes, half):
        return True
    # mesh entirely inside the box: one vertex inside and no crossing
    local = axes.T @ (mesh.vertices[0] - center)
    return bool(np.all(np.abs(local) <= half))


def _sample_surface_arrays(mesh: TriMesh, n: int, rng: np.random.Generator):
    areas = mesh.face_areas
    faces = rng.choice(len(areas), size=n, p=areas / areas.sum())
    r1 = rng.random(n)
    r2 = rng.random(n)
    s1 = np.sqrt(r1)
    tri = mesh.tri_pts[faces]
    pts = (1.0 - s1)[:, None] * tri[:, 0] \
        + (s1 * (1.0 - r2))[:, None] * tri[:, 1] \
        + (s1 * r2)[:, None] * tri[:, 2]
    return pts, mesh.face_normals[faces], faces


def sample_surface(mesh: TriMesh, n: int, seed: int):
    """Area-weighted uniform surface samples, deterministic per seed."""
    if n <= 0:
        raise ParameterError("sample count must be positive")
    pts, normals, faces = _sample_surface_arrays(
        mesh, n, np.random.default_rng(seed))
    return [SurfaceSample(pts[i], normals[i], int(faces[i])) for i in range(n)]


def chamfer_distance(a: TriMesh, b: TriMesh, n_samples: int = 10_000,
                     seed: int = 0) -> float:
    """Symmetric Chamfer distance on surface samples (mm).

    Each side's samples are seeded by mesh content, not argument order,
    so chamfer(a, b) == chamfer(b, a) exactly.
    """
    if n_samples <= 0:
        raise ParameterError("n_samples must be positive")
    pa, _, _ = _sample_surface_arrays(
        a, n_samples, seeding.stream(seed, "chamfer", a.content_crc))
    pb, _, _ = _sample_surface_arrays(
        b, n_samples, seeding.stream(seed, "chamfer", b.content_crc))
    da, _, _ = closest_points_bulk(b, pa)
    db, _, _ = closest_points_bulk(a, pb)
    return 0.5 * (float(da.mean()) + float(db.mean()))
