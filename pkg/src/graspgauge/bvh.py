"""Axis-aligned BVH over triangles plus the shared geometric kernels.

The same vectorized kernels (Moller-Trumbore ray test, Ericson
closest-point-on-triangle, Akenine-Moller triangle/box SAT) back both the
BVH traversals and any brute-force evaluation over all triangles, so the
two paths agree bit for bit on shared triangles. Ties (equal hit distance
or equal closest distance) resolve to the smallest face index everywhere.
"""

from __future__ import annotations

import heapq

import numpy as np

RAY_EPS = 1e-6      # minimum accepted hit distance, mm
DET_EPS = 1e-12     # Moller-Trumbore parallel-ray cutoff
LEAF_SIZE = 16


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def ray_triangle_ts(origin, direction, tri_pts):
    """Hit distances of a ray against triangles; +inf where there is no hit.

    origin/direction broadcast against tri_pts (..., 3, 3). Backfaces count:
    the grasp sampler relies on rays exiting through far surfaces.
    """
    v0 = tri_pts[..., 0, :]
    e1 = tri_pts[..., 1, :] - v0
    e2 = tri_pts[..., 2, :] - v0
    pvec = np.cross(direction, e2)
    det = _dot(e1, pvec)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / det
        svec = origin - v0
        u = _dot(svec, pvec) * inv
        qvec = np.cross(svec, e1)
        v = _dot(qvec, direction) * inv
        t = _dot(qvec, e2) * inv
        ok = (np.abs(det) > DET_EPS) & (u >= 0.0) & (v >= 0.0) \
            & (u + v <= 1.0) & (t > RAY_EPS)
    return np.where(ok, t, np.inf)


def closest_point_on_triangles(p, tri_pts):
    """Closest point on each triangle to p, plus squared distances.

    p (..., 3) broadcasts against tri_pts (..., 3, 3). Region walk from
    Ericson, "Real-Time Collision Detection", computed branch-free.
    """
    a = tri_pts[..., 0, :]
    b = tri_pts[..., 1, :]
    c = tri_pts[..., 2, :]
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    bp = p - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    cp = p - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        w_ac = d2 / (d2 - d6)
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
    v_in = vb * denom
    w_in = vc * denom

    cond_a = (d1 <= 0.0) & (d2 <= 0.0)
    cond_b = (d3 >= 0.0) & (d4 <= d3)
    cond_ab = (vc <= 0.0) & (d1 >= 0.0) & (d3 <= 0.0)
    cond_c = (d6 >= 0.0) & (d5 <= d6)
    cond_ac = (vb <= 0.0) & (d2 >= 0.0) & (d6 <= 0.0)
    cond_bc = (va <= 0.0) & (d4 - d3 >= 0.0) & (d5 - d6 >= 0.0)

    pt_ab = a + v_ab[..., None] * ab
    pt_ac = a + w_ac[..., None] * ac
    pt_bc = b + w_bc[..., None] * (c - b)
    pt_in = a + v_in[..., None] * ab + w_in[..., None] * ac

    conds = [cond_a, cond_b, cond_ab, cond_c, cond_ac, cond_bc]
    picks = [a, b, pt_ab, c, pt_ac, pt_bc]
    out = pt_in.copy()
    decided = np.zeros(np.broadcast_shapes(cond_a.shape), dtype=bool)
    for cond, pick in zip(conds, picks):
        take = cond & ~decided
        out = np.where(take[..., None], pick, out)
        decided |= cond
    d2_out = _dot(p - out, p - out)
    return out, d2_out


def _sat_axis(p0, p1, p2, r):
    # Separated along one axis iff the triangle's projection interval
    # misses [-r, r]; touching counts as overlap.
    lo = np.minimum(np.minimum(p0, p1), p2)
    hi = np.maximum(np.maximum(p0, p1), p2)
    return (lo > r) | (hi < -r)


def triangles_overlap_box(tri_pts, half):
    """SAT triangle-vs-origin-AABB test, vectorized over triangles.

    tri_pts (..., 3, 3) must already be expressed in the box frame.
    """
    hx, hy, hz = float(half[0]), float(half[1]), float(half[2])
    v0 = tri_pts[..., 0, :]
    v1 = tri_pts[..., 1, :]
    v2 = tri_pts[..., 2, :]
    sep = np.zeros(v0.shape[:-1], dtype=bool)

    # Box face axes.
    for k, hk in enumerate((hx, hy, hz)):
        sep |= _sat_axis(v0[..., k], v1[..., k], v2[..., k], hk)

    # Nine edge cross-product axes.
    e = (v1 - v0, v2 - v1, v0 - v2)
    for ex, ey, ez in ((ee[..., 0], ee[..., 1], ee[..., 2]) for ee in e):
        # axis = edge x (1,0,0) = (0, ez, -ey)
        r = hy * np.abs(ez) + hz * np.abs(ey)
        sep |= _sat_axis(v0[..., 1] * ez - v0[..., 2] * ey,
                         v1[..., 1] * ez - v1[..., 2] * ey,
                         v2[..., 1] * ez - v2[..., 2] * ey, r)
        # axis = edge x (0,1,0) = (-ez, 0, ex)
        r = hx * np.abs(ez) + hz * np.abs(ex)
        sep |= _sat_axis(v0[..., 2] * ex - v0[..., 0] * ez,
                         v1[..., 2] * ex - v1[..., 0] * ez,
                         v2[..., 2] * ex - v2[..., 0] * ez, r)
        # axis = edge x (0,0,1) = (ey, -ex, 0)
        r = hx * np.abs(ey) + hy * np.abs(ex)
        sep |= _sat_axis(v0[..., 0] * ey - v0[..., 1] * ex,
                         v1[..., 0] * ey - v1[..., 1] * ex,
                         v2[..., 0] * ey - v2[..., 1] * ex, r)

    # Triangle plane.
    a = v1 - v0
    b = v2 - v0
    nx = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    ny = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    nz = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    r = hx * np.abs(nx) + hy * np.abs(ny) + hz * np.abs(nz)
    d = nx * v0[..., 0] + ny * v0[..., 1] + nz * v0[..., 2]
    sep |= (d > r) | (d < -r)
    return ~sep


_ROT = np.array([1, 2, 0])
_ROT2 = np.array([2, 0, 1])


def _aabbs_overlap_obb(lo, hi, center, axes, absr, half, rb, pad=1e-9):
    """Vectorized 15-axis SAT: which of N node AABBs overlap one oriented
    box. absr (|axes| + eps) and rb (cross-axis box radii) are
    precomputed per query; node AABBs are padded so pruning stays
    conservative."""
    ca = 0.5 * (lo + hi)
    ha = 0.5 * (hi - lo) + pad
    t = center - ca                                       # (N, 3)
    ok = ~np.any(np.abs(t) > ha + (absr @ half), axis=1)  # AABB axes
    proj = np.abs(t @ axes)                               # OBB axes
    ok &= ~np.any(proj > half + ha @ absr, axis=1)
    if not np.any(ok):
        return ok
    # cross axes a_i x b_j: lhs[n, i, j] = |(t_n x axes[:, j])_i|
    lhs = np.abs(t[:, _ROT, None] * axes[None, _ROT2, :]
                 - t[:, _ROT2, None] * axes[None, _ROT, :])
    ra = ha[:, _ROT, None] * absr[None, _ROT2, :] \
        + ha[:, _ROT2, None] * absr[None, _ROT, :]
    ok &= ~np.any(lhs > ra + rb[None, :, :], axis=(1, 2))
    return ok


def _aabb_dist2(p, lo, hi):
    d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
    return float(d @ d)


class Bvh:
    """Median-split BVH stored as flat arrays; queries resolve ties by
    smallest face index so they agree exactly with brute force."""

    def __init__(self, tri_pts: np.ndarray):
        m = tri_pts.shape[0]
        self.tri_pts = tri_pts
        lo = tri_pts.min(axis=1)
        hi = tri_pts.max(axis=1)
        centroids = tri_pts.mean(axis=1)

        nodes_lo, nodes_hi = [], []
        nodes_left, nodes_right = [], []
        nodes_start, nodes_count = [], []
        order = np.arange(m)

        # (slice_start, slice_stop, node_index) worklist; children are
        # appended after the parent so indices stay valid.
        stack = [(0, m, 0)]
        nodes_lo.append(None)
        nodes_hi.append(None)
        nodes_left.append(-1)
        nodes_right.append(-1)
        nodes_start.append(0)
        nodes_count.append(0)
        while stack:
            s, e, ni = stack.pop()
            idx = order[s:e]
            nodes_lo[ni] = lo[idx].min(axis=0)
            nodes_hi[ni] = hi[idx].max(axis=0)
            if e - s <= LEAF_SIZE:
                nodes_start[ni] = s
                nodes_count[ni] = e - s
                continue
            cen = centroids[idx]
            axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
            k = (e - s) // 2
            part = np.argsort(cen[:, axis], kind="stable")
            order[s:e] = idx[part]
            left = len(nodes_lo)
            for _ in range(2):
                nodes_lo.append(None)
                nodes_hi.append(None)
                nodes_left.append(-1)
                nodes_right.append(-1)
                nodes_start.append(0)
                nodes_count.append(0)
            nodes_left[ni] = left
            nodes_right[ni] = left + 1
            stack.append((s, s + k, left))
            stack.append((s + k, e, left + 1))

        self.node_lo = np.asarray(nodes_lo)
        self.node_hi = np.asarray(nodes_hi)
        self.node_left = np.asarray(nodes_left, dtype=np.int64)
        self.node_right = np.asarray(nodes_right, dtype=np.int64)
        self.node_start = np.asarray(nodes_start, dtype=np.int64)
        self.node_count = np.asarray(nodes_count, dtype=np.int64)
        self.order = order

    # -- ray ---------------------------------------------------------------
    def _slab_entry(self, origin, inv_dir, ni):
        lo = self.node_lo[ni]
        hi = self.node_hi[ni]
        with np.errstate(invalid="ignore"):
            t1 = (lo - origin) * inv_dir
            t2 = (hi - origin) * inv_dir
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
        # 0 * inf = nan happens when the origin sits exactly on a slab
        # plane of a parallel axis; treat the interval as unbounded there.
        near = np.where(np.isnan(near), -np.inf, near)
        far = np.where(np.isnan(far), np.inf, far)
        tmin = float(near.max())
        tmax = float(far.min())
        if tmax < tmin or tmax < RAY_EPS:
            return None
        return max(tmin, RAY_EPS)

    def ray_cast(self, origin, direction):
        """Nearest (t, face_index) with t > RAY_EPS, or None."""
        origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        with np.errstate(divide="ignore"):
            inv_dir = 1.0 / direction
        best_t = np.inf
        best_face = -1
        entry = self._slab_entry(origin, inv_dir, 0)
        if entry is None:
            return None
        stack = [(entry, 0)]
        while stack:
            entry, ni = stack.pop()
            if entry > best_t:
                continue
            cnt = self.node_count[ni]
            if cnt > 0:
                s = self.node_start[ni]
                faces = self.order[s:s + cnt]
                ts = ray_triangle_ts(origin, direction, self.tri_pts[faces])
                for t, f in zip(ts, faces):
                    if t < best_t or (t == best_t and f < best_face):
                        best_t = float(t)
                        best_face = int(f)
                continue
            children = []
            for ci in (self.node_left[ni], self.node_right[ni]):
                e = self._slab_entry(origin, inv_dir, ci)
                if e is not None:
                    children.append((e, ci))
            # Visit the nearer child first.
            children.sort(key=lambda x: -x[0])
            stack.extend(children)
        if best_face < 0:
            return None
        return best_t, best_face

    # -- closest point -----------------------------------------------------
    def closest_point(self, p):
        """(point, squared distance, face_index) of the surface point
        nearest to p."""
        p = np.asarray(p, dtype=np.float64)
        best_d2 = np.inf
        best_face = -1
        best_pt = None
        heap = [(_aabb_dist2(p, self.node_lo[0], self.node_hi[0]), 0)]
        while heap:
            d2, ni = heapq.heappop(heap)
            if d2 > best_d2:
                break
            cnt = self.node_count[ni]
            if cnt > 0:
                s = self.node_start[ni]
                faces = self.order[s:s + cnt]
                pts, d2s = closest_point_on_triangles(p, self.tri_pts[faces])
                for k in range(len(faces)):
                    f = int(faces[k])
                    dd = float(d2s[k])
                    if dd < best_d2 or (dd == best_d2 and f < best_face):
                        best_d2 = dd
                        best_face = f
                        best_pt = pts[k]
                continue
            for ci in (self.node_left[ni], self.node_right[ni]):
                cd = _aabb_dist2(p, self.node_lo[ci], self.node_hi[ci])
                if cd <= best_d2:
                    heapq.heappush(heap, (cd, ci))
        return best_pt, best_d2, best_face

    # -- oriented box ------------------------------------------------------
    def box_overlap(self, center, axes, half):
        """True iff any triangle intersects the oriented box (touch counts)."""
        return len(self.box_triangles(center, axes, half, first_only=True)) > 0

    def multi_box_query(self, centers, axes, halves, collect):
        """One traversal for several boxes sharing one orientation.

        centers (k, 3), halves (k, 3); collect marks boxes whose
        intersecting triangle indices are wanted (sorted), the others
        just report an overlap boolean. Returns (overlap (k,), tris list).
        """
        centers = np.asarray(centers, dtype=np.float64)
        axes = np.asarray(axes, dtype=np.float64)
        halves = np.asarray(halves, dtype=np.float64)
        k = len(centers)
        absr = np.abs(axes) + 1e-12
        halfdot = halves @ absr.T                     # (k, 3) AABB radii
        rb = halves[:, _ROT, None] * absr[None, _ROT2, :] \
            + halves[:, _ROT2, None] * absr[None, _ROT, :]   # (k, 3, 3)
        overlap = np.zeros(k, dtype=bool)
        done = np.zeros(k, dtype=bool)                # overlap-only, found
        tris = [[] for _ in range(k)]
        centers_loc = centers @ axes                  # box centers, box frame
        collect = np.asarray(collect, dtype=bool)
        frontier = np.array([0], dtype=np.int64)
        while len(frontier):
            lo = self.node_lo[frontier]
            hi = self.node_hi[frontier]
            ca = 0.5 * (lo + hi)
            ha = 0.5 * (hi - lo) + 1e-9
            t = centers[None, :, :] - ca[:, None, :]          # (N, k, 3)
            ok = ~np.any(np.abs(t) > ha[:, None, :] + halfdot[None],
                         axis=2)
            proj = np.abs(np.einsum("nkd,de->nke", t, axes))
            ok &= ~np.any(proj > halves[None] +
                          (ha @ absr)[:, None, :], axis=2)
            if np.any(ok):
                lhs = np.abs(t[:, :, _ROT, None] * axes[None, None, _ROT2, :]
                             - t[:, :, _ROT2, None] * axes[None, None, _ROT, :])
                ra = ha[:, _ROT, None] * absr[None, _ROT2, :] \
                    + ha[:, _ROT2, None] * absr[None, _ROT, :]   # (N, 3, 3)
                ok &= ~np.any(lhs > ra[:, None] + rb[None], axis=(2, 3))
            ok &= ~done[None, :]
            alive_mask = np.any(ok, axis=1)
            alive = frontier[alive_mask]
            if len(alive) == 0:
                break
            counts = self.node_count[alive]
            leaves = alive[counts > 0]
            if len(leaves):
                need = np.any(ok[alive_mask][counts > 0], axis=0)
                faces = np.concatenate(
                    [self.order[self.node_start[ni]:
                                self.node_start[ni] + self.node_count[ni]]
                     for ni in leaves])
                local = self.tri_pts[faces] @ axes
                for j in np.flatnonzero(need & ~done):
                    hits = triangles_overlap_box(local - centers_loc[j],
                                                 halves[j])
                    if np.any(hits):
                        overlap[j] = True
                        if collect[j]:
                            tris[j].extend(int(f) for f in faces[hits])
                        else:
                            done[j] = True
            inner = frontier[alive_mask & (self.node_count[frontier] == 0)]
            frontier = np.concatenate([self.node_left[inner],
                                       self.node_right[inner]])
        return overlap, [sorted(t) for t in tris]

    def box_triangles(self, center, axes, half, first_only=False):
        """Face indices of triangles intersecting the oriented box.

        The tree is walked one frontier (generation) at a time so node
        SAT tests run vectorized across the frontier.
        """
        center = np.asarray(center, dtype=np.float64)
        axes = np.asarray(axes, dtype=np.float64)
        half = np.asarray(half, dtype=np.float64)
        absr = np.abs(axes) + 1e-12
        rb = half[_ROT][None, :] * absr[:, _ROT2] \
            + half[_ROT2][None, :] * absr[:, _ROT]
        out = []
        frontier = np.array([0], dtype=np.int64)
        while len(frontier):
            ok = _aabbs_overlap_obb(self.node_lo[frontier],
                                    self.node_hi[frontier],
                                    center, axes, absr, half, rb)
            alive = frontier[ok]
            if len(alive) == 0:
                break
            counts = self.node_count[alive]
            leaves = alive[counts > 0]
            if len(leaves):
                faces = np.concatenate(
                    [self.order[self.node_start[ni]:
                                self.node_start[ni] + self.node_count[ni]]
                     for ni in leaves])
                local = (self.tri_pts[faces] - center) @ axes
                hits = triangles_overlap_box(local, half)
                if np.any(hits):
                    out.extend(int(f) for f in faces[hits])
                    if first_only:
                        return sorted(out)
            inner = alive[counts == 0]
            frontier = np.concatenate([self.node_left[inner],
                                       self.node_right[inner]])
        return sorted(out)
