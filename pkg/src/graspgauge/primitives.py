"""Generated desk-scale primitive meshes with analytic ground truth.

The benchmark ships these instead of downloaded assets so every geometric
quantity (widths, volumes, symmetry groups) has a closed form to test
against. All dimensions in millimeters, all meshes centered at the origin
with outward-facing normals.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriMesh, make_mesh

_FACE_UV = {0: (1, 2), 1: (2, 0), 2: (0, 1)}  # u x v = +axis


def _grid_faces(halfextents, resolution):
    """Six subdivided rectangle faces of an axis-aligned box."""
    h = np.asarray(halfextents, dtype=np.float64)
    verts, tris = [], []
    for axis in range(3):
        u_ax, v_ax = _FACE_UV[axis]
        for sign in (1.0, -1.0):
            base = len(verts)
            us = np.linspace(-h[u_ax], h[u_ax], resolution + 1)
            vs = np.linspace(-h[v_ax], h[v_ax], resolution + 1)
            for uu in us:
                for vv in vs:
                    p = np.zeros(3)
                    p[axis] = sign * h[axis]
                    p[u_ax] = uu
                    p[v_ax] = vv
                    verts.append(p)
            row = resolution + 1
            for i in range(resolution):
                for j in range(resolution):
                    a = base + i * row + j
                    b = base + (i + 1) * row + j
                    c = base + (i + 1) * row + j + 1
                    d = base + i * row + j + 1
                    if sign > 0:
                        tris.append([a, b, c])
                        tris.append([a, c, d])
                    else:
                        tris.append([a, c, b])
                        tris.append([a, d, c])
    return np.asarray(verts), np.asarray(tris)


def cube(edge: float = 40.0, resolution: int = 8) -> TriMesh:
    """Axis-aligned cube; faces subdivided so vertex-level degradation
    produces realistic reconstruction-style artifacts."""
    v, t = _grid_faces([edge / 2.0] * 3, resolution)
    return make_mesh(v, t)


def box(extents=(30.0, 60.0, 90.0), resolution: int = 1) -> TriMesh:
    v, t = _grid_faces(np.asarray(extents, dtype=np.float64) / 2.0, resolution)
    return make_mesh(v, t)


def cylinder(radius: float = 25.0, height: float = 80.0,
             segments: int = 96) -> TriMesh:
    """Closed cylinder along +z. The default segment count is a multiple
    of 12, so rotations by multiples of 3.75 deg map the vertex set onto
    itself exactly."""
    ang = np.arange(segments) * (2.0 * np.pi / segments)
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang),
                     np.zeros(segments)], axis=1)
    top = ring + np.array([0.0, 0.0, height / 2.0])
    bot = ring + np.array([0.0, 0.0, -height / 2.0])
    verts = np.vstack([top, bot,
                       [[0.0, 0.0, height / 2.0]],
                       [[0.0, 0.0, -height / 2.0]]])
    c_top = 2 * segments
    c_bot = 2 * segments + 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        # side quad, outward
        tris.append([i, segments + i, segments + j])
        tris.append([i, segments + j, j])
        # caps
        tris.append([c_top, i, j])
        tris.append([c_bot, segments + j, segments + i])
    return make_mesh(verts, np.asarray(tris))


def icosphere(radius: float = 30.0, subdivisions: int = 3) -> TriMesh:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.asarray([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    t = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [tuple(p) for p in v]
    index = {p: i for i, p in enumerate(verts)}

    def midpoint(i, j):
        p = np.asarray(verts[i]) + np.asarray(verts[j])
        p /= np.linalg.norm(p)
        key = tuple(p)
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    for _ in range(subdivisions):
        nt = []
        for a, b, c in t:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            nt += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        t = nt
    return make_mesh(np.asarray(verts) * radius, np.asarray(t))


def l_bracket(leg: float = 60.0, thickness: float = 20.0,
              depth: float = 30.0) -> TriMesh:
    """L-shaped prism: an L cross-section in the xz plane extruded along y,
    centered on its bounding-box center."""
    L, T = leg, thickness
    poly = np.asarray([
        [0, 0], [L, 0], [L, T], [T, T], [T, L], [0, L],
    ], dtype=np.float64)
    poly -= np.array([L / 2.0, L / 2.0])
    hd = depth / 2.0
    n = len(poly)
    front = [[p[0], hd, p[1]] for p in poly]   # y = +hd
    back = [[p[0], -hd, p[1]] for p in poly]
    verts = np.asarray(front + back)
    # caps: the L splits into two rectangles 0123 and 5034 (indices in poly)
    quads = [[0, 1, 2, 3], [5, 0, 3, 4]]
    tris = []
    for q in quads:
        a, b, c, d = q
        # front cap faces +y: CCW seen from +y is CW in the xz parameterization
        tris += [[a, c, b], [a, d, c]]
        a, b, c, d = (i + n for i in q)
        tris += [[a, b, c], [a, c, d]]
    for i in range(n):
        j = (i + 1) % n
        # walls: outward = extrusion edge direction consistent with CCW poly
        tris += [[i, j, n + j], [i, n + j, n + i]]
    return make_mesh(verts, np.asarray(tris))


def desk_corpus() -> dict:
    """The five in-repo benchmark objects."""
    return {
        "cube40": cube(),
        "box306090": box(),
        "cylinder_r25_h80": cylinder(),
        "icosphere_r30": icosphere(),
        "l_bracket": l_bracket(),
    }
