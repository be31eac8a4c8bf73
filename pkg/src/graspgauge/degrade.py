"""Synthetic reconstruction artifacts: vertex jitter, Laplacian smoothing,
edge-collapse decimation, and hole punching.

These operators stand in for the kinds of defects multi-view
reconstruction pipelines leave in meshes (noisy surfaces, smoothed edges,
missing patches) so mesh-fidelity effects can be studied parametrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import ContentError, ParameterError
from .mesh import TriMesh, make_mesh

SMOOTHING_LAMBDA = 0.5


@dataclass(frozen=True)
class DegradeParams:
    vertex_noise_sigma: float = 0.0     # mm
    smoothing_iterations: int = 0
    decimation_ratio: float = 1.0       # fraction of faces kept, (0, 1]
    hole_punch_count: int = 0

    def __post_init__(self):
        if self.vertex_noise_sigma < 0 or self.smoothing_iterations < 0 \
                or self.hole_punch_count < 0:
            raise ParameterError("degradation parameters must be nonnegative")
        if not (0.0 < self.decimation_ratio <= 1.0):
            raise ParameterError("decimation_ratio must be in (0, 1]")

    @property
    def is_identity(self) -> bool:
        return (self.vertex_noise_sigma == 0.0
                and self.smoothing_iterations == 0
                and self.decimation_ratio == 1.0
                and self.hole_punch_count == 0)


def _smooth(vertices: np.ndarray, triangles: np.ndarray, iterations: int):
    n = len(vertices)
    # undirected neighbor accumulation from triangle edges
    edges = np.vstack([triangles[:, [0, 1]], triangles[:, [1, 2]],
                       triangles[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    i, j = edges[:, 0], edges[:, 1]
    deg = np.zeros(n)
    np.add.at(deg, i, 1.0)
    np.add.at(deg, j, 1.0)
    isolated = deg == 0
    deg[isolated] = 1.0
    v = vertices.copy()
    for _ in range(iterations):
        acc = np.zeros_like(v)
        np.add.at(acc, i, v[j])
        np.add.at(acc, j, v[i])
        mean = acc / deg[:, None]
        mean[isolated] = v[isolated]
        v = v + SMOOTHING_LAMBDA * (mean - v)
    return v


def _decimate(vertices: np.ndarray, triangles: np.ndarray, ratio: float):
    """Shortest-edge collapse until the face count reaches ratio * m.

    Collapses merge the edge into its midpoint; faces sharing the edge
    disappear. Ties break on vertex indices so the result is a pure
    function of the input mesh.
    """
    target = int(round(ratio * len(triangles)))
    if target < 4:
        raise ContentError(
            f"decimation to {target} faces (< 4); ratio too aggressive")
    v = vertices.copy()
    tris = triangles.copy()
    while len(tris) > target:
        edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        edges = np.unique(np.sort(edges, axis=1), axis=0)
        if len(edges) == 0:
            break
        lengths = np.linalg.norm(v[edges[:, 0]] - v[edges[:, 1]], axis=1)
        k = np.lexsort((edges[:, 1], edges[:, 0], lengths))[0]
        a, b = int(edges[k, 0]), int(edges[k, 1])
        v[a] = 0.5 * (v[a] + v[b])
        tris = np.where(tris == b, a, tris)
        # drop collapsed faces (any repeated vertex)
        ok = (tris[:, 0] != tris[:, 1]) & (tris[:, 1] != tris[:, 2]) \
            & (tris[:, 0] != tris[:, 2])
        tris = tris[ok]
    return v, tris


def degrade_mesh(mesh: TriMesh, params: DegradeParams, seed: int) -> TriMesh:
    """Apply jitter, smoothing, decimation, and hole punching in order.

    Identity parameters return the input mesh unchanged (bit level).
    Deterministic per seed.
    """
    if params.is_identity:
        return mesh
    v = np.asarray(mesh.vertices, dtype=np.float64).copy()
    t = np.asarray(mesh.triangles, dtype=np.int64).copy()
    if params.vertex_noise_sigma > 0:
        rng = seeding.stream(seed, "degrade-jitter")
        v = v + rng.normal(0.0, params.vertex_noise_sigma, v.shape)
    if params.smoothing_iterations > 0:
        v = _smooth(v, t, params.smoothing_iterations)
    if params.decimation_ratio < 1.0:
        v, t = _decimate(v, t, params.decimation_ratio)
    if params.hole_punch_count > 0:
        rng = seeding.stream(seed, "degrade-holes")
        k = min(params.hole_punch_count, len(t))
        drop = rng.choice(len(t), size=k, replace=False)
        keep = np.ones(len(t), dtype=bool)
        keep[drop] = False
        t = t[keep]
    return make_mesh(v, t)
