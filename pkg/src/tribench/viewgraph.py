"""Global camera poses from a graph of pairwise relative poses.

An edge ``(i, j, pose)`` carries ``pose.rotation = R_j R_i^T`` and
``pose.direction`` = unit vector from ``c_i`` to ``c_j`` in camera ``i``'s
frame (the :mod:`tribench.relpose` convention).  The gauge is camera 0 at the
identity and the origin, with the first edge's length fixed to one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import CollinearDegeneracy, DisconnectedGraph
from .geometry import nearest_rotation
from .relpose import RelativePose

MAX_CONDITION = 1e10


@dataclass
class ViewingGraph:
    n_nodes: int
    edges: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for i, j, _ in self.edges:
            if not (0 <= i < j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) must satisfy 0 <= i < j < {self.n_nodes}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))

    def add_edge(self, i: int, j: int, pose: RelativePose) -> None:
        if i > j:
            # reverse the edge: R_ij^T, and c_i - c_j seen from camera j
            i, j = j, i
            pose = RelativePose(pose.rotation.T, -(pose.rotation @ pose.direction))
        if not (0 <= i < j < self.n_nodes):
            raise ValueError(f"edge ({i}, {j}) out of range")
        if any(e[0] == i and e[1] == j for e in self.edges):
            raise ValueError(f"duplicate edge ({i}, {j})")
        self.edges.append((i, j, pose))

    def neighbors(self):
        adj = {k: [] for k in range(self.n_nodes)}
        for i, j, pose in self.edges:
            adj[i].append((j, pose, True))
            adj[j].append((i, pose, False))
        return adj

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return False
        adj = self.neighbors()
        seen = {0}
        todo = [0]
        while todo:
            k = todo.pop()
            for m, _, _ in adj[k]:
                if m not in seen:
                    seen.add(m)
                    todo.append(m)
        return len(seen) == self.n_nodes


@dataclass(frozen=True, eq=False)
class GlobalPoses:
    rotations: list
    centers: list
    gauge: str = "camera 0 at identity/origin, first edge of unit length"


def rotation_residual(graph: ViewingGraph, rotations) -> float:
    """Sum over edges of ``||R_ij - R_j R_i^T||_F^2``."""
    return float(sum(
        np.sum((pose.rotation - rotations[j] @ rotations[i].T) ** 2)
        for i, j, pose in graph.edges
    ))


def _spanning_tree_rotations(graph: ViewingGraph):
    adj = graph.neighbors()
    rot = [None] * graph.n_nodes
    rot[0] = np.eye(3)
    queue = deque([0])
    while queue:
        k = queue.popleft()
        for m, pose, forward in adj[k]:
            if rot[m] is None:
                # forward edge k->m: R_m = R_km R_k ; backward: R_m = R_mk^T R_k
                rot[m] = (pose.rotation if forward else pose.rotation.T) @ rot[k]
                queue.append(m)
    return rot


def solve_rotations(graph: ViewingGraph, tol: float = 1e-12, max_iter: int = 100) -> list:
    """Chordal rotation averaging, camera 0 fixed to the identity.

    Rotations are initialized by chaining along a BFS spanning tree, then
    each camera is repeatedly replaced by the rotation nearest to the mean
    of its neighbors' predictions.  The lowest-residual iterate is returned,
    so the result never scores worse than the spanning-tree initialization.
    """
    if not graph.is_connected():
        raise DisconnectedGraph("viewing graph is not connected")
    rot = _spanning_tree_rotations(graph)
    best, best_res = list(rot), rotation_residual(graph, rot)
    adj = graph.neighbors()
    for _ in range(max_iter):
        change = 0.0
        for k in range(1, graph.n_nodes):
            acc = np.zeros((3, 3))
            for m, pose, forward in adj[k]:
                # forward edge k->m predicts R_k = R_km^T R_m
                acc += (pose.rotation.T if forward else pose.rotation) @ rot[m]
            new = nearest_rotation(acc)
            change = max(change, np.abs(new - rot[k]).max())
            rot[k] = new
        res = rotation_residual(graph, rot)
        if res <= best_res:
            best, best_res = list(rot), res
        if change < tol:
            break
    return best


def _position_system(graph: ViewingGraph, rotations):
    """Linear system over (c_1..c_{N-1}, s_e for every edge but the first)."""
    n = graph.n_nodes
    n_edges = len(graph.edges)
    n_unknown = 3 * (n - 1) + (n_edges - 1)
    A = np.zeros((3 * n_edges, n_unknown))
    b = np.zeros(3 * n_edges)
    for e, (i, j, pose) in enumerate(graph.edges):
        w = rotations[i].T @ pose.direction
        rows = slice(3 * e, 3 * e + 3)
        if j > 0:
            A[rows, 3 * (j - 1):3 * j] += np.eye(3)
        if i > 0:
            A[rows, 3 * (i - 1):3 * i] -= np.eye(3)
        if e == 0:
            b[rows] = w
        else:
            A[rows, 3 * (n - 1) + e - 1] = -w
    return A, b


def solve_positions(graph: ViewingGraph, rotations, return_scales: bool = False):
    """Camera centers from edge directions by linear least squares.

    Minimizes ``sum ||c_j - c_i - s_ij w_ij||^2`` over centers and per-edge
    scales, where ``w_ij`` is the edge direction rotated into the world frame,
    with ``c_0 = 0`` and the first edge's scale fixed to 1.

    Raises:
        CollinearDegeneracy: the system is rank-deficient beyond the gauge
            (condition number above 1e10), e.g. all centers on one line.
    """
    if not graph.is_connected():
        raise DisconnectedGraph("viewing graph is not connected")
    A, b = _position_system(graph, rotations)
    if A.shape[1] > A.shape[0]:
        raise CollinearDegeneracy("more unknowns than direction constraints")
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > MAX_CONDITION:
        raise CollinearDegeneracy("camera positions are not determined by the edge directions")
    x = np.linalg.lstsq(A, b, rcond=None)[0]
    n = graph.n_nodes
    centers = [np.zeros(3)] + [x[3 * k:3 * k + 3] for k in range(n - 1)]
    if return_scales:
        scales = np.concatenate([[1.0], x[3 * (n - 1):]])
        return centers, scales
    return centers


def solve_viewing_graph(graph: ViewingGraph) -> GlobalPoses:
    rotations = solve_rotations(graph)
    return GlobalPoses(rotations, solve_positions(graph, rotations))
