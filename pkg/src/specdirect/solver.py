"""Pre-computation sweep, per-data solve sweep, and the dense verification oracle.

``precompute`` walks the tree from the leaves up, factoring each leaf and
merging sibling boundary-operator pairs, keeping every box's
interior-reconstruction matrix and the root's boundary derivative pair.
``solve`` then handles any Dirichlet data vector with a single downward
sweep of matrix-vector products. ``dense_oracle`` solves the same discrete
problem as one brute-force dense system for cross-checking on small meshes.
"""

import json
import struct
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .dtn import DEFAULT_RCOND_MIN, leaf_factor, merge, restrict_to_normal_rows
from .errors import ProbeOffMeshError, UnsupportedLayoutError
from .geometry import DomainSpec, build_tree, region_edge_nodes
from .pde import LeafAssembler, kappa_from_ppw
from .spectral import tensor_grid

__all__ = [
    "Solution",
    "SolverState",
    "dense_oracle",
    "error_metrics",
    "load_state",
    "pointwise_convergence",
    "precompute",
    "save_state",
    "solve",
]


@dataclass
class SolverState:
    """Everything retained after the pre-computation sweep.

    Child boundary-derivative operators are consumed by their parent's
    merge and released immediately; only the per-box interior maps and the
    root's derivative pair survive, which is exactly what ``solve`` needs.
    """

    tree: object
    interior_maps: dict
    root_ddx: np.ndarray
    root_ddy: np.ndarray
    rcond_log: dict
    rcond_min: float
    restricted: bool
    memory_bytes: int
    t_inv: float
    root_ddx_rows: Optional[np.ndarray] = None
    root_ddy_rows: Optional[np.ndarray] = None

    @property
    def rcond_minimum(self):
        return min(self.rcond_log.values())


@dataclass
class Solution:
    """Solution values at all mesh nodes plus boundary derivative data.

    ``u`` restricted to the outer boundary is the supplied Dirichlet data
    verbatim (assigned, never solved for). ``v_bnd``/``w_bnd`` hold the
    two derivative components at the boundary nodes; entries are NaN when
    the corresponding rows were dropped by row restriction.
    """

    u: np.ndarray
    v_bnd: np.ndarray
    w_bnd: np.ndarray
    t_solve: Optional[float] = None


def _leaf_grid(tree):
    return tensor_grid(tree.spec.p, tree.spec.h / 2.0)


def _edge_row_positions(mesh, node):
    vert, horiz = region_edge_nodes(mesh, node.cells)
    return (
        np.searchsorted(node.boundary_idx, vert),
        np.searchsorted(node.boundary_idx, horiz),
    )


def precompute(tree, operator, rcond_min=DEFAULT_RCOND_MIN, restrict_rows=False):
    """Upward sweep: factor every leaf, merge every sibling pair.

    Boxes are processed in descending id order, so both children are ready
    when their parent is reached. Raises ``ResonantLeafError`` /
    ``ResonantMergeError`` (with the offending box id) when an inverted
    block's reciprocal condition falls below ``rcond_min``.

    ``restrict_rows`` drops tangential derivative rows from every stored
    operator pair, roughly halving merge cost and memory; only available
    on fully occupied (rectangular) layouts, and boundary gradient output
    is then limited to normal components.
    """
    spec = tree.spec
    if restrict_rows and not spec.mask.all():
        raise UnsupportedLayoutError(
            "row restriction requires a fully occupied rectangular layout"
        )
    mesh = tree.mesh
    grid = _leaf_grid(tree)
    assembler = LeafAssembler(grid, operator)

    t0 = time.perf_counter()
    triples = {}
    interior_maps = {}
    rcond_log = {}
    for node in reversed(tree.nodes):
        if node.is_leaf:
            gl = mesh.leaf_maps[node.cell]
            assert np.array_equal(gl[grid.boundary_idx], node.boundary_idx)
            assert np.array_equal(gl[grid.interior_idx], node.owned_idx)
            A = assembler.matrix(mesh.coords[gl])
            tri = leaf_factor(A, grid, rcond_min, node.node_id)
            if restrict_rows:
                keep_x, keep_y = _edge_row_positions(mesh, node)
                tri = restrict_to_normal_rows(tri, keep_x, keep_y)
        else:
            keep = _edge_row_positions(mesh, node) if restrict_rows else None
            tri_a = triples.pop(node.child_ids[0])
            tri_b = triples.pop(node.child_ids[1])
            tri = merge(tri_a, tri_b, node.partition, node.orientation,
                        rcond_min, node.node_id, keep_rows=keep)
        triples[node.node_id] = tri
        interior_maps[node.node_id] = tri.interior_map
        rcond_log[node.node_id] = tri.rcond
    t_inv = time.perf_counter() - t0

    root = triples[tree.root.node_id]
    memory = sum(m.nbytes for m in interior_maps.values())
    memory += root.ddx_map.nbytes + root.ddy_map.nbytes
    return SolverState(
        tree=tree,
        interior_maps=interior_maps,
        root_ddx=root.ddx_map,
        root_ddy=root.ddy_map,
        rcond_log=rcond_log,
        rcond_min=rcond_min,
        restricted=restrict_rows,
        memory_bytes=memory,
        t_inv=t_inv,
        root_ddx_rows=root.ddx_rows,
        root_ddy_rows=root.ddy_rows,
    )


def _dirichlet_vector(tree, f):
    gamma = tree.boundary
    coords = tree.mesh.coords
    if callable(f):
        fvec = np.asarray(f(coords[gamma, 0], coords[gamma, 1]), dtype=float)
    else:
        fvec = np.asarray(f, dtype=float)
    if fvec.shape != (len(gamma),):
        raise ValueError(
            f"Dirichlet data must have one value per boundary node "
            f"({len(gamma)}), got shape {fvec.shape}"
        )
    return fvec


def solve(state, f):
    """Downward sweep: reconstruct the solution for one Dirichlet vector.

    ``f`` is either a vector with one value per outer-boundary node (in
    canonical ascending-id order) or a callable ``f(x, y)`` evaluated at
    those nodes. Boxes are visited in ascending id order; each box's
    interior values come from one matrix-vector product with its stored
    interior map. Boundary derivatives come from the root's operator pair.
    """
    tree = state.tree
    fvec = _dirichlet_vector(tree, f)
    u = np.zeros(tree.mesh.n_nodes)

    t0 = time.perf_counter()
    u[tree.boundary] = fvec
    for node in tree.nodes:
        u[node.owned_idx] = state.interior_maps[node.node_id] @ u[node.boundary_idx]
    t_solve = time.perf_counter() - t0

    n_gamma = len(tree.boundary)
    v_bnd = np.full(n_gamma, np.nan)
    w_bnd = np.full(n_gamma, np.nan)
    rows_x = state.root_ddx_rows if state.root_ddx_rows is not None else slice(None)
    rows_y = state.root_ddy_rows if state.root_ddy_rows is not None else slice(None)
    v_bnd[rows_x] = state.root_ddx @ fvec
    w_bnd[rows_y] = state.root_ddy @ fvec
    return Solution(u=u, v_bnd=v_bnd, w_bnd=w_bnd, t_solve=t_solve)


def _leaf_weights(tree, node_id, g):
    """Leaf contributions to a box's boundary derivative row at node g.

    Descends the tree: a node shared by both children (necessarily a
    shared-outer node of that merge) contributes the half/half average of
    the children's rows, matching the merge's assembly rule.
    """
    node = tree.node(node_id)
    if node.is_leaf:
        return [(node, 1.0)]
    id_a, id_b = node.child_ids
    bnd_a = tree.node(id_a).boundary_idx
    bnd_b = tree.node(id_b).boundary_idx
    in_a = bnd_a[np.searchsorted(bnd_a, g) % len(bnd_a)] == g
    in_b = bnd_b[np.searchsorted(bnd_b, g) % len(bnd_b)] == g
    if in_a and in_b:
        return [(leaf, 0.5 * w) for leaf, w in _leaf_weights(tree, id_a, g)] + [
            (leaf, 0.5 * w) for leaf, w in _leaf_weights(tree, id_b, g)
        ]
    if in_a:
        return _leaf_weights(tree, id_a, g)
    if in_b:
        return _leaf_weights(tree, id_b, g)
    raise RuntimeError(f"node {g} is not on the boundary of box {node_id}")


def dense_oracle(tree, operator, f, max_nodes=4500):
    """Brute-force reference solve: one dense system over all mesh nodes.

    Rows: the collocation equation at every patch-interior node, a
    Dirichlet row at every outer-boundary node, and at every interface
    node the continuity of the derivative normal to the interface it is
    eliminated on, with contributions from the adjacent patches weighted
    exactly as the hierarchical merge weighs them. Independent of the
    sweep machinery; intended for meshes up to a few thousand nodes.
    """
    mesh = tree.mesh
    n = mesh.n_nodes
    if n > max_nodes:
        raise ValueError(f"oracle limited to {max_nodes} nodes, mesh has {n}")
    grid = _leaf_grid(tree)
    assembler = LeafAssembler(grid, operator)
    gamma = tree.boundary
    fvec = _dirichlet_vector(tree, f)

    system = np.zeros((n, n))
    rhs = np.zeros(n)
    written = np.zeros(n, dtype=bool)
    system[gamma, gamma] = 1.0
    rhs[gamma] = fvec
    written[gamma] = True

    local_pos = {}
    leaf_map = {}
    for leaf in tree.leaves:
        gl = mesh.leaf_maps[leaf.cell]
        leaf_map[leaf.node_id] = gl
        local_pos[leaf.node_id] = {int(g): k for k, g in enumerate(gl)}
        A = assembler.matrix(mesh.coords[gl])
        rows = gl[grid.interior_idx]
        system[np.ix_(rows, gl)] = A[grid.interior_idx]
        written[rows] = True

    for node in tree.nodes:
        if node.is_leaf:
            continue
        normal = grid.ddx if node.orientation == "v" else grid.ddy
        id_a, id_b = node.child_ids
        for g in node.owned_idx:
            for side_id, sign in ((id_a, 1.0), (id_b, -1.0)):
                for leaf, wt in _leaf_weights(tree, side_id, g):
                    gl = leaf_map[leaf.node_id]
                    k = local_pos[leaf.node_id][int(g)]
                    system[g, gl] += sign * wt * normal[k]
            written[g] = True

    if not written.all():
        raise RuntimeError("oracle assembly left equations missing")
    try:
        u = scipy.linalg.solve(system, rhs)
    except scipy.linalg.LinAlgError as exc:
        raise RuntimeError(f"oracle system is singular: {exc}") from None

    v_bnd = np.empty(len(gamma))
    w_bnd = np.empty(len(gamma))
    for pos, g in enumerate(gamma):
        vv = ww = 0.0
        for leaf, wt in _leaf_weights(tree, tree.root.node_id, int(g)):
            gl = leaf_map[leaf.node_id]
            k = local_pos[leaf.node_id][int(g)]
            vv += wt * (grid.ddx[k] @ u[gl])
            ww += wt * (grid.ddy[k] @ u[gl])
        v_bnd[pos] = vv
        w_bnd[pos] = ww
    return Solution(u=u, v_bnd=v_bnd, w_bnd=w_bnd)


def error_metrics(solution, reference, tree):
    """Max-norm errors against an exact solution.

    Returns ``(e_pot, e_grad)``: the worst absolute solution error over all
    mesh nodes, and the worst absolute error of either boundary derivative
    component over the outer boundary (computed from the root operator
    pair, not by re-differentiating the solution).
    """
    mesh = tree.mesh
    x, y = mesh.coords[:, 0], mesh.coords[:, 1]
    e_pot = float(np.max(np.abs(solution.u - reference.value(x, y))))
    gamma = tree.boundary
    if np.isnan(solution.v_bnd).any() or np.isnan(solution.w_bnd).any():
        raise ValueError(
            "boundary gradient rows were restricted; rerun without row "
            "restriction to measure gradient errors"
        )
    gx = reference.grad_x(x[gamma], y[gamma])
    gy = reference.grad_y(x[gamma], y[gamma])
    e_grad = float(
        max(np.max(np.abs(solution.v_bnd - gx)), np.max(np.abs(solution.w_bnd - gy)))
    )
    return e_pot, e_grad


def snap_probe(mesh, point, subset=None, snap=True):
    """Global id of the mesh node at (or nearest to) a probe point."""
    coords = mesh.coords if subset is None else mesh.coords[subset]
    d = coords - np.asarray(point, dtype=float)
    j = int(np.argmin(d[:, 0] ** 2 + d[:, 1] ** 2))
    dist = float(np.hypot(*d[j]))
    if not snap and dist > 1e-9 * mesh.spec.h:
        raise ProbeOffMeshError(
            f"probe {tuple(point)} misses the mesh by {dist:.3e} and snapping is off"
        )
    return int(subset[j]) if subset is not None else j


def _domain_spec(problem, p, n):
    if problem.layout == "lshape":
        return DomainSpec.lshape(p, n)
    return DomainSpec.square(p, n * problem.extent, h=1.0 / n)


def pointwise_convergence(problem, p, n_seq, kappa=None, ppw=None, convection=None,
                          rcond_min=DEFAULT_RCOND_MIN, snap=True):
    """Probe-value convergence across a doubling refinement sequence.

    For each ``n`` (leaf cells per unit length) the problem is solved and
    the solution / boundary-derivative values at the problem's probe points
    are recorded; successive rows are differenced (value at N minus value
    at 4N) to estimate pointwise errors when no exact solution exists.
    """
    n_seq = list(n_seq)
    if len(n_seq) < 2 or any(b != 2 * a for a, b in zip(n_seq, n_seq[1:])):
        raise ValueError("refinement sequence must double n at every step")
    rows = []
    for n in n_seq:
        kappa_n = kappa
        if problem.has_wavenumber and kappa_n is None and ppw is not None:
            kappa_n = kappa_from_ppw(n, p, ppw)
        instance = problem.build(kappa=kappa_n, convection=convection)
        tree = build_tree(_domain_spec(problem, p, n))
        state = precompute(tree, instance.operator, rcond_min=rcond_min)
        sol = solve(state, instance.boundary_data)

        mesh = tree.mesh
        record = {"n": n, "N": mesh.n_nodes, "kappa": kappa_n,
                  "u_int": None, "w_bnd": None}
        if problem.probe_interior is not None:
            gid = snap_probe(mesh, problem.probe_interior, snap=snap)
            record["u_int"] = float(sol.u[gid])
        if problem.probe_boundary is not None:
            gamma = tree.boundary
            gid = snap_probe(mesh, problem.probe_boundary, subset=gamma, snap=snap)
            pos = int(np.searchsorted(gamma, gid))
            record["w_bnd"] = float(sol.w_bnd[pos])
        rows.append(record)

    for i, row in enumerate(rows):
        nxt = rows[i + 1] if i + 1 < len(rows) else None
        row["e_int"] = (row["u_int"] - nxt["u_int"]) if nxt and row["u_int"] is not None else None
        row["e_bnd"] = (row["w_bnd"] - nxt["w_bnd"]) if nxt and row["w_bnd"] is not None else None
    return rows


_MAGIC = b"SPDSOLV1"


def save_state(state, path):
    """Serialize a precomputed solver state to a binary file.

    Layout: magic, little-endian u64 header length, JSON header (layout
    parameters, per-box shapes, condition log), then the raw row-major
    float64 payload of every interior map in box-id order followed by the
    root derivative pair. Matrices round-trip bit-exactly.
    """
    tree = state.tree
    spec = tree.spec
    ids = sorted(state.interior_maps)
    header = {
        "format_version": 1,
        "p": spec.p,
        "h": spec.h,
        "mask": np.asarray(spec.mask, dtype=int).tolist(),
        "rcond_min": state.rcond_min,
        "restricted": bool(state.restricted),
        "t_inv": state.t_inv,
        "memory_bytes": int(state.memory_bytes),
        "rcond_log": {str(k): v for k, v in state.rcond_log.items()},
        "interior_shapes": [[i, *state.interior_maps[i].shape] for i in ids],
        "root_ddx_shape": list(state.root_ddx.shape),
        "root_ddy_shape": list(state.root_ddy.shape),
        "root_ddx_rows": None if state.root_ddx_rows is None else state.root_ddx_rows.tolist(),
        "root_ddy_rows": None if state.root_ddy_rows is None else state.root_ddy_rows.tolist(),
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for i in ids:
            fh.write(np.ascontiguousarray(state.interior_maps[i]).tobytes())
        fh.write(np.ascontiguousarray(state.root_ddx).tobytes())
        fh.write(np.ascontiguousarray(state.root_ddy).tobytes())


def load_state(path):
    """Rebuild a :class:`SolverState` from a file written by ``save_state``.

    The mesh and tree are reconstructed deterministically from the stored
    layout parameters, then validated against the stored matrix shapes.
    """
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a solver-state file (bad magic {magic!r})")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["format_version"] != 1:
            raise ValueError(f"unsupported format version {header['format_version']}")

        spec = DomainSpec(p=header["p"], mask=np.asarray(header["mask"], dtype=bool),
                          h=header["h"])
        tree = build_tree(spec)

        def read_matrix(shape):
            r, c = int(shape[0]), int(shape[1])
            buf = fh.read(r * c * 8)
            if len(buf) != r * c * 8:
                raise ValueError("truncated solver-state file")
            return np.frombuffer(buf, dtype=np.float64).reshape(r, c)

        interior_maps = {}
        for i, r, c in header["interior_shapes"]:
            interior_maps[int(i)] = read_matrix((r, c))
        root_ddx = read_matrix(header["root_ddx_shape"])
        root_ddy = read_matrix(header["root_ddy_shape"])

    for node in tree.nodes:
        m = interior_maps.get(node.node_id)
        if m is None or m.shape != (len(node.owned_idx), len(node.boundary_idx)):
            raise ValueError(
                f"stored operators do not match the reconstructed tree at box "
                f"{node.node_id}"
            )
    rows_x = header["root_ddx_rows"]
    rows_y = header["root_ddy_rows"]
    return SolverState(
        tree=tree,
        interior_maps=interior_maps,
        root_ddx=root_ddx,
        root_ddy=root_ddy,
        rcond_log={int(k): float(v) for k, v in header["rcond_log"].items()},
        rcond_min=header["rcond_min"],
        restricted=header["restricted"],
        memory_bytes=header["memory_bytes"],
        t_inv=header["t_inv"],
        root_ddx_rows=None if rows_x is None else np.asarray(rows_x, dtype=np.int64),
        root_ddy_rows=None if rows_y is None else np.asarray(rows_y, dtype=np.int64),
    )
