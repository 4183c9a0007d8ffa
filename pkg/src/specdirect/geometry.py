"""Domain layout, deduplicated global mesh, and the binary merge tree.

The domain is a union of equal square cells selected by a boolean occupancy
mask; each occupied cell carries one p x p collocation patch. Nodes shared
by neighboring patches are deduplicated by exact integer arithmetic on the
per-axis lattice ``key = cell * (p-1) + offset`` (never by floating-point
proximity). Global node ids are assigned in lexicographic coordinate order,
so the canonical ordering of any index set is simply ascending ids.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InconsistentChildrenError, UndecomposableLayoutError

__all__ = [
    "DomainSpec",
    "GlobalMesh",
    "InterfacePartition",
    "Tree",
    "TreeNode",
    "build_mesh",
    "build_tree",
    "partition_interface",
]


@dataclass(frozen=True)
class DomainSpec:
    """Leaf order, cell occupancy mask, and cell side length.

    ``mask[ix, iy]`` marks cell ``[ix*h, (ix+1)*h] x [iy*h, (iy+1)*h]`` as
    part of the domain. Occupied cells must form a 4-connected region.
    """

    p: int
    mask: np.ndarray
    h: float

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3:
            raise ValueError(f"leaf order must be an integer >= 3, got {self.p}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
            raise ValueError("occupancy mask must be a non-empty 2D boolean array")
        if not mask.any():
            raise ValueError("occupancy mask has no occupied cells")
        if not self.h > 0:
            raise ValueError(f"cell side length must be positive, got {self.h}")
        mask = mask.copy()
        mask.flags.writeable = False
        object.__setattr__(self, "p", int(self.p))
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "h", float(self.h))
        cells = [tuple(c) for c in np.argwhere(mask)]
        if not _connected(set(cells)):
            raise ValueError("occupied cells must form a 4-connected region")

    @classmethod
    def square(cls, p, n, h=None):
        """An n x n grid of cells; by default the unit square (h = 1/n)."""
        return cls(p=p, mask=np.ones((n, n), dtype=bool), h=1.0 / n if h is None else h)

    @classmethod
    def rectangle(cls, p, nx, ny, h):
        return cls(p=p, mask=np.ones((nx, ny), dtype=bool), h=h)

    @classmethod
    def lshape(cls, p, n):
        """[0,2]^2 minus the top-right unit square, n cells per unit length."""
        mask = np.ones((2 * n, 2 * n), dtype=bool)
        mask[n:, n:] = False
        return cls(p=p, mask=mask, h=1.0 / n)

    @property
    def n_cells(self):
        return int(self.mask.sum())

    @property
    def occupied(self):
        return [tuple(c) for c in np.argwhere(self.mask)]


def _connected(cellset):
    start = next(iter(cellset))
    seen = {start}
    stack = [start]
    while stack:
        cx, cy = stack.pop()
        for nb in ((cx - 1, cy), (cx + 1, cy), (cx, cy - 1), (cx, cy + 1)):
            if nb in cellset and nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(cellset)


def _axis_coords(n_cells, p, h):
    # Coordinate of lattice key m = c*(p-1) + r: cell offset plus the
    # Chebyshev node at in-cell index i = (p-1) - r, written in the exactly
    # antisymmetric sin form so cell edges land on exact multiples of h.
    q = p - 1
    m = np.arange(n_cells * q + 1)
    c, r = np.divmod(m, q)
    i = q - r
    return c * h + 0.5 * h + 0.5 * h * np.sin(np.pi * (q - 2 * i) / (2 * q))


@dataclass(frozen=True)
class GlobalMesh:
    """Deduplicated node set for a :class:`DomainSpec`.

    ``keys`` holds the integer lattice coordinates of each node; ids are
    assigned in ascending lexicographic key order. ``leaf_maps[(cx, cy)]``
    maps a patch's flattened local index to global ids.
    """

    spec: DomainSpec
    n_nodes: int
    coords: np.ndarray
    keys: np.ndarray
    leaf_maps: dict
    _id_lattice: np.ndarray = field(repr=False)

    def nearest_node(self, point):
        """Global id of the mesh node closest to ``point`` (ties: lowest id)."""
        d = self.coords - np.asarray(point, dtype=float)
        return int(np.argmin(d[:, 0] ** 2 + d[:, 1] ** 2))


def build_mesh(spec):
    """Build the deduplicated global mesh for a domain layout."""
    p, h = spec.p, spec.h
    q = p - 1
    nx, ny = spec.mask.shape
    occ = np.zeros((nx * q + 1, ny * q + 1), dtype=bool)
    for cx, cy in spec.occupied:
        occ[cx * q : (cx + 1) * q + 1, cy * q : (cy + 1) * q + 1] = True

    id_lattice = np.full(occ.shape, -1, dtype=np.int64)
    id_lattice[occ] = np.arange(occ.sum())
    keys = np.argwhere(occ)

    ax = _axis_coords(nx, p, h)
    ay = _axis_coords(ny, p, h)
    coords = np.column_stack((ax[keys[:, 0]], ay[keys[:, 1]]))

    leaf_maps = {}
    for cx, cy in spec.occupied:
        kx = cx * q + (q - np.arange(p))  # local axis index i -> lattice key
        ky = cy * q + (q - np.arange(p))
        leaf_maps[(cx, cy)] = id_lattice[np.ix_(kx, ky)].ravel()

    for arr in (coords, keys):
        arr.flags.writeable = False
    id_lattice.flags.writeable = False
    return GlobalMesh(
        spec=spec,
        n_nodes=int(occ.sum()),
        coords=coords,
        keys=keys,
        leaf_maps=leaf_maps,
        _id_lattice=id_lattice,
    )


@dataclass(frozen=True)
class InterfacePartition:
    """Four-way split of two siblings' boundary nodes at their merge.

    ``exclusive_a``/``exclusive_b`` are boundary nodes of only one child,
    ``shared_outer`` the shared nodes that remain on the union's boundary,
    and ``shared_inner`` the shared nodes eliminated by the merge. The
    ``*_pos`` arrays give the positions of these sets inside each child's
    (sorted) boundary index vector; ``parent_cols`` reorders the block
    concatenation [exclusive_a | exclusive_b | shared_outer] into the
    parent's canonical (ascending id) boundary order.
    """

    exclusive_a: np.ndarray
    exclusive_b: np.ndarray
    shared_outer: np.ndarray
    shared_inner: np.ndarray
    a_excl_pos: np.ndarray
    a_outer_pos: np.ndarray
    a_inner_pos: np.ndarray
    b_excl_pos: np.ndarray
    b_outer_pos: np.ndarray
    b_inner_pos: np.ndarray
    parent_cols: np.ndarray

    def sizes(self):
        return (
            len(self.exclusive_a),
            len(self.exclusive_b),
            len(self.shared_outer),
            len(self.shared_inner),
        )


@dataclass
class TreeNode:
    """One box of the merge hierarchy.

    Ids are 1-based, assigned breadth-first, so every parent precedes its
    children and the root is 1. ``boundary_idx`` lists the global ids of
    the nodes on the box boundary (ascending = canonical order) and
    ``owned_idx`` the interior nodes this box eliminates: all patch-interior
    nodes for a leaf, the shared interface interior for a parent.
    """

    node_id: int
    level: int
    cells: tuple
    parent_id: Optional[int] = None
    child_ids: Optional[tuple] = None
    orientation: Optional[str] = None  # 'v': side-by-side children; 'h': stacked
    split_key: Optional[int] = None
    boundary_idx: np.ndarray = None
    owned_idx: np.ndarray = None
    partition: Optional[InterfacePartition] = None

    @property
    def is_leaf(self):
        return self.child_ids is None

    @property
    def cell(self):
        if not self.is_leaf:
            raise ValueError("only leaves correspond to a single cell")
        return self.cells[0]


@dataclass(frozen=True)
class Tree:
    """Mesh plus the ordered list of boxes (index ``node_id - 1``)."""

    spec: DomainSpec
    mesh: GlobalMesh
    nodes: list

    @property
    def root(self):
        return self.nodes[0]

    @property
    def boundary(self):
        """Global ids of the outer (Dirichlet) boundary nodes."""
        return self.root.boundary_idx

    def node(self, node_id):
        return self.nodes[node_id - 1]

    @property
    def leaves(self):
        return [n for n in self.nodes if n.is_leaf]

    def leaf_center(self, node):
        cx, cy = node.cell
        h = self.spec.h
        return ((cx + 0.5) * h, (cy + 0.5) * h)


def _bisect(cells):
    """Split a cell set into two connected halves across its longer axis."""
    arr = np.asarray(cells)
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    extent = hi - lo + 1
    axes = [0, 1] if extent[0] >= extent[1] else [1, 0]
    for axis in axes:
        if extent[axis] < 2:
            continue
        mid = lo[axis] + (extent[axis] + 1) // 2
        part_a = [c for c in cells if c[axis] < mid]
        part_b = [c for c in cells if c[axis] >= mid]
        if not part_a or not part_b:
            continue
        if _connected(set(part_a)) and _connected(set(part_b)):
            orientation = "v" if axis == 0 else "h"
            return tuple(part_a), tuple(part_b), orientation, int(mid)
    raise UndecomposableLayoutError(
        f"cannot bisect {len(cells)} cells into two connected halves"
    )


def _region_boundary(mesh, cells):
    """Sorted global ids of the nodes on the boundary of a cell union."""
    q = mesh.spec.p - 1
    idl = mesh._id_lattice
    cellset = set(cells)
    segs = []
    for cx, cy in cells:
        x0, x1 = cx * q, (cx + 1) * q
        y0, y1 = cy * q, (cy + 1) * q
        if (cx - 1, cy) not in cellset:
            segs.append(idl[x0, y0 : y1 + 1])
        if (cx + 1, cy) not in cellset:
            segs.append(idl[x1, y0 : y1 + 1])
        if (cx, cy - 1) not in cellset:
            segs.append(idl[x0 : x1 + 1, y0])
        if (cx, cy + 1) not in cellset:
            segs.append(idl[x0 : x1 + 1, y1])
    return np.unique(np.concatenate(segs))


def region_edge_nodes(mesh, cells):
    """Boundary node ids lying on vertical / horizontal boundary segments.

    Corner nodes appear in both sets; used by the normal-derivative row
    restriction.
    """
    q = mesh.spec.p - 1
    idl = mesh._id_lattice
    cellset = set(cells)
    vert, horiz = [], []
    for cx, cy in cells:
        x0, x1 = cx * q, (cx + 1) * q
        y0, y1 = cy * q, (cy + 1) * q
        if (cx - 1, cy) not in cellset:
            vert.append(idl[x0, y0 : y1 + 1])
        if (cx + 1, cy) not in cellset:
            vert.append(idl[x1, y0 : y1 + 1])
        if (cx, cy - 1) not in cellset:
            horiz.append(idl[x0 : x1 + 1, y0])
        if (cx, cy + 1) not in cellset:
            horiz.append(idl[x0 : x1 + 1, y1])
    empty = np.empty(0, dtype=np.int64)
    vert = np.unique(np.concatenate(vert)) if vert else empty
    horiz = np.unique(np.concatenate(horiz)) if horiz else empty
    return vert, horiz


def _leaf_interior(mesh, cell):
    q = mesh.spec.p - 1
    cx, cy = cell
    block = mesh._id_lattice[cx * q + 1 : (cx + 1) * q, cy * q + 1 : (cy + 1) * q]
    return block.ravel().copy()


def _partition(mesh, parent, node_a, node_b):
    bnd_a, bnd_b = node_a.boundary_idx, node_b.boundary_idx
    shared = np.intersect1d(bnd_a, bnd_b, assume_unique=True)
    if shared.size == 0:
        raise InconsistentChildrenError(
            f"children {node_a.node_id} and {node_b.node_id} share no boundary nodes"
        )
    axis = 0 if parent.orientation == "v" else 1
    line = parent.split_key * (mesh.spec.p - 1)
    if not np.all(mesh.keys[shared, axis] == line):
        raise InconsistentChildrenError(
            f"shared nodes of {node_a.node_id} and {node_b.node_id} do not lie on "
            f"the split line of node {parent.node_id}"
        )
    bnd_p = parent.boundary_idx
    shared_outer = np.intersect1d(shared, bnd_p, assume_unique=True)
    shared_inner = np.setdiff1d(shared, bnd_p, assume_unique=True)
    exclusive_a = np.setdiff1d(bnd_a, shared, assume_unique=True)
    exclusive_b = np.setdiff1d(bnd_b, shared, assume_unique=True)

    blocks = np.concatenate((exclusive_a, exclusive_b, shared_outer))
    parent_cols = np.argsort(blocks, kind="stable")
    if not np.array_equal(blocks[parent_cols], bnd_p):
        raise InconsistentChildrenError(
            f"boundary of node {parent.node_id} is not the disjoint union of its "
            "children's exclusive and shared-outer nodes"
        )
    return InterfacePartition(
        exclusive_a=exclusive_a,
        exclusive_b=exclusive_b,
        shared_outer=shared_outer,
        shared_inner=shared_inner,
        a_excl_pos=np.searchsorted(bnd_a, exclusive_a),
        a_outer_pos=np.searchsorted(bnd_a, shared_outer),
        a_inner_pos=np.searchsorted(bnd_a, shared_inner),
        b_excl_pos=np.searchsorted(bnd_b, exclusive_b),
        b_outer_pos=np.searchsorted(bnd_b, shared_outer),
        b_inner_pos=np.searchsorted(bnd_b, shared_inner),
        parent_cols=parent_cols,
    )


def partition_interface(tree, node):
    """Recompute the four-way interface partition of a parent node."""
    if isinstance(node, int):
        node = tree.node(node)
    if node.is_leaf:
        raise ValueError(f"node {node.node_id} is a leaf and has no interface")
    a, b = (tree.node(c) for c in node.child_ids)
    return _partition(tree.mesh, node, a, b)


def build_tree(spec, mesh=None):
    """Build the breadth-first-numbered binary merge tree for a layout.

    Leaves correspond one-to-one with occupied cells. Each internal node
    records the orientation of its children's shared edge and the interface
    partition. Raises :class:`UndecomposableLayoutError` when some subset
    cannot be bisected into connected halves.
    """
    if mesh is None:
        mesh = build_mesh(spec)
    cells = tuple(spec.occupied)

    nodes = [TreeNode(node_id=1, level=0, cells=cells)]
    i = 0
    while i < len(nodes):
        node = nodes[i]
        if len(node.cells) > 1:
            part_a, part_b, orientation, mid = _bisect(node.cells)
            node.orientation = orientation
            node.split_key = mid
            id_a, id_b = len(nodes) + 1, len(nodes) + 2
            node.child_ids = (id_a, id_b)
            nodes.append(TreeNode(node_id=id_a, level=node.level + 1, cells=part_a,
                                  parent_id=node.node_id))
            nodes.append(TreeNode(node_id=id_b, level=node.level + 1, cells=part_b,
                                  parent_id=node.node_id))
        i += 1

    for node in nodes:
        node.boundary_idx = _region_boundary(mesh, node.cells)
        if node.is_leaf:
            node.owned_idx = _leaf_interior(mesh, node.cell)

    for node in nodes:
        if not node.is_leaf:
            a, b = (nodes[c - 1] for c in node.child_ids)
            node.partition = _partition(mesh, node, a, b)
            node.owned_idx = node.partition.shared_inner

    return Tree(spec=spec, mesh=mesh, nodes=nodes)
