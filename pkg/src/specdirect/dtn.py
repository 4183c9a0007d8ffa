"""Per-box operator triples: leaf factorization and the pairwise merge.

Every box of the hierarchy carries three dense matrices acting on Dirichlet
values at its (canonically ordered) boundary nodes: one reconstructing the
box-interior values, and two producing the first/second coordinate
derivative on the boundary (the Dirichlet-to-Neumann pair). A leaf gets
them by eliminating its patch-interior collocation rows; a parent gets them
by enforcing continuity of the derivative normal to its children's shared
edge and eliminating the interface values.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve

from .errors import ResonantLeafError, ResonantMergeError

__all__ = ["OperatorTriple", "leaf_factor", "merge", "restrict_to_normal_rows"]

DEFAULT_RCOND_MIN = 1e-12


@dataclass(frozen=True)
class OperatorTriple:
    """Solution operator and boundary derivative pair for one box.

    ``interior_map`` maps boundary values to the box's owned interior
    values; ``ddx_map``/``ddy_map`` map boundary values to the boundary
    samples of the first/second coordinate derivative. ``ddx_rows``
    (``ddy_rows``) lists the boundary positions whose derivative rows are
    stored, or ``None`` when all rows are present. ``rcond`` is the
    1-norm reciprocal condition estimate of the block inverted while
    building the triple.
    """

    interior_map: np.ndarray
    ddx_map: np.ndarray
    ddy_map: np.ndarray
    rcond: float
    ddx_rows: Optional[np.ndarray] = None
    ddy_rows: Optional[np.ndarray] = None

    @property
    def nbytes(self):
        return self.interior_map.nbytes + self.ddx_map.nbytes + self.ddy_map.nbytes


def _factor_with_rcond(block):
    """LU-factor a square block and estimate its reciprocal condition."""
    anorm = np.linalg.norm(block, 1) if block.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(block, check_finite=False)
    gecon = get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0:
        raise RuntimeError(f"condition estimation failed (LAPACK info={info})")
    return (lu, piv), float(rcond)


class LeafStencil:
    """Grid-dependent pieces of the leaf factorization, computed once.

    All leaves share the template grid, so the boundary/interior blocks of
    the derivative matrices can be sliced a single time and reused.
    """

    def __init__(self, grid):
        ii = grid.interior_idx
        ee = grid.boundary_idx
        self.interior_idx = ii
        self.boundary_idx = ee
        self.ddx_ee = grid.ddx[np.ix_(ee, ee)]
        self.ddx_ei = grid.ddx[np.ix_(ee, ii)]
        self.ddy_ee = grid.ddy[np.ix_(ee, ee)]
        self.ddy_ei = grid.ddy[np.ix_(ee, ii)]

    def factor(self, A, rcond_min=DEFAULT_RCOND_MIN, node_id=None):
        ii, ee = self.interior_idx, self.boundary_idx
        A_ii = A[np.ix_(ii, ii)]
        A_ie = A[np.ix_(ii, ee)]
        lu, rcond = _factor_with_rcond(A_ii)
        if rcond < rcond_min:
            raise ResonantLeafError(node_id, rcond, rcond_min)
        interior_map = -lu_solve(lu, A_ie, check_finite=False)
        ddx_map = self.ddx_ee + self.ddx_ei @ interior_map
        ddy_map = self.ddy_ee + self.ddy_ei @ interior_map
        return OperatorTriple(
            interior_map=interior_map, ddx_map=ddx_map, ddy_map=ddy_map, rcond=rcond
        )


def leaf_factor(A, grid, rcond_min=DEFAULT_RCOND_MIN, node_id=None):
    """Eliminate a patch's interior collocation rows.

    Given the collocation matrix ``A`` of the operator on ``grid``, returns
    the triple with

    * ``interior_map = -A_ii^{-1} A_ie`` (interior values from boundary
      values, using the interior rows of ``A``),
    * ``ddx_map = ddx_ee + ddx_ei @ interior_map``,
    * ``ddy_map = ddy_ee + ddy_ei @ interior_map``,

    where the subscripts slice boundary/interior node blocks. Raises
    :class:`ResonantLeafError` when the interior block is numerically
    singular (``rcond`` below ``rcond_min``).
    """
    return LeafStencil(grid).factor(A, rcond_min, node_id)


def _rows(mat, stored_rows, wanted):
    """Select derivative rows by boundary position from possibly-restricted storage."""
    if stored_rows is None:
        return mat[wanted]
    loc = np.searchsorted(stored_rows, wanted)
    ok = (loc < len(stored_rows)) & (stored_rows[np.minimum(loc, len(stored_rows) - 1)] == wanted)
    if not np.all(ok):
        raise RuntimeError(
            "derivative rows required by a merge were dropped by row restriction"
        )
    return mat[loc]


def _parent_dtn(mat_a, rows_a, mat_b, rows_b, part, interior_blk, keep_rows):
    """Assemble one parent boundary-derivative operator from its children.

    Exclusive rows are copied from the owning child, shared-outer rows are
    the average of the two children's rows, and every row gets the
    interface-elimination correction ``(columns at shared-inner) @
    interior_blk``. Output rows follow the parent's canonical order
    (optionally restricted to ``keep_rows``); columns likewise.
    """
    n1, n2, n3, n4 = part.sizes()
    ne = n1 + n2 + n3
    cols = part.parent_cols
    rows_blk = cols if keep_rows is None else cols[keep_rows]

    sel1 = rows_blk < n1
    sel2 = (rows_blk >= n1) & (rows_blk < n1 + n2)
    sel3 = rows_blk >= n1 + n2
    out = np.zeros((len(rows_blk), ne))
    corr = np.empty((len(rows_blk), n4))

    if np.any(sel1):
        ra = part.a_excl_pos[rows_blk[sel1]]
        block = _rows(mat_a, rows_a, ra)
        out[np.ix_(sel1, np.arange(n1))] = block[:, part.a_excl_pos]
        out[np.ix_(sel1, np.arange(n1 + n2, ne))] = block[:, part.a_outer_pos]
        corr[sel1] = block[:, part.a_inner_pos]
    if np.any(sel2):
        rb = part.b_excl_pos[rows_blk[sel2] - n1]
        block = _rows(mat_b, rows_b, rb)
        out[np.ix_(sel2, np.arange(n1, n1 + n2))] = block[:, part.b_excl_pos]
        out[np.ix_(sel2, np.arange(n1 + n2, ne))] = block[:, part.b_outer_pos]
        corr[sel2] = block[:, part.b_inner_pos]
    if np.any(sel3):
        which = rows_blk[sel3] - n1 - n2
        block_a = _rows(mat_a, rows_a, part.a_outer_pos[which])
        block_b = _rows(mat_b, rows_b, part.b_outer_pos[which])
        out[np.ix_(sel3, np.arange(n1))] = 0.5 * block_a[:, part.a_excl_pos]
        out[np.ix_(sel3, np.arange(n1, n1 + n2))] = 0.5 * block_b[:, part.b_excl_pos]
        out[np.ix_(sel3, np.arange(n1 + n2, ne))] = 0.5 * (
            block_a[:, part.a_outer_pos] + block_b[:, part.b_outer_pos]
        )
        corr[sel3] = 0.5 * (block_a[:, part.a_inner_pos] + block_b[:, part.b_inner_pos])

    out += corr @ interior_blk
    return out[:, cols]


def merge(tri_a, tri_b, partition, orientation, rcond_min=DEFAULT_RCOND_MIN,
          node_id=None, keep_rows=None):
    """Merge two sibling triples into their union box's triple.

    ``orientation`` is ``'v'`` when the children share a vertical edge
    (side-by-side), in which case continuity of the first coordinate
    derivative is enforced across the interface; ``'h'`` (stacked) uses
    the second coordinate derivative. Writing ``N`` for that normal
    operator and subscripts 1..4 for the partition sets, the interface
    values are eliminated through

        interior_map = (N^a_44 - N^b_44)^{-1} [-N^a_41 | N^b_42 | N^b_43 - N^a_43],

    and both parent derivative maps are assembled blockwise from the
    children with shared-outer rows averaged half/half. ``keep_rows``
    optionally restricts the parent's stored derivative rows (pair of
    position arrays into the parent boundary order). Raises
    :class:`ResonantMergeError` when the interface coupling block is
    numerically singular.
    """
    part = partition
    if orientation == "v":
        mat_a, rows_a = tri_a.ddx_map, tri_a.ddx_rows
        mat_b, rows_b = tri_b.ddx_map, tri_b.ddx_rows
    elif orientation == "h":
        mat_a, rows_a = tri_a.ddy_map, tri_a.ddy_rows
        mat_b, rows_b = tri_b.ddy_map, tri_b.ddy_rows
    else:
        raise ValueError(f"orientation must be 'v' or 'h', got {orientation!r}")

    n1, n2, n3, n4 = part.sizes()
    a4 = _rows(mat_a, rows_a, part.a_inner_pos)
    b4 = _rows(mat_b, rows_b, part.b_inner_pos)
    lu, rcond = _factor_with_rcond(a4[:, part.a_inner_pos] - b4[:, part.b_inner_pos])
    if rcond < rcond_min:
        raise ResonantMergeError(node_id, rcond, rcond_min)

    rhs = np.empty((n4, n1 + n2 + n3))
    rhs[:, :n1] = -a4[:, part.a_excl_pos]
    rhs[:, n1 : n1 + n2] = b4[:, part.b_excl_pos]
    rhs[:, n1 + n2 :] = b4[:, part.b_outer_pos] - a4[:, part.a_outer_pos]
    interior_blk = lu_solve(lu, rhs)

    keep_x, keep_y = keep_rows if keep_rows is not None else (None, None)
    ddx_map = _parent_dtn(tri_a.ddx_map, tri_a.ddx_rows, tri_b.ddx_map, tri_b.ddx_rows,
                          part, interior_blk, keep_x)
    ddy_map = _parent_dtn(tri_a.ddy_map, tri_a.ddy_rows, tri_b.ddy_map, tri_b.ddy_rows,
                          part, interior_blk, keep_y)
    return OperatorTriple(
        interior_map=interior_blk[:, part.parent_cols],
        ddx_map=ddx_map,
        ddy_map=ddy_map,
        rcond=rcond,
        ddx_rows=keep_x,
        ddy_rows=keep_y,
    )


def restrict_to_normal_rows(triple, ddx_rows=None, ddy_rows=None):
    """Drop tangential derivative rows from a triple.

    ``ddx_rows``/``ddy_rows`` list the boundary positions to keep (sorted);
    ``None`` for both returns the triple unchanged. The retained rows must
    cover whatever later merges will read: vertical-edge nodes (plus
    corners) for the first coordinate derivative, horizontal-edge nodes
    (plus corners) for the second.
    """
    if ddx_rows is None and ddy_rows is None:
        return triple
    ddx_map = triple.ddx_map if ddx_rows is None else _rows(
        triple.ddx_map, triple.ddx_rows, ddx_rows)
    ddy_map = triple.ddy_map if ddy_rows is None else _rows(
        triple.ddy_map, triple.ddy_rows, ddy_rows)
    return OperatorTriple(
        interior_map=triple.interior_map,
        ddx_map=ddx_map,
        ddy_map=ddy_map,
        rcond=triple.rcond,
        ddx_rows=ddx_rows if ddx_rows is not None else triple.ddx_rows,
        ddy_rows=ddy_rows if ddy_rows is not None else triple.ddy_rows,
    )
