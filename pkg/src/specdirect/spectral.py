"""Chebyshev collocation grids and dense spectral differentiation matrices.

One-dimensional building blocks (`cheb_nodes`, `cheb_diff_1d`) and their
tensor-product extension to a square or rectangular patch (`tensor_grid`).
Everything is dense: patch orders stay small (p <= ~41), where dense
matrix algebra beats any transform-based scheme.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Cheb1D", "TensorGrid", "cheb_nodes", "cheb_diff_1d", "tensor_grid"]


def _freeze(a):
    a.flags.writeable = False
    return a


def cheb_nodes(p, a):
    """Chebyshev extremum nodes on [-a, a], in decreasing order.

    Parameters
    ----------
    p : int
        Number of nodes, at least 2.
    a : float
        Half-width of the interval, positive.

    Returns
    -------
    ndarray of shape (p,)
        ``t[i] = a*cos(i*pi/(p-1))`` for ``i = 0..p-1``, so ``t[0] = a`` and
        ``t[-1] = -a``.

    Notes
    -----
    Evaluated in the equivalent form ``a*sin(pi*(p-1-2i)/(2(p-1)))`` so that
    the node set is exactly antisymmetric in floating point and the midpoint
    of an odd-order grid is exactly zero.
    """
    p = _check_order(p, 2)
    if not a > 0:
        raise ValueError(f"half-width must be positive, got {a}")
    i = np.arange(p)
    t = a * np.sin(np.pi * (p - 1 - 2 * i) / (2 * (p - 1)))
    return _freeze(t)


def cheb_diff_1d(p, a):
    """Dense first-derivative matrix on the nodes of ``cheb_nodes(p, a)``.

    Differentiates the degree-(p-1) interpolant: off-diagonal entries come
    from the barycentric weights, the diagonal is the negative sum of the
    rest of the row so that constants differentiate to exactly zero.
    """
    p = _check_order(p, 2)
    t = cheb_nodes(p, a)
    c = np.ones(p)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(p)
    dt = t[:, None] - t[None, :]
    deriv = np.outer(c, 1.0 / c) / (dt + np.eye(p))
    deriv -= np.diag(deriv.sum(axis=1))
    return _freeze(deriv)


@dataclass(frozen=True)
class Cheb1D:
    """One axis of a collocation patch: nodes plus derivative matrix."""

    p: int
    a: float
    nodes: np.ndarray
    deriv: np.ndarray

    @classmethod
    def build(cls, p, a):
        return cls(p=int(p), a=float(a), nodes=cheb_nodes(p, a), deriv=cheb_diff_1d(p, a))


@dataclass(frozen=True)
class TensorGrid:
    """A p x p tensor-product Chebyshev grid on an axis-aligned patch.

    The flattened node index is ``k = i*p + j`` for axis indices
    ``(i, j)``, corresponding to the point ``(tx[i] + cx, ty[j] + cy)``.
    This ordering is the canonical one used everywhere in the package.

    Attributes
    ----------
    axis_x, axis_y : Cheb1D
        Per-axis nodes and derivative matrices (half-widths may differ for
        rectangular patches).
    nodes : (p*p, 2) ndarray
        Node coordinates in the flattened ordering.
    ddx, ddy : (p*p, p*p) ndarray
        Matrices mapping node samples of a function in the patch polynomial
        space to samples of its first/second coordinate derivative.
    neg_lap : (p*p, p*p) ndarray
        ``-(ddx @ ddx + ddy @ ddy)``, i.e. the map to samples of the
        *negated* Laplacian.
    boundary_idx, interior_idx : int ndarrays
        Flattened indices of the 4p-4 edge nodes and the (p-2)^2 interior
        nodes, each sorted lexicographically by coordinates.
    """

    p: int
    center: tuple
    axis_x: Cheb1D
    axis_y: Cheb1D
    nodes: np.ndarray
    ddx: np.ndarray
    ddy: np.ndarray
    neg_lap: np.ndarray
    boundary_idx: np.ndarray
    interior_idx: np.ndarray

    @property
    def a(self):
        return self.axis_x.a

    @property
    def n_nodes(self):
        return self.p * self.p

    def submatrix(self, mat, rows, cols):
        """Slice ``mat`` by node index vectors (rows and columns)."""
        return mat[np.ix_(rows, cols)]


def tensor_grid(p, a, center=(0.0, 0.0), a2=None):
    """Build a :class:`TensorGrid` on ``[cx-a, cx+a] x [cy-a2, cy+a2]``.

    Parameters
    ----------
    p : int
        Nodes per axis, at least 3 (the patch needs interior nodes).
    a : float
        Half-width along the first coordinate.
    center : pair of floats
        Patch center.
    a2 : float, optional
        Half-width along the second coordinate; defaults to ``a``.

    Notes
    -----
    ``ddx`` acts along the first coordinate and ``ddy`` along the second,
    consistent with the ``k = i*p + j`` flattening. ``neg_lap`` is formed
    literally as ``-(ddx @ ddx + ddy @ ddy)``.
    """
    p = _check_order(p, 3)
    axis_x = Cheb1D.build(p, a)
    axis_y = axis_x if (a2 is None or a2 == a) else Cheb1D.build(p, a2)

    cx, cy = float(center[0]), float(center[1])
    x = axis_x.nodes + cx
    y = axis_y.nodes + cy
    nodes = np.empty((p * p, 2))
    nodes[:, 0] = np.repeat(x, p)
    nodes[:, 1] = np.tile(y, p)

    eye = np.eye(p)
    ddx = np.kron(axis_x.deriv, eye)
    ddy = np.kron(eye, axis_y.deriv)
    neg_lap = -(ddx @ ddx + ddy @ ddy)

    ii, jj = np.divmod(np.arange(p * p), p)
    on_edge = (ii == 0) | (ii == p - 1) | (jj == 0) | (jj == p - 1)
    boundary_idx = _lex_sorted(np.flatnonzero(on_edge), ii, jj, p)
    interior_idx = _lex_sorted(np.flatnonzero(~on_edge), ii, jj, p)

    return TensorGrid(
        p=p,
        center=(cx, cy),
        axis_x=axis_x,
        axis_y=axis_y,
        nodes=_freeze(nodes),
        ddx=_freeze(ddx),
        ddy=_freeze(ddy),
        neg_lap=_freeze(neg_lap),
        boundary_idx=_freeze(boundary_idx),
        interior_idx=_freeze(interior_idx),
    )


def _lex_sorted(idx, ii, jj, p):
    # Ascending lexicographic order in (x, y); node coordinates decrease
    # with the axis index, so sort by the reversed integer indices.
    order = np.lexsort((p - 1 - jj[idx], p - 1 - ii[idx]))
    return idx[order]


def _check_order(p, minimum):
    if int(p) != p or p < minimum:
        raise ValueError(f"node count per axis must be an integer >= {minimum}, got {p}")
    return int(p)
