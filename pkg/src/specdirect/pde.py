"""Coefficient model for the PDE, leaf collocation matrices, reference fields.

An operator is described by six scalar coefficient fields,

    -c11 u_xx - 2 c12 u_xy - c22 u_yy + c1 u_x + c2 u_y + c u = 0,

each given as ``None`` (default: 1 for c11/c22, 0 otherwise), a constant, or
a callable ``f(x, y)`` accepting coordinate arrays. The Helmholtz equation
``-lap(u) - kappa^2 (1 - b) u = 0`` is the named special case with
``c = -kappa^2 (1 - b)``.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bessel import bessel_y0, bessel_y1
from .errors import EllipticityError, NonFiniteCoefficientError

__all__ = [
    "EllipticOperator",
    "HelmholtzProblem",
    "LeafAssembler",
    "ProblemDef",
    "ProblemInstance",
    "ReferenceSolution",
    "assemble_leaf_matrix",
    "builtin_problems",
    "helmholtz_reference",
    "kappa_from_ppw",
]


def _sample(field, x, y):
    """Evaluate a coefficient field at node coordinates; None stays None."""
    if field is None:
        return None
    if callable(field):
        out = np.asarray(field(x, y), dtype=float)
        return np.broadcast_to(out, x.shape).copy() if out.shape != x.shape else out
    return np.full_like(x, float(field))


@dataclass(frozen=True)
class EllipticOperator:
    """Coefficient fields of a second-order elliptic operator.

    ``c11``/``c22`` default to 1 and the rest to 0, so
    ``EllipticOperator()`` is the negated Laplacian.
    """

    c11: object = None
    c12: object = None
    c22: object = None
    c1: object = None
    c2: object = None
    c: object = None

    @classmethod
    def laplace(cls):
        return cls()

    @classmethod
    def helmholtz(cls, kappa, b=None):
        """Operator of ``-lap(u) - kappa^2 (1 - b(x)) u = 0``."""
        kappa = float(kappa)
        if b is None:
            return cls(c=-kappa * kappa)
        return cls(c=lambda x, y: -kappa * kappa * (1.0 - np.asarray(b(x, y), dtype=float)))

    @classmethod
    def convection_diffusion(cls, strength):
        """Operator of ``-lap(u) - strength * u_y = 0``."""
        return cls(c2=-float(strength))

    @property
    def laplacian_leading(self):
        """True when the second-order part is exactly the negated Laplacian."""
        return self.c11 is None and self.c12 is None and self.c22 is None

    def check_ellipticity(self, x, y):
        """Verify c11 > 0 and c11*c22 > c12^2 at the given points."""
        if self.laplacian_leading:
            return
        c11 = _sample(self.c11, x, y)
        c12 = _sample(self.c12, x, y)
        c22 = _sample(self.c22, x, y)
        c11 = np.ones_like(x) if c11 is None else c11
        c22 = np.ones_like(x) if c22 is None else c22
        c12 = np.zeros_like(x) if c12 is None else c12
        for arr in (c11, c12, c22):
            _require_finite(arr, x, y)
        det = c11 * c22 - c12 * c12
        bad = (c11 <= 0) | (det <= 0)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise EllipticityError((x[k], y[k]), det[k], c11[k])


def _require_finite(arr, x, y):
    if not np.all(np.isfinite(arr)):
        k = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise NonFiniteCoefficientError(
            f"coefficient evaluated to {arr[k]} at x=({x[k]}, {y[k]})"
        )


class LeafAssembler:
    """Builds collocation matrices for many same-shape patches of one operator.

    The parts of the matrix coming from constant coefficients are assembled
    once on the template grid; per-patch work is limited to sampling the
    callable fields and a few diagonal-scaled additions. Patches are assumed
    to be translates of the template (which is how the solver uses leaves).
    """

    _PIECES = (
        ("c11", -1.0, lambda g: g.ddx @ g.ddx),
        ("c12", -2.0, lambda g: g.ddx @ g.ddy),
        ("c22", -1.0, lambda g: g.ddy @ g.ddy),
        ("c1", 1.0, lambda g: g.ddx),
        ("c2", 1.0, lambda g: g.ddy),
    )

    def __init__(self, grid, op):
        self.grid = grid
        self.op = op
        x0, y0 = grid.nodes[:, 0], grid.nodes[:, 1]
        self._check_per_leaf = not op.laplacian_leading and any(
            callable(getattr(op, n)) for n in ("c11", "c12", "c22")
        )
        if not self._check_per_leaf:
            # Constant leading coefficients: position-independent, check once.
            op.check_ellipticity(np.zeros(1), np.zeros(1))

        base = None
        varying = []
        if op.laplacian_leading:
            base = grid.neg_lap.copy()
        for name, sign, make in self._PIECES:
            if name in ("c11", "c12", "c22") and op.laplacian_leading:
                continue
            field = getattr(op, name)
            if field is None:
                if name == "c11" or name == "c22":
                    piece = make(grid)
                    base = sign * piece if base is None else base + sign * piece
                continue
            piece = make(grid)
            if callable(field):
                varying.append((sign, piece, field))
            else:
                vals = sign * _sample(field, x0, y0)
                _require_finite(vals, x0, y0)
                term = piece * vals[:, None]
                base = term if base is None else base + term
        if base is None:
            base = np.zeros((grid.n_nodes, grid.n_nodes))

        if op.c is not None and not callable(op.c):
            cvals = _sample(op.c, x0, y0)
            _require_finite(cvals, x0, y0)
            base[np.diag_indices_from(base)] += cvals

        self._base = base
        self._varying = varying
        self._c_callable = op.c if callable(op.c) else None

    def matrix(self, coords=None):
        """Collocation matrix for the patch whose nodes sit at ``coords``.

        ``coords`` defaults to the template grid's own nodes; pass the
        deduplicated global coordinates of a leaf so that coefficient samples
        at shared nodes are bit-identical across neighboring leaves.
        """
        if coords is None:
            coords = self.grid.nodes
        x, y = coords[:, 0], coords[:, 1]
        if self._check_per_leaf:
            self.op.check_ellipticity(x, y)
        A = self._base.copy()
        for sign, piece, field in self._varying:
            vals = sign * _sample(field, x, y)
            _require_finite(vals, x, y)
            A += piece * vals[:, None]
        if self._c_callable is not None:
            cvals = _sample(self._c_callable, x, y)
            _require_finite(cvals, x, y)
            A[np.diag_indices_from(A)] += cvals
        return A


def assemble_leaf_matrix(grid, op, coords=None):
    """Collocation matrix of ``op`` on ``grid``.

    For the plain negated Laplacian this is exactly ``grid.neg_lap``; other
    coefficients add diagonal-scaled derivative blocks. Raises
    :class:`EllipticityError` / :class:`NonFiniteCoefficientError` on bad
    coefficient values at the nodes.
    """
    return LeafAssembler(grid, op).matrix(coords)


@dataclass(frozen=True)
class HelmholtzProblem:
    """Wave-number plus optional scattering potential b(x)."""

    kappa: float
    b: Optional[Callable] = None

    def operator(self):
        return EllipticOperator.helmholtz(self.kappa, self.b)


@dataclass(frozen=True)
class ReferenceSolution:
    """An exact solution with its gradient, used for direct error measures."""

    value: Callable
    grad_x: Callable
    grad_y: Callable


def helmholtz_reference(kappa, xhat):
    """Exact Helmholtz field ``Y0(kappa * |x - xhat|)`` with its gradient.

    ``xhat`` must lie strictly outside the computational domain; the field
    is singular there. Uses ``d/dz Y0(z) = -Y1(z)``.
    """
    kappa = float(kappa)
    sx, sy = float(xhat[0]), float(xhat[1])

    def radius(x, y):
        r = np.hypot(np.asarray(x, dtype=float) - sx, np.asarray(y, dtype=float) - sy)
        if np.any(r == 0):
            raise ValueError(f"reference field is singular at its source point ({sx}, {sy})")
        return r

    def value(x, y):
        return bessel_y0(kappa * radius(x, y))

    def grad_x(x, y):
        r = radius(x, y)
        return -kappa * bessel_y1(kappa * r) * (np.asarray(x, dtype=float) - sx) / r

    def grad_y(x, y):
        r = radius(x, y)
        return -kappa * bessel_y1(kappa * r) * (np.asarray(y, dtype=float) - sy) / r

    return ReferenceSolution(value=value, grad_x=grad_x, grad_y=grad_y)


def kappa_from_ppw(n, p, ppw):
    """Wave-number for a target points-per-wavelength density.

    ``n`` is the leaf count per unit length and ``p`` the nodes per leaf
    axis, giving ``n (p-1)`` grid intervals per unit; ``kappa`` is chosen as
    ``2 pi n (p-1) / ppw``.
    """
    return 2.0 * math.pi * n * (p - 1) / ppw


@dataclass(frozen=True)
class ProblemInstance:
    """A fully parameterized boundary-value problem ready for the solver."""

    operator: EllipticOperator
    boundary_data: Callable
    reference: Optional[ReferenceSolution] = None


@dataclass(frozen=True)
class ProblemDef:
    """One of the built-in experiment setups.

    ``build`` produces a :class:`ProblemInstance` once the free parameters
    are fixed; ``kappa`` is meaningful only when ``has_wavenumber``.
    """

    name: str
    layout: str  # 'square' or 'lshape'
    extent: int  # domain side length in unit cells
    has_wavenumber: bool
    fixed_kappa: Optional[float]
    probe_interior: Optional[tuple]
    probe_boundary: Optional[tuple]
    _factory: Callable

    def build(self, kappa=None, convection=None):
        if self.fixed_kappa is not None and kappa is None:
            kappa = self.fixed_kappa
        if self.has_wavenumber and kappa is None:
            raise ValueError(f"problem '{self.name}' needs a wave-number (kappa or ppw)")
        return self._factory(kappa, convection)


def _bump_potential(x, y):
    s = np.sin(4.0 * np.pi * x) * np.sin(4.0 * np.pi * y)
    return s * s


def _oscillatory_boundary(x, y):
    return np.cos(8.0 * x) * (1.0 - 2.0 * y)


def _constant_factory(kappa, convection):
    ref = helmholtz_reference(kappa, (-0.2, 0.4))
    return ProblemInstance(
        operator=EllipticOperator.helmholtz(kappa),
        boundary_data=ref.value,
        reference=ref,
    )


def _bump_factory(kappa, convection):
    return ProblemInstance(
        operator=EllipticOperator.helmholtz(kappa, _bump_potential),
        boundary_data=_oscillatory_boundary,
    )


def _lshape_factory(kappa, convection):
    return ProblemInstance(
        operator=EllipticOperator.helmholtz(kappa),
        boundary_data=_oscillatory_boundary,
    )


def _convdiff_factory(kappa, convection):
    strength = 1000.0 if convection is None else float(convection)
    return ProblemInstance(
        operator=EllipticOperator.convection_diffusion(strength),
        boundary_data=lambda x, y: np.cos(x) * np.exp(y),
    )


def builtin_problems():
    """Catalog of the four built-in experiment families.

    ``constant``  Helmholtz on the unit square with boundary data from an
                  exact off-domain source field (known solution).
    ``bump``      Helmholtz, kappa = 80, with a smooth squared-sine
                  scattering potential; pointwise convergence probes.
    ``lshape``    Helmholtz, kappa = 40, on [0,2]^2 minus the top-right
                  unit square; the re-entrant corner limits accuracy.
    ``convdiff``  Convection-dominated ``-lap(u) - 1000 u_y = 0`` with a
                  sharp boundary layer.
    """
    return {
        "constant": ProblemDef(
            name="constant",
            layout="square",
            extent=1,
            has_wavenumber=True,
            fixed_kappa=None,
            probe_interior=None,
            probe_boundary=None,
            _factory=_constant_factory,
        ),
        "bump": ProblemDef(
            name="bump",
            layout="square",
            extent=1,
            has_wavenumber=True,
            fixed_kappa=80.0,
            probe_interior=(0.75, 0.25),
            probe_boundary=(0.75, 0.0),
            _factory=_bump_factory,
        ),
        "lshape": ProblemDef(
            name="lshape",
            layout="lshape",
            extent=2,
            has_wavenumber=True,
            fixed_kappa=40.0,
            probe_interior=(0.75, 0.75),
            probe_boundary=(1.25, 1.0),
            _factory=_lshape_factory,
        ),
        "convdiff": ProblemDef(
            name="convdiff",
            layout="square",
            extent=1,
            has_wavenumber=False,
            fixed_kappa=None,
            probe_interior=(0.75, 0.25),
            probe_boundary=(0.75, 0.0),
            _factory=_convdiff_factory,
        ),
    }
