"""Exception types shared across the package."""


class EllipticityError(ValueError):
    """Leading-order coefficients fail the ellipticity test at a grid node."""

    def __init__(self, point, det, c11):
        self.point = tuple(point)
        self.det = float(det)
        self.c11 = float(c11)
        super().__init__(
            f"operator not elliptic at x={self.point}: "
            f"c11={self.c11:.6g}, c11*c22 - c12^2={self.det:.6g}"
        )


class NonFiniteCoefficientError(ValueError):
    """A coefficient field evaluated to NaN or infinity."""


class ResonanceError(RuntimeError):
    """Base class for near-singular operator blocks detected during factorization.

    The reciprocal condition estimate of the inverted block fell below the
    configured threshold, meaning the interior Dirichlet problem on some box
    is at (or numerically indistinguishable from) a resonance.
    """

    def __init__(self, node_id, rcond, threshold):
        self.node_id = node_id
        self.rcond = float(rcond)
        self.threshold = float(threshold)
        super().__init__(
            f"{self.describe()} at tree node {node_id}: "
            f"rcond={self.rcond:.3e} < threshold {self.threshold:.3e}"
        )

    def describe(self):
        return "near-resonant block"


class ResonantLeafError(ResonanceError):
    def describe(self):
        return "near-singular interior collocation block"


class ResonantMergeError(ResonanceError):
    def describe(self):
        return "near-singular interface coupling block"


class UndecomposableLayoutError(ValueError):
    """The cell layout cannot be recursively bisected into connected halves."""


class InconsistentChildrenError(ValueError):
    """Shared boundary nodes of two siblings disagree with the split geometry."""


class UnsupportedLayoutError(ValueError):
    """Requested feature is only available on rectangular (all-occupied) layouts."""


class ProbeOffMeshError(ValueError):
    """A probe point does not coincide with a mesh node and snapping is off."""
