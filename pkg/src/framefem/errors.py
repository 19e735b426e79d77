"""Exception hierarchy shared by all framefem modules."""


class FrameFEMError(Exception):
    """Base class for every error raised by framefem."""


class NumericalFailure(FrameFEMError):
    """A computation ran but did not produce a trustworthy answer."""


# mesh
class MeshError(FrameFEMError, ValueError):
    pass


class DegenerateCell(MeshError):
    pass


class NonConforming(MeshError):
    pass


class IndexOutOfRange(FrameFEMError, IndexError):
    pass


class UnsupportedKind(MeshError):
    pass


class UnknownSubsimplex(FrameFEMError, KeyError):
    pass


class PointOutsideMesh(FrameFEMError, ValueError):
    pass


# polylib
class InvalidParameters(FrameFEMError, ValueError):
    pass


class InvalidDimensions(FrameFEMError, ValueError):
    pass


class PointOutsideSimplex(FrameFEMError, ValueError):
    pass


class UnsupportedDegree(FrameFEMError, ValueError):
    pass


# framespace
class InvalidIndex(FrameFEMError, IndexError):
    pass


class CellMismatch(FrameFEMError, ValueError):
    pass


class DegenerateProbe(NumericalFailure):
    pass


class UnsupportedMesh(FrameFEMError, ValueError):
    pass


# assembly
class QuadratureTooWeak(FrameFEMError, ValueError):
    pass


class DimensionMismatch(FrameFEMError, ValueError):
    pass


# spectral
class NoConvergence(NumericalFailure):
    pass


class GapTooSmall(NumericalFailure):
    pass


class MNotDefinite(NumericalFailure):
    pass


# solver
class MaxIterations(NumericalFailure):
    pass


class InconsistentRHS(NumericalFailure):
    pass


class SingularLocalBlock(NumericalFailure):
    pass


# cli
class DegreeCapExceeded(FrameFEMError, ValueError):
    pass
