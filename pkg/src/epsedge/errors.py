"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map it without a lookup
table: 3 for bad data, 4 for degenerate inputs.
"""


class EpsError(Exception):
    exit_code = 3


class InvalidInput(EpsError):
    pass


class FormatError(EpsError):
    pass


class ShapeError(EpsError):
    pass


class CorruptDataset(EpsError):
    pass


class PlacementError(EpsError):
    pass


class FrameError(EpsError):
    pass


class InvalidThickness(EpsError):
    exit_code = 2


class DegenerateInput(EpsError):
    exit_code = 4


class EmptySourceSet(DegenerateInput):
    pass


class EmptyGT(DegenerateInput):
    pass


class NoEdgePixels(DegenerateInput):
    pass


class DegeneratePrediction(DegenerateInput):
    pass


class EmptyRay(DegenerateInput):
    pass


class DegenerateRegion(DegenerateInput):
    pass


class EmptyBoundary(DegenerateInput):
    pass


class EmptyTarget(DegenerateInput):
    pass


class EmptyEvaluation(DegenerateInput):
    pass
