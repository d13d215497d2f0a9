"""Exception types raised across the package."""


class ResonanceError(Exception):
    """Base class; every error carries the name of the failing check."""


class BranchCut(ResonanceError):
    pass


class OutOfDomain(ResonanceError):
    pass


class DegenerateSpacing(ResonanceError):
    pass


class PoleHit(ResonanceError):
    pass


class ConditioningRefused(ResonanceError):
    pass


class CountMismatch(ResonanceError):
    def __init__(self, msg, found=None, counted=None):
        super().__init__(msg)
        self.found = found
        self.counted = counted


class ValidityViolated(ResonanceError):
    pass


class ContourUnstable(ResonanceError):
    pass


class GridTooCoarse(ResonanceError):
    pass


class BandEdge(ResonanceError):
    pass


class AuxBoxTooSmall(ResonanceError):
    pass


class ValidityZone(ResonanceError):
    pass


class TooFewRealizations(ResonanceError):
    pass


class ConfigInvalid(ResonanceError):
    def __init__(self, msg, field=None):
        super().__init__(msg if field is None else f"{field}: {msg}")
        self.field = field


class NearDip(UserWarning):
    pass


class ScaleViolation(UserWarning):
    pass
