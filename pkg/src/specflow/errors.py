"""Exception hierarchy.

Every failure carries a ``details`` dict so the CLI can emit it as a
machine-readable diagnostic.
"""


class SpecflowError(Exception):
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def as_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        out.update(self.details)
        return out


class MeshError(SpecflowError):
    pass


class FamilyError(SpecflowError):
    pass


class NonHermitianError(FamilyError):
    pass


class MatchingAmbiguityError(FamilyError):
    pass


class LoopInconsistencyError(FamilyError):
    pass


class CoverError(SpecflowError):
    pass


class GapViolationError(CoverError):
    pass


class CocycleError(SpecflowError):
    pass


class SectionError(SpecflowError):
    pass


class DeformationError(SpecflowError):
    pass


class ChernObstructionError(DeformationError):
    """The selected subbundle carries a nonzero Chern number over the
    boundary sphere, so no global frame over the ball exists."""


class InconsistencyError(SpecflowError):
    pass
