"""Exception hierarchy shared by every module.

All errors derive from :class:`EMSError`. The CLI maps :class:`DataError`
subclasses to exit code 2.
"""


class EMSError(Exception):
    pass


class DataError(EMSError):
    """Input data is inconsistent with the contract of an operation."""


# graph model
class DuplicateIdError(DataError):
    pass


class MissingEndpointError(DataError):
    pass


class UnknownNodeError(DataError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidLabelError(DataError):
    pass


class CycleError(DataError):
    pass


class DegenerateGeometryError(DataError):
    pass


# s-expressions
class SExprError(DataError):
    """Base class for s-expression errors."""


class SExprSyntaxError(SExprError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class ArityError(SExprError):
    pass


class UnknownDescriptorError(SExprError):
    pass


class UnsupportedOrError(SExprError):
    pass


class NoTemplateMatchError(SExprError):
    pass


class UnresolvableLandmarkError(SExprError):
    pass


# pdf synthesis
class ZeroMassError(DataError):
    pass


class MissingOrientationError(DataError):
    pass


class ContradictionError(DataError):
    pass


class DomainMismatchError(DataError):
    pass


# index
class GridSideError(DataError):
    pass


class OutOfBoundsError(DataError):
    pass


# disambiguation
class DivergenceError(DataError):
    pass


class NonSymmetricError(DataError):
    pass


class NoChoiceNodesError(DataError):
    pass


# analytics
class UnboundConceptError(DataError):
    pass


# store / ingest
class StoreError(DataError):
    pass
