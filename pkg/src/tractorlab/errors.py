"""Exception types shared across the package."""


class TractorLabError(Exception):
    """Base class for all package-specific errors."""


# --- jet arithmetic ---------------------------------------------------------


class ShapeMismatch(TractorLabError):
    """Jets with different (nvars, order) were combined."""


class DomainError(TractorLabError):
    """An analytic primitive was evaluated outside its domain."""


class OrderExceeded(TractorLabError):
    """A derivative beyond the stored truncation order was requested."""


# --- expression front end ---------------------------------------------------


class ExprSyntaxError(TractorLabError):
    """Malformed expression text, annotated with the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.message = message
        self.position = position


class UnknownFunction(ExprSyntaxError):
    pass


class UnboundVariable(TractorLabError):
    """An expression variable is neither a chart coordinate nor a parameter."""


# --- metric geometry --------------------------------------------------------


class SingularMetric(TractorLabError):
    """The metric is not invertible at the evaluation point."""


class NonpositiveFactor(TractorLabError):
    """A conformal factor was nonpositive where positivity is required."""


# --- tractor calculus -------------------------------------------------------


class ScaleMismatch(TractorLabError):
    """Tractor operands live over different reference geometries."""


class NonpositiveScale(TractorLabError):
    """A scale density was nonpositive at an evaluation point."""


class DegenerateNormal(TractorLabError):
    """No well-defined unit conormal at the requested point."""


class StepFailure(TractorLabError):
    """Parallel transport could not reach the requested tolerance."""


# --- singular Yamabe expansion ---------------------------------------------


class NonpositiveS(TractorLabError):
    """The squared scale tractor is nonpositive on the working set."""


class ObstructionOrder(TractorLabError):
    """The improvement step at the obstructed order was requested."""


class OrderNotMet(TractorLabError):
    """The input density does not vanish to the order the step assumes."""


class FitFailure(TractorLabError):
    """A normal-ray power-law fit was ill-conditioned."""


# --- hypersurfaces ----------------------------------------------------------


class DegenerateJacobian(TractorLabError):
    """The embedding map drops rank at the requested parameter point."""


class MissingDefiningDensity(TractorLabError):
    """An operation requiring a defining density found none attached."""


class DimensionTooLow(TractorLabError):
    """The ambient dimension is below the formula's range of validity."""


class GridTooCoarse(TractorLabError):
    """Quadrature refinement failed to converge at the stated tolerance."""


class WrongDimension(TractorLabError):
    """An energy was requested in a dimension where it is not defined."""


class MissingEulerCharacteristic(TractorLabError):
    """No Euler characteristic available and quadrature fallback disabled."""


# --- models and CLI ---------------------------------------------------------


class UnknownModel(TractorLabError):
    pass


class BadParameters(TractorLabError):
    pass


class NotHomogeneous(TractorLabError):
    """A cone-formula input fails the degree-one homogeneity check."""


class OffCone(TractorLabError):
    """A cone-formula input point does not lie on the null cone section."""


class SpecFileError(TractorLabError):
    """A geometry-spec file violates the documented format."""
