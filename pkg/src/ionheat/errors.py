"""Exception types.

Each exception carries a short ``category`` string used by the CLI to report
machine-readable failures.
"""


class IonHeatError(ValueError):
    category = "invalid-input"


class ModelValidityError(IonHeatError):
    """Inputs fall outside the domain where a model formula holds."""

    category = "model-validity"


class SaturatedRatioError(ModelValidityError):
    """Red/blue sideband ratio at or above one.

    An unphysical thermal ratio usually points at collision-dominated or
    otherwise non-thermal data; see :mod:`ionheat.collisions`.
    """

    category = "saturated-ratio"


class CutoffError(ModelValidityError):
    category = "fock-cutoff"


class FitError(IonHeatError):
    category = "fit-failure"

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(FitError):
    category = "non-convergence"


class RankDeficiencyError(FitError):
    category = "rank-deficient"


class SchemaError(IonHeatError):
    """Malformed input file or configuration document."""

    category = "schema"
