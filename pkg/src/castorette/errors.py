"""Exception types shared across the platform.

Every store / engine raises subclasses of CastoretteError so the service
layer can map them to structured API errors uniformly.
"""


class CastoretteError(Exception):
    """Base class for all platform errors."""

    #: HTTP status the service layer maps this error family to.
    http_status = 400


# --- context store ---------------------------------------------------------

class UnknownEntityType(CastoretteError):
    http_status = 404


class UnknownSignalType(CastoretteError):
    http_status = 404


class NotFound(CastoretteError):
    http_status = 404


class Ambiguous(CastoretteError):
    http_status = 409


class CycleError(CastoretteError):
    http_status = 409


class SelfEdge(CastoretteError):
    http_status = 400


# --- time series store -----------------------------------------------------

class UnknownContext(CastoretteError):
    http_status = 404


class UnsortedInput(CastoretteError):
    pass


class NonFiniteValue(CastoretteError):
    pass


# --- model store -----------------------------------------------------------

class ValidationError(CastoretteError):
    """Invalid input; carries step-level diagnostics when they exist."""

    http_status = 422

    def __init__(self, message, diagnostics=None):
        # diagnostics: list of {"step": ..., "message": ...}
        self.diagnostics = list(diagnostics) if diagnostics else []
        super().__init__(message)


class UnknownModel(CastoretteError):
    http_status = 404


class CorruptParams(CastoretteError):
    pass


# --- bus -------------------------------------------------------------------

class NoHandler(CastoretteError):
    http_status = 503


class BusTimeout(CastoretteError):
    http_status = 504


# --- scheduler -------------------------------------------------------------

class StoreUnavailable(CastoretteError):
    http_status = 503


# --- transform -------------------------------------------------------------

class TooShort(CastoretteError):
    pass


class InsufficientData(CastoretteError):
    """Anomaly removal would leave less data than the configured floor."""


class MissingCovariate(CastoretteError):
    http_status = 404


class MisalignedTimestamps(CastoretteError):
    pass


# --- additive model engine -------------------------------------------------

class DegenerateFeature(CastoretteError):
    pass


class SingularSystem(CastoretteError):
    pass


class NonConvergence(CastoretteError):
    pass


class MissingFeature(CastoretteError):
    http_status = 404


# --- service ---------------------------------------------------------------

class MalformedRow(CastoretteError):
    def __init__(self, row_number, message):
        self.row_number = row_number
        super().__init__(f"row {row_number}: {message}")


class MethodNotAllowed(CastoretteError):
    http_status = 405
