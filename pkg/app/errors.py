"""
Exception hierarchy for CarbonShift.

The CLI maps each branch to an exit code (see app/main.py).
"""


class CarbonShiftError(Exception):
    """Base class for every error raised by the package."""


# ---------------------------------------------------------------------------
# Network ingestion
# ---------------------------------------------------------------------------


class NetworkError(CarbonShiftError):
    """Raised when network data cannot be turned into a valid Network."""


class NetworkFileMissingError(NetworkError):
    pass


class NetworkSchemaError(NetworkError):
    pass


class DanglingReferenceError(NetworkError):
    """A generator, load or line points at a bus that does not exist."""


class DisconnectedNetworkError(NetworkError):
    pass


class UnknownBusError(NetworkError):
    pass


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


class SolverError(CarbonShiftError):
    """Raised when a linear program cannot be solved to a basic optimum."""


class InfeasibleError(SolverError):
    pass


class UnboundedError(SolverError):
    pass


class NumericalError(SolverError):
    """Singular or ill-conditioned basis, rank-deficient equalities, iteration cap."""


# ---------------------------------------------------------------------------
# Configuration, emissions and reporting
# ---------------------------------------------------------------------------


class ConfigError(CarbonShiftError):
    pass


class EmissionsError(CarbonShiftError):
    pass


class ZeroGenerationRegionError(EmissionsError):
    """Average emissions are undefined for regions without generation."""

    def __init__(self, regions: list[int]):
        self.regions = sorted(regions)
        super().__init__(f"No generation in region(s) {self.regions}; average emissions undefined")


class ReportError(CarbonShiftError):
    pass


class MissingCellError(ReportError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__(f"Report is missing cells: {', '.join(missing)}")
