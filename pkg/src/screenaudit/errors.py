"""Exception types shared across the package."""


class ScreenAuditError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(ScreenAuditError):
    """Indicator schema is malformed or inconsistent with the data."""


class IngestionError(ScreenAuditError):
    """An input file cannot be parsed; message carries row/column coordinates."""


class ScoringError(ScreenAuditError):
    """The scoring pipeline cannot produce a well-defined result."""


class AnalysisError(ScreenAuditError):
    """A sensitivity/diagnostic computation is infeasible on the given inputs."""


class SearchError(ScreenAuditError):
    """Adversarial weight search failed to evaluate its objective."""


class EstimationError(ScreenAuditError):
    """A statistical estimate (discontinuity, matching, pooling) is undefined."""


class LedgerError(ScreenAuditError):
    """Funding ledger repair or attribution cannot proceed."""
