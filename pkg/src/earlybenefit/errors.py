"""Exception taxonomy shared by all modules.

The CLI maps these onto exit codes: usage errors exit 2, data-format errors
exit 3, persistence errors exit 4, everything else that is raised during a
run exits 1.
"""


class EarlyBenefitError(Exception):
    """Base class for all package errors."""


class DataFormatError(EarlyBenefitError):
    """Malformed input file (ragged row, bad cell, inconsistent dimension)."""


class UnrecoverableInstanceError(DataFormatError):
    """A series instance cannot be preprocessed (all-missing channel, trimmed empty)."""


class PersistenceError(EarlyBenefitError):
    """Bundle/model file cannot be read back (version, checksum, structure)."""


class TrainingError(EarlyBenefitError):
    """Training diverged or could not proceed."""


class NumericError(EarlyBenefitError):
    """Non-finite value encountered in a numeric kernel."""


class ConfigError(EarlyBenefitError):
    """Inconsistent configuration (e.g. bundle/policy mode mismatch)."""


class StreamStateError(EarlyBenefitError):
    """Stream engine used out of protocol (observe after finalize, premature finalize)."""
