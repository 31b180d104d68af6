"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
TrainingError -> 4.
"""


class SmishfuseError(Exception):
    pass


class ConfigError(SmishfuseError):
    pass


class DataError(SmishfuseError):
    pass


class UnmappedLabelError(DataError):
    """A source label has no entry in the label map for its dataset."""


class TrainingError(SmishfuseError):
    pass


class EncoderUnavailableError(SmishfuseError):
    """The configured contextual encoder cannot be constructed.

    Callers should either install/download the requested encoder or switch the
    run config to the built-in deterministic encoder (``encoder_id`` starting
    with ``"hash"``), which has no external dependencies.
    """


class BundleError(DataError):
    """A model bundle is missing, corrupt, or version-incompatible."""
