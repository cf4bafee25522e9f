"""Exception types shared across the toolkit.

Plain ``ValueError`` is raised for malformed in-memory arguments (shape or
dtype violations, bad labels); the classes below cover file, configuration,
and training failures so the CLI can map them onto stable exit codes.
"""


class CuneoError(Exception):
    """Base class for toolkit errors."""


class ConfigError(CuneoError):
    """Invalid configuration: unknown keys, bad values, inconsistent specs."""


class FormatError(CuneoError):
    """A file's contents do not match its declared format."""


class CatalogError(CuneoError):
    """A class-catalog manifest is unusable (missing image, duplicate name)."""


class LexiconError(CuneoError):
    """A lexicon file is unusable (duplicate entry, unknown sign)."""


class TrainingError(CuneoError):
    """Training diverged (non-finite loss or gradients)."""


class VerificationError(CuneoError):
    """A developer verification check (gradient check) failed."""
