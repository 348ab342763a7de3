"""Exception hierarchy shared across the library."""


class AndError(Exception):
    """Base class for all library errors."""


class ParseError(AndError):
    """A corpus file could not be parsed."""


class IntegrityError(AndError):
    """Corpus contents violate a structural invariant."""


class DimensionError(AndError):
    """Embedding vectors in one corpus disagree on length."""


class ConfigError(AndError):
    """Invalid or inconsistent configuration."""


class DegenerateSplitError(AndError):
    """Too few blocks to populate train/val/test splits."""


class SchemaMismatchError(AndError):
    """A model was applied to a feature layout it was not trained on."""
