"""Error taxonomy shared by all services."""


class NilSpectraError(Exception):
    """Base class for every error raised by the toolkit."""


class DeterminantError(NilSpectraError):
    """The integer matrix does not have determinant one."""


class NotHyperbolicError(NilSpectraError):
    """The matrix trace does not give a hyperbolic pair of eigenvalues."""


class OrientationError(NilSpectraError):
    """The eigenvalues are negative (trace <= -3)."""


class InvalidTruncation(NilSpectraError):
    """Lattice-sum truncation radius is too small."""


class SectorMismatch(NilSpectraError):
    """Two sector functions live in different sectors or lattices."""


class IllConditioned(NilSpectraError):
    """The Hankel data carries no signal."""


class TooShort(NilSpectraError):
    """The correlation series is too short for a pencil fit."""


class QuadratureNotConverged(NilSpectraError):
    """Order doubling did not reach the requested tolerance."""


class ConfigError(NilSpectraError):
    """Experiment file could not be parsed or validated."""


class ArtifactError(NilSpectraError):
    """An artifact on disk is missing or malformed."""


class PrecisionWarning(UserWarning):
    """A computation ran past the range where its precision is guaranteed."""
