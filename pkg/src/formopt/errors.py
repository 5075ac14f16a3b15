"""Exception hierarchy shared across the package.

Every error raised by formopt derives from :class:`FormoptError`, so callers
(CLI, HTTP service) can map library failures to user errors in one place.
"""


class FormoptError(Exception):
    """Base class for all formopt errors."""


# -- encoding ----------------------------------------------------------------

class UnknownFactor(FormoptError):
    """A factor name is missing from, or not defined in, the schema."""


class LevelNotInSchema(FormoptError):
    """A supplied value is not an exact member of the factor's level list."""


class InvalidCode(FormoptError):
    """A bit pattern has no corresponding factor level (gap code or bad one-hot)."""


class LengthMismatch(FormoptError):
    """Bit vector length disagrees with the expected bit count."""


# -- qubo --------------------------------------------------------------------

class IndexOutOfRange(FormoptError):
    """Bit index outside [0, n)."""


class ParseError(FormoptError):
    """A serialized artifact could not be parsed."""


class VersionMismatch(FormoptError):
    """A serialized artifact carries an unsupported format version."""


# -- annealer ----------------------------------------------------------------

class Exhausted(FormoptError):
    """Every state visited by every restart was excluded."""


class TooLarge(FormoptError):
    """Problem size exceeds the exhaustive-enumeration guard."""


class DegenerateDepth(FormoptError):
    """Per-draw failure probability indistinguishable from 1."""


class ZeroVariance(FormoptError):
    """Sampled energies have no spread; depth is undefined."""


# -- fitting -----------------------------------------------------------------

class EmptyDataset(FormoptError):
    """Operation requires at least one observation."""


class NoRealData(FormoptError):
    """Operation requires at least one real (measured) observation."""


class DimensionMismatch(FormoptError):
    """Model size disagrees with the dataset or schema."""


class NonFinite(FormoptError):
    """A cost or coefficient became non-finite during optimization."""


# -- augmentation ------------------------------------------------------------

class SpaceExhausted(FormoptError):
    """Fewer free states remain than augmented samples requested."""


# -- campaign ----------------------------------------------------------------

class NoSeedData(FormoptError):
    """A campaign needs at least one seed observation."""


class WrongState(FormoptError):
    """Operation not permitted in the campaign's current state."""


class BitsMismatch(FormoptError):
    """Recorded bits differ from the pending suggestion."""


class NonFiniteAin(FormoptError):
    """A measured value must be finite."""


class Terminated(FormoptError):
    """The campaign reached its stop condition: the solver has no untested
    candidate and every single-flip neighbor of the best recipe is tested."""


class BadParams(FormoptError):
    """Invalid oracle or configuration parameters."""
