"""Exception taxonomy shared across the toolkit."""


class TTAError(Exception):
    """Base class for all toolkit errors."""


class InvariantViolation(TTAError):
    """Data violates a type invariant (bad shape, bad row sums, ...)."""


class NonFiniteInput(InvariantViolation):
    """Input contains NaN or Inf where finite values are required."""


class EmptyVector(TTAError):
    """An operation received a zero-length vector."""


class DimensionMismatch(TTAError):
    """Shapes of weights, predictions, or labels do not agree."""


class LengthMismatch(TTAError):
    """Paired sequences have different lengths."""


class WrongKind(TTAError):
    """A prediction tensor has the wrong score kind for this operation."""


# augmentation engine

class UnknownTransform(TTAError):
    """Transform name is not in the registry."""


class GeometryError(TTAError):
    """A crop or scale does not fit inside the image bounds."""


class InvalidCropSize(TTAError):
    """Requested crop does not fit the policy's source geometry."""


class ManifestError(TTAError):
    """A policy manifest file is malformed."""


# training and baselines

class EmptyTrainingSet(TTAError):
    """Training requires at least one labeled example."""


class EmptySelectionPool(TTAError):
    """Greedy search has no augmentations to choose from."""


# file formats

class BadMagic(TTAError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersion(TTAError):
    """File format version is not supported by this reader."""


class UnsupportedMode(TTAError):
    """Weights file carries an unknown mode byte."""


class TruncatedFile(TTAError):
    """File ends before the declared payload is complete."""


class LabelOutOfRange(TTAError):
    """A label is outside [0, class_count)."""


class NegativeWeight(TTAError):
    """Weights file contains a negative entry."""


class EmptySet(TTAError):
    """A file declares zero records."""


# dataset splitting

class DegenerateSplit(TTAError):
    """A split fraction is positive but would receive no indices."""


class NonMonotoneIncrements(TTAError):
    """Subsample increments must be ascending within [0, 1]."""


# metrics

class DegenerateVariance(TTAError):
    """Paired differences have zero sample variance; t is undefined."""


class EmptySubsample(TTAError):
    """Requested subsample fraction yields zero elements."""
