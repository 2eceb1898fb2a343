"""Exception hierarchy shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all homkit errors."""


# --- geometry ---

class ProjectiveDivergence(ToolkitError):
    """A point maps to (or too close to) the line at infinity."""


class DegenerateConfiguration(ToolkitError):
    """Correspondences are collinear/coincident; no unique homography."""


class NumericalFailure(ToolkitError):
    """A numerical routine (SVD, inversion, LM step) failed to produce a result."""


# --- synth ---

class ImageTooSmall(ToolkitError):
    """Image cannot host a patch with the requested size and margin."""


class DegenerateQuad(ToolkitError):
    """Perturbed corner quadrilateral is degenerate after all retries."""


# --- classical ---

class MarginViolation(ToolkitError):
    """Keypoint too close to the image border for descriptor extraction."""


class InsufficientCorrespondences(ToolkitError):
    """Fewer than four correspondences available for estimation."""


class NoModelFound(ToolkitError):
    """RANSAC found no sample with a minimal consensus set."""


class EstimationFailed(ToolkitError):
    """The classical pipeline could not produce a homography estimate."""


# --- nn ---

class ShapeMismatch(ToolkitError):
    """Tensor shapes are inconsistent with the kernel contract."""


class BadMagic(ToolkitError):
    """Weight file does not start with the expected magic bytes."""


class VersionUnsupported(ToolkitError):
    """Weight file version is not understood by this reader."""


class TruncatedFile(ToolkitError):
    """Weight file ends before the declared payload is complete."""


class DuplicateName(ToolkitError):
    """Weight file declares the same tensor name twice."""


class WeightManifestMismatch(ToolkitError):
    """Loaded weights do not match the model's expected tensor manifest."""


# --- harness / metrics ---

class DecodeError(ToolkitError):
    """Image file could not be decoded."""


class UnsupportedFormat(ToolkitError):
    """Image file format is not supported."""


class EmptyInput(ToolkitError):
    """An aggregate operation received no data."""


class SchemaError(ToolkitError):
    """CSV input does not match the expected schema."""
