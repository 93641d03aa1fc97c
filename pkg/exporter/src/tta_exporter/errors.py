"""Exporter error types."""


class ExporterError(Exception):
    """Base class for exporter failures."""


class ModelLoadError(ExporterError):
    """The requested model could not be constructed or loaded."""


class ManifestMismatch(ExporterError):
    """The policy manifest names a transform this exporter cannot run."""
