"""Exports classifier predictions over TTA policy views to the toolkit's
binary interchange formats."""

from .errors import ExporterError, ManifestMismatch, ModelLoadError
from .export import ExportJob, ExportResult, export
from .models import load_model
from .transforms import apply_manifest, apply_spec, read_manifest

__version__ = "0.1.0"

__all__ = [
    "ExportJob",
    "ExportResult",
    "ExporterError",
    "ManifestMismatch",
    "ModelLoadError",
    "apply_manifest",
    "apply_spec",
    "export",
    "load_model",
    "read_manifest",
]
