"""Convert BERT-family checkpoints into adec format and verify parity."""

from .convert import ExportError, ExportResult, ExportSpec, export, map_source
from .parity import ParityReport, diagnose, probe_id_batch, verify

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "ExportResult",
    "ExportSpec",
    "ParityReport",
    "diagnose",
    "export",
    "map_source",
    "probe_id_batch",
    "verify",
]
