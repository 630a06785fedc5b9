"""Offline embedding exporter for claim-graph node texts.

Reads the node-text JSONL the graph stage emits, encodes each unique text,
and writes a FLANEMB1 table keyed by the 64-bit FNV-1a hash of the UTF-8
text.  The hash must match the consumer byte-for-byte; the committed test
vectors pin that contract.
"""

__version__ = "0.1.0"

from .hashing import fnv1a_64, text_key  # noqa: F401
from .encoders import EncoderUnavailable, get_encoder  # noqa: F401
from .writer import write_flanemb  # noqa: F401
from .export import ExportJob, export  # noqa: F401
