"""Out-of-process next-token log-probability server and concept exporter."""

from .export import ConceptCollisionError, export_concept_table
from .models import HfCausalModel, StubUniformModel, load_model
from .server import Bridge, serve_http, serve_stdio
from .tokenizer import StubTokenizer, word_pieces

__version__ = "0.1.0"
