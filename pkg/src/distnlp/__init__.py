"""Map-only distributed text simplification over a replicated block store."""

from .store import Block, BlockManifest, CorpusStore, StoreConfig, place_replicas, split_file
from .simplifier import SimplifierConfig, default_config, simplify_line, stem, tokenize

__version__ = "0.1.0"

__all__ = [
    "Block",
    "BlockManifest",
    "CorpusStore",
    "SimplifierConfig",
    "StoreConfig",
    "default_config",
    "place_replicas",
    "simplify_line",
    "split_file",
    "stem",
    "tokenize",
]
