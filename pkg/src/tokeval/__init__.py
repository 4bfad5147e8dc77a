"""Fit byte-level BPE tokenizers and estimate their downstream impact."""
__version__ = "0.1.0"

from .bpe import TokenizerModel, load_model, save_model, train
from .corpus import Corpus, load_corpus, word_count
from .pretokenize import PreTokenizerSpec, get_spec, pretokenize

__all__ = [
    "Corpus", "PreTokenizerSpec", "TokenizerModel", "get_spec", "load_corpus",
    "load_model", "pretokenize", "save_model", "train", "word_count",
]
