"""Domain-adversarial semantic frame tagging at desk scale.

A bidirectional GRU BIO tagger over rich categorical features,
regularized during training by a gradient-reversal domain classifier
whose domain labels come from unsupervised clustering of averaged word
embeddings; frame hypotheses are produced by coherence filtering plus
exact constrained decoding with a precision/recall offset, and scored
by cumulative target/frame/argument metrics.
"""

__version__ = "0.1.0"

from . import adversary, clustering, corpus, decoder, generate, metrics, numerics, tagger

__all__ = [
    "adversary",
    "clustering",
    "corpus",
    "decoder",
    "generate",
    "metrics",
    "numerics",
    "tagger",
    "__version__",
]
