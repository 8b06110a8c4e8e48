"""Multi-foreground co-saliency dataset synthesis, curation, and evaluation."""

__version__ = "0.1.0"
