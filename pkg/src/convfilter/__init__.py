"""Speaker-aware utterance classification and classifier-filtered concept extraction."""

__version__ = "0.1.0"
