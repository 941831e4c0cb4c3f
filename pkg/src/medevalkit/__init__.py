"""Preprocessing, prompting and scoring toolkit for multimodal medical model evaluation."""
__version__ = "0.1.0"
