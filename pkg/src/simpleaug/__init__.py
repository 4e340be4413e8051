"""Rule-based augmentation of VQA training data from implicit dataset knowledge."""

__version__ = "0.1.0"
