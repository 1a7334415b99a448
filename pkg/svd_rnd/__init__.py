"""Out-of-distribution detection with SVD-blurred random network distillation."""

__version__ = "0.1.0"
