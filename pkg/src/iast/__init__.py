"""Desk-scale text spotting core: reading-order estimation over closed
boundaries, iterative boundary refinement, dynamic thin-plate-spline feature
sampling, and a compact recognizer, all on a from-scratch reverse-mode
autodiff engine."""

from .model import Model, ModelConfig

__version__ = "0.1.0"
__all__ = ["Model", "ModelConfig", "__version__"]
