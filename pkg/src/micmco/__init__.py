"""
micmco
Mutual-information augmented Monte-Carlo objectives for latent variable models
"""

from .errors import MicmcoError

__version__ = "1.0.0"

__all__ = ["MicmcoError", "__version__"]
