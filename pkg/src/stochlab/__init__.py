"""stochlab: interacting diffusions, determinantal kernels, and Loewner
evolution, with exact formulas cross-checked against simulation."""

from .core_numerics import DomainError, NumericError, RngStream, StochlabError

__version__ = "0.1.0"

__all__ = ["DomainError", "NumericError", "RngStream", "StochlabError", "__version__"]
