"""Random-kernel time series classification with evolutionary kernel pruning."""

__version__ = "0.1.0"

from .errors import SRocketError

__all__ = ["SRocketError", "__version__"]
