"""Semi-implicit simulation lab for p-Laplace SPDEs driven by Wiener and Levy noise."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
