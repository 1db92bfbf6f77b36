"""Cluster job-scheduling simulator and policy-gradient training workbench."""

__version__ = "0.1.0"

from .backend import active_backend

__all__ = ["active_backend", "__version__"]
