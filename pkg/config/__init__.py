"""Configuration package for the simulation framework."""
from .settings import settings

__all__ = ["settings"]
