"""Configuration package for nevo_gspt."""

from .settings import Settings

__all__ = ['Settings']
