"""Core modules for nevo_gspt."""

from .logging import setup_logger, get_logger
from .exceptions import NevoError, ConfigurationError, IngestionError
from .base_experiment import BaseExperiment, Variant

__all__ = [
    'setup_logger', 'get_logger', 'NevoError', 'ConfigurationError', 'IngestionError',
    'BaseExperiment', 'Variant',
]
