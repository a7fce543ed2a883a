"""
Configuration Module
Environment-level settings for the Muskat simulator (output root, logging, parallelism)
"""
import os
import logging
from typing import Dict, Any

from shared.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


class Config:
    """Configuration management class"""

    def __init__(self):
        self._config = self._load_config()
        self._validate_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from environment variables"""
        try:
            return {
                # Output Configuration
                'output_root': os.environ.get('MUSKAT_OUTPUT_ROOT', 'runs'),

                # Logging Configuration
                'log_level': os.environ.get('LOG_LEVEL', 'INFO').upper(),

                # Quadrature Configuration
                'workers': int(os.environ.get('MUSKAT_WORKERS', 1)),
                'block_size': int(os.environ.get('MUSKAT_BLOCK_SIZE', 64)),
            }
        except ValueError as e:
            raise ConfigurationError(f"Invalid numeric environment variable: {e}") from e

    def _validate_config(self):
        """Validate configuration values"""
        if self._config['log_level'] not in LOG_LEVELS:
            raise ConfigurationError(f"LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")

        if self._config['workers'] < 1:
            raise ConfigurationError("MUSKAT_WORKERS must be positive")

        if self._config['block_size'] < 1:
            raise ConfigurationError("MUSKAT_BLOCK_SIZE must be positive")

        logger.debug("Configuration validation completed successfully")

    def get_output_root(self) -> str:
        """Get root directory for run outputs"""
        return self._config['output_root']

    def get_log_level(self) -> str:
        """Get logging level name"""
        return self._config['log_level']

    def get_quadrature_defaults(self) -> Dict[str, int]:
        """Get default alpha-quadrature parallelism"""
        return {
            'workers': self._config['workers'],
            'block_size': self._config['block_size'],
        }

    def to_dict(self) -> Dict[str, Any]:
        """Get configuration as dictionary"""
        return dict(self._config)

