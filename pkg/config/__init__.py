"""
Configuração do simulador.
"""

from .settings import (
    DEFAULT_CONFIG_PATH,
    Settings,
    configure_logging,
    load_settings,
)

__all__ = ['DEFAULT_CONFIG_PATH', 'Settings', 'configure_logging', 'load_settings']
