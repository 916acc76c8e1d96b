"""
Modelo central
Tipos de domínio compartilhados, posicionamento de camadas e validação de configuração.
"""

from .exceptions import (
    SimulationError, ConfigurationError, RoutingFault, UnknownRequestError,
    KVCapacityError, DeadlockError
)
from .schemas import (
    NS_PER_S, NS_PER_MS, COORDINATOR,
    LayerKind, LayerId, ModelConfig, ClusterConfig, TokenMeta, RequestState,
    enumerate_layers
)
from .placement import default_placement, resolve_node_of, build_cluster
from .validation_system import (
    ValidationSeverity, ValidationRule, ValidationIssue, ValidationReport,
    ConfigValidator, validate_config
)

__all__ = [
    # Exceções
    'SimulationError', 'ConfigurationError', 'RoutingFault', 'UnknownRequestError',
    'KVCapacityError', 'DeadlockError',

    # Tipos de domínio
    'NS_PER_S', 'NS_PER_MS', 'COORDINATOR',
    'LayerKind', 'LayerId', 'ModelConfig', 'ClusterConfig', 'TokenMeta', 'RequestState',
    'enumerate_layers',

    # Posicionamento
    'default_placement', 'resolve_node_of', 'build_cluster',

    # Validação
    'ValidationSeverity', 'ValidationRule', 'ValidationIssue', 'ValidationReport',
    'ConfigValidator', 'validate_config'
]
