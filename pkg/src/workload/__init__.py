"""
Geração de carga: chegadas, roteamento de experts e admissão no coordenador.
"""

from .arrivals import (
    WORKLOAD_PRESETS,
    Arrival,
    WorkloadSpec,
    gen_arrivals,
    validate_workload,
)
from .load_balancer import LoadBalancer, assign_dp_rank
from .routing import (
    ExpertRouter,
    RoutingChoice,
    SkewKind,
    SkewSpec,
    expert_probs,
    route_batch,
    route_token,
)

__all__ = [
    # Chegadas
    'WORKLOAD_PRESETS', 'Arrival', 'WorkloadSpec', 'gen_arrivals', 'validate_workload',
    # Roteamento
    'SkewKind', 'SkewSpec', 'RoutingChoice', 'ExpertRouter',
    'expert_probs', 'route_token', 'route_batch',
    # Admissão
    'LoadBalancer', 'assign_dp_rank',
]
