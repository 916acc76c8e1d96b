"""
Modelo de latência de execução e de comunicação.
"""

from .perf_model import (
    DEFAULT_STAGE_SPLITS,
    STAGES,
    LayerCostParams,
    LinkParams,
    PerfModel,
    batch_payload_bytes,
    default_attention_params,
    default_expert_params,
    default_inter_link,
    default_intra_link,
    default_sampler_params,
    exec_time,
    transfer_time,
)

__all__ = [
    'STAGES', 'DEFAULT_STAGE_SPLITS',
    'LayerCostParams', 'LinkParams', 'PerfModel',
    'exec_time', 'transfer_time', 'batch_payload_bytes',
    'default_attention_params', 'default_expert_params', 'default_sampler_params',
    'default_intra_link', 'default_inter_link',
]
