"""
Posicionamento de camadas
Desagrega atenção e experts e coloca cada tipo de camada em todos os blocos do mesmo GPU.
"""

import logging
from typing import Dict, List, Optional

from .exceptions import ConfigurationError
from .schemas import ClusterConfig, LayerId, ModelConfig

logger = logging.getLogger(__name__)


def default_placement(model: ModelConfig, cluster: ClusterConfig) -> Dict[LayerId, int]:
    """
    Posicionamento padrão.

    Expert(b, e) vai para o expert GPU (e mod expert_gpus), em todos os blocos.
    Atenção(b, r) e Sampler(r) vão para o GPU de atenção r.

    Args:
        model: Forma do modelo
        cluster: Forma do cluster (placement existente é ignorado)

    Returns:
        Mapa LayerId -> índice global de GPU
    """
    if cluster.attention_gpus <= 0:
        raise ConfigurationError("cluster.attention_gpus", "precisa ser >= 1")
    if cluster.expert_gpus <= 0:
        raise ConfigurationError("cluster.expert_gpus", "precisa ser >= 1")

    placement: Dict[LayerId, int] = {}
    for block in range(model.num_blocks):
        for rank in range(cluster.attention_gpus):
            placement[LayerId.attention(block, rank)] = cluster.attention_gpu(rank)
        for expert in range(model.num_experts):
            placement[LayerId.expert(block, expert)] = cluster.expert_gpu(
                expert % cluster.expert_gpus
            )
    for rank in range(cluster.attention_gpus):
        placement[LayerId.sampler(rank, model.num_blocks)] = cluster.attention_gpu(rank)

    if model.num_experts > cluster.expert_gpus:
        logger.info(
            f"{model.num_experts} experts em {cluster.expert_gpus} GPUs: "
            f"colocação round-robin de até {-(-model.num_experts // cluster.expert_gpus)} por GPU"
        )
    return placement


def resolve_node_of(num_gpus: int, gpus_per_node: int,
                    explicit: Optional[List[int]] = None) -> List[int]:
    """Mapa GPU -> nó. Uma lista explícita tem precedência sobre gpus_per_node."""
    if explicit:
        if len(explicit) != num_gpus:
            raise ConfigurationError(
                "cluster.node_of", f"esperado {num_gpus} entradas, recebido {len(explicit)}"
            )
        return list(explicit)
    if gpus_per_node <= 0:
        raise ConfigurationError("cluster.gpus_per_node", "precisa ser >= 1")
    return [gpu // gpus_per_node for gpu in range(num_gpus)]


def build_cluster(model: ModelConfig, attention_gpus: int, expert_gpus: int,
                  kv_slots_per_attention_gpu: int, gpus_per_node: int = 8,
                  node_of: Optional[List[int]] = None) -> ClusterConfig:
    """Monta um ClusterConfig com posicionamento padrão e mapa de nós."""
    cluster = ClusterConfig(
        attention_gpus=attention_gpus,
        expert_gpus=expert_gpus,
        kv_slots_per_attention_gpu=kv_slots_per_attention_gpu,
    )
    cluster.node_of = resolve_node_of(cluster.num_gpus, gpus_per_node, node_of)
    cluster.placement = default_placement(model, cluster)
    return cluster
