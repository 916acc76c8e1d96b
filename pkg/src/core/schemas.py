"""
Tipos de domínio do simulador
Endereçamento de camadas, metadados de tokens, estado de requisições e forma do cluster.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering
from typing import Dict, Iterator, List, Optional, Tuple

# Tempo de simulação é sempre inteiro em nanossegundos.
NS_PER_S = 1_000_000_000
NS_PER_MS = 1_000_000

# Endpoint do coordenador (API server + load balancer) nas transferências.
COORDINATOR = -1


class LayerKind(Enum):
    """Tipos de camada escalonável."""
    ATTENTION = "attention"
    EXPERT = "expert"
    SAMPLER = "sampler"


_KIND_ORDER = {
    LayerKind.ATTENTION: 0,
    LayerKind.EXPERT: 1,
    LayerKind.SAMPLER: 2,
}

_KIND_PREFIX = {
    LayerKind.ATTENTION: "A",
    LayerKind.EXPERT: "E",
    LayerKind.SAMPLER: "S",
}


@total_ordering
@dataclass(frozen=True)
class LayerId:
    """
    Endereça uma camada: (bloco, expert), (bloco, rank DP de atenção) ou sampler.

    O sampler usa bloco = num_blocks, ficando depois do último bloco na ordem total.
    """
    kind: LayerKind
    block: int
    slot: int

    @classmethod
    def attention(cls, block: int, rank: int) -> "LayerId":
        return cls(LayerKind.ATTENTION, block, rank)

    @classmethod
    def expert(cls, block: int, expert: int) -> "LayerId":
        return cls(LayerKind.EXPERT, block, expert)

    @classmethod
    def sampler(cls, rank: int, num_blocks: int) -> "LayerId":
        return cls(LayerKind.SAMPLER, num_blocks, rank)

    @property
    def sort_key(self) -> Tuple[int, int, int]:
        """Chave da ordem total: (bloco, atenção < expert < sampler, slot)."""
        return (self.block, _KIND_ORDER[self.kind], self.slot)

    def __lt__(self, other: "LayerId") -> bool:
        if not isinstance(other, LayerId):
            return NotImplemented
        return self.sort_key < other.sort_key

    @property
    def is_attention_like(self) -> bool:
        """Atenção e sampler consomem a saída mesclada dos experts."""
        return self.kind is not LayerKind.EXPERT

    @property
    def label(self) -> str:
        if self.kind is LayerKind.SAMPLER:
            return f"S.{self.slot}"
        return f"{_KIND_PREFIX[self.kind]}{self.block}.{self.slot}"

    @classmethod
    def from_label(cls, label: str, num_blocks: int) -> "LayerId":
        """Inverso de `label` (usado ao recarregar traces de CSV)."""
        prefix, rest = label[0], label[1:]
        if prefix == "S":
            return cls.sampler(int(rest.lstrip(".")), num_blocks)
        block, slot = rest.split(".")
        kind = LayerKind.ATTENTION if prefix == "A" else LayerKind.EXPERT
        return cls(kind, int(block), int(slot))

    def __str__(self) -> str:
        return self.label


@dataclass
class ModelConfig:
    """Forma do modelo MoE."""
    num_blocks: int = 32
    num_experts: int = 8
    top_k: int = 1
    hidden_dim: int = 4096
    bytes_per_element: int = 2

    @property
    def token_bytes(self) -> int:
        """Bytes de um tensor de ativação de um token."""
        return self.hidden_dim * self.bytes_per_element


@dataclass
class ClusterConfig:
    """
    Forma do cluster.

    GPUs 0..attention_gpus-1 são de atenção (um rank DP cada); os GPUs de expert
    vêm em seguida. O índice de expert GPU "g" corresponde ao GPU global attention_gpus + g.
    """
    attention_gpus: int = 4
    expert_gpus: int = 4
    kv_slots_per_attention_gpu: int = 65536
    node_of: List[int] = field(default_factory=list)
    placement: Dict[LayerId, int] = field(default_factory=dict)

    @property
    def num_gpus(self) -> int:
        return self.attention_gpus + self.expert_gpus

    @property
    def dp_degree(self) -> int:
        return self.attention_gpus

    def attention_gpu(self, rank: int) -> int:
        return rank

    def expert_gpu(self, index: int) -> int:
        return self.attention_gpus + index

    def is_attention_gpu(self, gpu: int) -> bool:
        return 0 <= gpu < self.attention_gpus

    def node(self, gpu: int) -> int:
        if gpu == COORDINATOR or not self.node_of:
            return 0
        return self.node_of[gpu]

    def same_node(self, a: int, b: int) -> bool:
        return self.node(a) == self.node(b)

    def hosted_layers(self, gpu: int) -> List[LayerId]:
        """Camadas hospedadas por um GPU, na ordem total."""
        return sorted(layer for layer, g in self.placement.items() if g == gpu)


def enumerate_layers(model: ModelConfig, dp_degree: int) -> Iterator[LayerId]:
    """Todas as camadas que o simulador pode endereçar."""
    for block in range(model.num_blocks):
        for rank in range(dp_degree):
            yield LayerId.attention(block, rank)
        for expert in range(model.num_experts):
            yield LayerId.expert(block, expert)
    for rank in range(dp_degree):
        yield LayerId.sampler(rank, model.num_blocks)


@dataclass
class TokenMeta:
    """Metadados de um token em trânsito entre camadas."""
    request_id: int
    layer_id: LayerId
    payload_bytes: int
    context_len: int
    payload_tensors: int = 1
    topk_weights: List[float] = field(default_factory=list)

    @property
    def total_bytes(self) -> int:
        return self.payload_bytes * self.payload_tensors


@dataclass
class RequestState:
    """Ciclo de vida de uma requisição de decode."""
    request_id: int
    input_len: int
    output_len: int
    arrival_time: int
    dp_rank: Optional[int] = None
    admitted_time: Optional[int] = None
    generated: int = 0
    completion_time: Optional[int] = None
    per_token_times: List[int] = field(default_factory=list)

    @property
    def kv_reservation(self) -> int:
        """Slots KV no pior caso: prompt mais todos os tokens gerados."""
        return self.input_len + self.output_len

    @property
    def is_finished(self) -> bool:
        return self.generated >= self.output_len

    @property
    def is_complete(self) -> bool:
        return self.completion_time is not None

    def bind(self, rank: int, now: int) -> None:
        """Vincula a requisição a um rank DP (imutável depois)."""
        if self.dp_rank is not None and self.dp_rank != rank:
            raise ValueError(
                f"Requisição {self.request_id} já vinculada ao rank {self.dp_rank}"
            )
        self.dp_rank = rank
        self.admitted_time = now

    def record_token(self, now: int) -> None:
        if self.generated >= self.output_len:
            raise ValueError(f"Requisição {self.request_id} já gerou {self.output_len} tokens")
        if self.per_token_times and now <= self.per_token_times[-1]:
            raise ValueError(
                f"Tempo de token não crescente para requisição {self.request_id}: {now}"
            )
        self.per_token_times.append(now)
        self.generated += 1
