"""
Runtime por GPU
Receptor (µ-queues + pool top-K), formação de batches e contabilidade de slots KV.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

from ..core.exceptions import KVCapacityError, RoutingFault
from ..core.schemas import LayerId, LayerKind, TokenMeta
from .micro_queue import MicroQueue, TokenPool

logger = logging.getLogger(__name__)


@dataclass
class ExecutionBatch:
    """Batch drenado de uma µ-queue, pronto para executar."""
    gpu_id: int
    layer_id: LayerId
    tokens: List[TokenMeta]
    start: int
    queue_delays: List[int]
    kv_allocated: int = 0

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def total_context(self) -> int:
        return sum(token.context_len for token in self.tokens)

    @property
    def queue_delay_sum(self) -> int:
        return sum(self.queue_delays)


@dataclass
class IngestResult:
    """Efeito de uma chamada do receptor."""
    touched: List[LayerId] = field(default_factory=list)
    pooled: List[TokenMeta] = field(default_factory=list)
    merged: List[TokenMeta] = field(default_factory=list)


class RuntimeState:
    """Estado de um GPU simulado."""

    def __init__(self, gpu_id: int, hosted: Iterable[LayerId], num_blocks: int,
                 num_experts: int, top_k: int = 1, kv_capacity: int = 0, max_batch: int = 0):
        self.gpu_id = gpu_id
        self.hosted: List[LayerId] = sorted(hosted)
        self.queues: Dict[LayerId, MicroQueue] = {layer: MicroQueue(layer) for layer in self.hosted}
        self.pool = TokenPool(top_k)
        self.num_blocks = num_blocks
        self.num_experts = num_experts
        self.top_k = top_k
        self.max_batch = max_batch

        self.kv_capacity = kv_capacity
        self.kv_used = 0
        self.block_table: Dict[int, int] = {}

        self.busy = False
        self.busy_until = 0
        self.busy_ns = 0
        self.queue_delay_ns = 0
        self.current: Optional[ExecutionBatch] = None

    def queue_lengths(self) -> Dict[LayerId, int]:
        """Comprimento de cada µ-queue, na ordem total das camadas."""
        return {layer: len(self.queues[layer]) for layer in self.hosted}

    @property
    def queued_tokens(self) -> int:
        return sum(len(queue) for queue in self.queues.values())

    def needs_merge(self, layer: LayerId) -> bool:
        """Atenção dos blocos >= 1 e sampler consomem as K saídas dos experts."""
        if self.top_k <= 1 or not layer.is_attention_like:
            return False
        return not (layer.kind is LayerKind.ATTENTION and layer.block == 0)

    def admit(self, request_id: int, input_len: int) -> None:
        """Carrega o KV do prompt (prefill pré-populado) de uma requisição recém-admitida."""
        if request_id in self.block_table:
            raise KVCapacityError(f"Requisição {request_id} já admitida no GPU {self.gpu_id}")
        self.allocate(request_id, input_len)

    def release(self, request_id: int) -> int:
        """Libera todos os slots de uma requisição; retorna quantos."""
        slots = self.block_table.pop(request_id, 0)
        self.kv_used -= slots
        return slots

    def allocate(self, request_id: int, slots: int) -> None:
        if self.kv_used + slots > self.kv_capacity:
            logger.error(
                f"GPU {self.gpu_id}: KV {self.kv_used}+{slots} excede capacidade {self.kv_capacity}"
            )
            raise KVCapacityError(
                f"GPU {self.gpu_id}: alocação de {slots} slot(s) para requisição {request_id} "
                f"excede capacidade {self.kv_capacity}"
            )
        self.block_table[request_id] = self.block_table.get(request_id, 0) + slots
        self.kv_used += slots

    def advance_busy(self, until: int) -> None:
        if until < self.busy_until:
            raise ValueError(f"GPU {self.gpu_id}: busy_until não pode regredir")
        self.busy_until = until


def receptor_ingest(rt: RuntimeState, batch: List[TokenMeta], now: int) -> IngestResult:
    """
    Separa os tokens recebidos por camada de destino.

    Tokens que precisam das K pernas passam pelo pool; os prontos entram na µ-queue
    correspondente com instante de enfileiramento `now`.

    Raises:
        RoutingFault: token para camada não hospedada neste GPU
    """
    result = IngestResult()
    for token in batch:
        queue = rt.queues.get(token.layer_id)
        if queue is None:
            logger.error(f"GPU {rt.gpu_id} recebeu token para {token.layer_id}")
            raise RoutingFault(token.layer_id, rt.gpu_id)

        if rt.needs_merge(token.layer_id):
            result.pooled.append(token)
            merged = rt.pool.offer(token)
            if merged is None:
                continue
            result.merged.append(merged)
            token = merged

        queue.push(token, now)
        if token.layer_id not in result.touched:
            result.touched.append(token.layer_id)
    return result


def form_batch(rt: RuntimeState, layer: LayerId, now: int) -> ExecutionBatch:
    """
    Drena a µ-queue escolhida num batch (respeitando max_batch, 0 = sem limite).

    Atenção do bloco 0 aloca um slot KV por requisição do batch.

    Raises:
        ValueError: fila vazia
        KVCapacityError: alocação acima da capacidade
    """
    queue = rt.queues[layer]
    if not len(queue):
        raise ValueError(f"GPU {rt.gpu_id}: µ-queue {layer} vazia")

    drained = queue.drain(rt.max_batch)
    tokens = [token for token, _ in drained]
    delays = [now - enqueued for _, enqueued in drained]
    batch = ExecutionBatch(rt.gpu_id, layer, tokens, now, delays)

    if layer.kind is LayerKind.ATTENTION and layer.block == 0:
        for token in tokens:
            if token.request_id not in rt.block_table:
                raise KVCapacityError(
                    f"GPU {rt.gpu_id}: requisição {token.request_id} sem KV admitido"
                )
            rt.allocate(token.request_id, 1)
        batch.kv_allocated = len(tokens)

    rt.queue_delay_ns += batch.queue_delay_sum
    return batch
