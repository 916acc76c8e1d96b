"""
µ-queues e pool de tokens top-K
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

from ..core.exceptions import RoutingFault
from ..core.schemas import LayerId, TokenMeta

logger = logging.getLogger(__name__)


@dataclass
class MicroQueue:
    """Fila FIFO de tokens aguardando uma camada."""
    layer_id: LayerId
    tokens: Deque[TokenMeta] = field(default_factory=deque)
    enqueue_times: Deque[int] = field(default_factory=deque)

    def __len__(self) -> int:
        return len(self.tokens)

    def push(self, token: TokenMeta, now: int) -> None:
        if token.layer_id != self.layer_id:
            raise RoutingFault(token.layer_id)
        self.tokens.append(token)
        self.enqueue_times.append(now)

    def drain(self, limit: int = 0) -> List[Tuple[TokenMeta, int]]:
        """Remove até `limit` tokens (0 = todos) com seus instantes de enfileiramento."""
        count = len(self.tokens) if limit <= 0 else min(limit, len(self.tokens))
        return [(self.tokens.popleft(), self.enqueue_times.popleft()) for _ in range(count)]


@dataclass
class PoolEntry:
    """Token parcial aguardando as K saídas de experts."""
    token: TokenMeta
    received: int = 1
    weights: List[float] = field(default_factory=list)


class TokenPool:
    """
    Pool de merge top-K, indexado por (request_id, layer_id).

    Uma entrada existe apenas enquanto 1 <= recebidos < K; a K-ésima chegada remove a
    entrada e devolve um único token com payload_tensors = K.
    """

    def __init__(self, top_k: int):
        self.top_k = top_k
        self.pending: Dict[Tuple[int, LayerId], PoolEntry] = {}
        self.merges = 0

    def __len__(self) -> int:
        return len(self.pending)

    def offer(self, token: TokenMeta) -> Optional[TokenMeta]:
        """Registra uma perna; retorna o token mesclado quando todas chegaram."""
        key = (token.request_id, token.layer_id)
        entry = self.pending.get(key)
        if entry is None:
            entry = PoolEntry(token=token, received=0)
            self.pending[key] = entry
        entry.received += token.payload_tensors
        entry.weights.extend(token.topk_weights)

        if entry.received < self.top_k:
            return None

        del self.pending[key]
        self.merges += 1
        if entry.received > self.top_k:
            logger.error(f"Pool recebeu {entry.received} pernas para {key}, esperado {self.top_k}")
        return TokenMeta(
            request_id=token.request_id,
            layer_id=token.layer_id,
            payload_bytes=token.payload_bytes,
            context_len=token.context_len,
            payload_tensors=entry.received,
            topk_weights=entry.weights,
        )

    def entries(self) -> List[Tuple[int, LayerId, int]]:
        """(request_id, layer_id, pernas recebidas) em ordem determinística."""
        return sorted(
            (rid, layer, entry.received) for (rid, layer), entry in self.pending.items()
        )
