"""
Balanceador de carga do coordenador
Vincula cada requisição ao rank DP com mais memória KV livre; fila FIFO quando nenhum rank comporta.
"""

import logging
from collections import deque
from typing import Deque, List, Optional, Sequence, Tuple

from ..core.schemas import RequestState

logger = logging.getLogger(__name__)


def assign_dp_rank(needed: int, kv_free: Sequence[int]) -> Optional[int]:
    """
    Escolhe o rank com mais slots livres (empate: menor índice).

    Args:
        needed: Slots exigidos (input_len + output_len)
        kv_free: Slots livres por rank

    Returns:
        Rank escolhido, ou None se nem o maior comporta a requisição
    """
    if not kv_free:
        raise ValueError("Nenhum rank DP disponível")
    best = max(range(len(kv_free)), key=lambda rank: (kv_free[rank], -rank))
    if kv_free[best] < needed:
        return None
    return best


class LoadBalancer:
    """Reservas KV por rank e fila de admissão FIFO do coordenador."""

    def __init__(self, num_ranks: int, capacity_per_rank: int):
        self.capacity = capacity_per_rank
        self.reserved: List[int] = [0] * num_ranks
        self.queue: Deque[RequestState] = deque()
        self.peak_queue_len = 0
        self._warn_at = 64

    def kv_free(self) -> List[int]:
        return [self.capacity - used for used in self.reserved]

    def submit(self, request: RequestState, now: int) -> List[Tuple[RequestState, int]]:
        """Recebe uma nova requisição; retorna as admitidas agora (em ordem FIFO)."""
        self.queue.append(request)
        admitted = self.drain(now)
        if len(self.queue) > self.peak_queue_len:
            self.peak_queue_len = len(self.queue)
            if self.peak_queue_len >= self._warn_at:
                logger.warning(
                    f"Fila de admissão com {self.peak_queue_len} requisições aguardando KV"
                )
                self._warn_at *= 2
        return admitted

    def release(self, request: RequestState, now: int) -> List[Tuple[RequestState, int]]:
        """Libera a reserva de uma requisição concluída e reavalia a fila."""
        if request.dp_rank is None:
            raise ValueError(f"Requisição {request.request_id} nunca foi admitida")
        self.reserved[request.dp_rank] -= request.kv_reservation
        return self.drain(now)

    def drain(self, now: int) -> List[Tuple[RequestState, int]]:
        """Admite a partir da cabeça da fila enquanto houver rank que comporte."""
        admitted: List[Tuple[RequestState, int]] = []
        while self.queue:
            head = self.queue[0]
            rank = assign_dp_rank(head.kv_reservation, self.kv_free())
            if rank is None:
                break
            self.queue.popleft()
            head.bind(rank, now)
            self.reserved[rank] += head.kv_reservation
            admitted.append((head, rank))
        return admitted
