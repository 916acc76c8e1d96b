"""
Fila de eventos
Heap ordenado por (tempo, seq); seq é o número de inserção e desempata eventos simultâneos.
"""

import heapq
from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Optional, Tuple


class EventKind(Enum):
    """Tipos de evento da simulação."""
    REQUEST_ARRIVAL = "request_arrival"
    PHASE1_ARRIVE = "phase1_arrive"
    PHASE2_COMPLETE = "phase2_complete"
    EXEC_DONE = "exec_done"


class SimMode(Enum):
    """Modo de execução de uma simulação."""
    AEP = "aep"
    SYNC_EP = "sync_ep"


@dataclass
class SimEvent:
    time: int
    seq: int
    kind: EventKind
    payload: Any = None


class EventQueue:
    """Heap de eventos com verificação de causalidade."""

    def __init__(self):
        self._heap: List[Tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.now = 0
        self.processed = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: int, kind: EventKind, payload: Any = None) -> SimEvent:
        if time < self.now:
            raise ValueError(f"Evento {kind.value} em {time} anterior ao relógio {self.now}")
        event = SimEvent(time, self._seq, kind, payload)
        heapq.heappush(self._heap, (time, self._seq, event))
        self._seq += 1
        return event

    def peek_time(self) -> Optional[int]:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> SimEvent:
        _, _, event = heapq.heappop(self._heap)
        self.now = event.time
        self.processed += 1
        return event
