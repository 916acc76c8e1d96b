"""
Políticas de escolha de camada
MTFS (mais tokens primeiro), FLFS (primeira camada primeiro) e o escalonador de desfragmentação.
Todas retornam None (ocioso) quando não há fila não vazia; empates vão para a menor camada na ordem total.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional

from ..core.schemas import LayerId
from .runtime import RuntimeState

logger = logging.getLogger(__name__)


class SchedulerKind(Enum):
    """Políticas de escalonamento disponíveis."""
    MTFS = "mtfs"
    FLFS = "flfs"
    DEFRAG = "defrag"


@dataclass
class SchedulerPolicy:
    """Política de escalonamento e parâmetros do lookahead."""
    kind: SchedulerKind = SchedulerKind.DEFRAG
    lookahead_depth: int = 4
    weight_decay: float = 0.5
    max_batch: int = 0
    lookahead_divisor: Optional[float] = None

    def __post_init__(self):
        if self.lookahead_depth < 0:
            raise ValueError("lookahead_depth precisa ser >= 0")
        if not 0.0 < self.weight_decay < 1.0:
            raise ValueError("weight_decay precisa estar em (0, 1)")
        if self.max_batch < 0:
            raise ValueError("max_batch precisa ser >= 0")


def schedule_mtfs(rt: RuntimeState) -> Optional[LayerId]:
    """Camada com a maior fila."""
    best: Optional[LayerId] = None
    best_len = 0
    for layer in rt.hosted:
        length = len(rt.queues[layer])
        if length > best_len:
            best, best_len = layer, length
    return best


def schedule_flfs(rt: RuntimeState) -> Optional[LayerId]:
    """Primeira camada não vazia na ordem total (sampler depois do último bloco)."""
    for layer in rt.hosted:
        if len(rt.queues[layer]):
            return layer
    return None


def lookahead_scores(rt: RuntimeState, policy: SchedulerPolicy) -> Dict[int, float]:
    """
    LScore de cada linha hospedada (blocos e sampler na linha num_blocks).

    LScore(b) = soma_{k=1..W} (tokens dos blocos (b+k) mod N_B / divisor) * decay^k
    """
    divisor = policy.lookahead_divisor or rt.num_experts
    per_block: Dict[int, int] = {}
    for layer in rt.hosted:
        per_block[layer.block] = per_block.get(layer.block, 0) + len(rt.queues[layer])

    scores: Dict[int, float] = {}
    for block in per_block:
        score = 0.0
        for k in range(1, policy.lookahead_depth + 1):
            ahead = per_block.get((block + k) % rt.num_blocks, 0)
            score += (ahead / divisor) * (policy.weight_decay ** k)
        scores[block] = score
    return scores


def schedule_defrag(rt: RuntimeState, policy: SchedulerPolicy) -> Optional[LayerId]:
    """
    Escalonador de desfragmentação.

    Score(camada) = LScore(bloco) + tamanho da fila, apenas para filas não vazias.
    Com lookahead_depth = 0 coincide com MTFS.
    """
    lscore = lookahead_scores(rt, policy) if policy.lookahead_depth else {}
    best: Optional[LayerId] = None
    best_score = 0.0
    for layer in rt.hosted:
        length = len(rt.queues[layer])
        if not length:
            continue
        score = lscore.get(layer.block, 0.0) + length
        if best is None or score > best_score:
            best, best_score = layer, score
    return best


def make_scheduler(policy: SchedulerPolicy) -> Callable[[RuntimeState], Optional[LayerId]]:
    """Função de escolha de camada para a política."""
    if policy.kind is SchedulerKind.MTFS:
        return schedule_mtfs
    if policy.kind is SchedulerKind.FLFS:
        return schedule_flfs
    return lambda rt: schedule_defrag(rt, policy)
