"""
Roteamento de Experts
Distribuição de carga entre experts (uniforme ou exponencial) e sorteio top-K sem reposição.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from ..core.schemas import ModelConfig

logger = logging.getLogger(__name__)


class SkewKind(Enum):
    """Formas de desbalanceamento entre experts."""
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"


@dataclass
class SkewSpec:
    """Parâmetros de skew. `lam` é a taxa de decaimento exponencial."""
    kind: SkewKind = SkewKind.EXPONENTIAL
    lam: float = 0.38
    per_block_shuffle: bool = False


class RoutingChoice(NamedTuple):
    """Experts escolhidos para um token e seus pesos de merge."""
    experts: Tuple[int, ...]
    weights: Tuple[float, ...]


def expert_probs(skew: SkewSpec, num_experts: int) -> np.ndarray:
    """
    Vetor de probabilidades por rank de expert.

    Exponencial: p_i proporcional a exp(-lam * i). Uniforme, ou lam <= 0: 1/N cada.
    """
    if num_experts < 1:
        raise ValueError(f"num_experts precisa ser >= 1 (recebido {num_experts})")
    if skew.kind is SkewKind.UNIFORM or skew.lam <= 0:
        return np.full(num_experts, 1.0 / num_experts)
    logits = -skew.lam * np.arange(num_experts, dtype=np.float64)
    weights = np.exp(logits)
    return weights / weights.sum()


def _gumbel_keys(rng: np.random.Generator, probs: np.ndarray, count: int) -> np.ndarray:
    with np.errstate(divide='ignore'):
        log_p = np.log(probs)
    return log_p + rng.gumbel(size=(count, len(probs)))


def route_batch(rng: np.random.Generator, probs: np.ndarray, top_k: int,
                count: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Roteia `count` tokens de uma vez.

    Usa o truque Gumbel-top-k: os k maiores log(p) + Gumbel equivalem a amostragem
    sem reposição proporcional a p.

    Returns:
        (experts, weights), ambos com forma (count, top_k)
    """
    if top_k < 1 or top_k > len(probs):
        raise ValueError(f"top_k {top_k} fora de [1, {len(probs)}]")
    if count == 0:
        return np.empty((0, top_k), dtype=np.int64), np.empty((0, top_k))

    keys = _gumbel_keys(rng, probs, count)
    if top_k == 1:
        experts = np.argmax(keys, axis=1)[:, None]
    else:
        experts = np.argsort(-keys, axis=1, kind='stable')[:, :top_k]

    raw = 1.0 - rng.random((count, top_k))  # (0, 1]
    weights = raw / raw.sum(axis=1, keepdims=True)
    return experts.astype(np.int64), weights


def route_token(rng: np.random.Generator, probs: np.ndarray, top_k: int) -> RoutingChoice:
    """Sorteia top_k experts distintos e pesos normalizados para um token."""
    experts, weights = route_batch(rng, probs, top_k, 1)
    return RoutingChoice(
        experts=tuple(int(e) for e in experts[0]),
        weights=tuple(float(w) for w in weights[0]),
    )


class ExpertRouter:
    """
    Roteador por bloco de um modelo.

    Com per_block_shuffle a ordem de popularidade dos experts é permutada em cada bloco;
    sem ele o mesmo expert é o mais quente em todos os blocos.
    """

    def __init__(self, model: ModelConfig, skew: SkewSpec,
                 rng: Optional[np.random.Generator] = None, seed: int = 0):
        self.model = model
        self.skew = skew
        self.rng = rng if rng is not None else np.random.default_rng([seed, 1])
        base = expert_probs(skew, model.num_experts)

        self._probs: List[np.ndarray]
        if skew.per_block_shuffle:
            shuffle_rng = np.random.default_rng([seed, 2])
            self._probs = []
            for _ in range(model.num_blocks):
                perm = shuffle_rng.permutation(model.num_experts)
                probs = np.empty_like(base)
                probs[perm] = base
                self._probs.append(probs)
        else:
            self._probs = [base] * model.num_blocks

        logger.debug(
            f"Roteador: {skew.kind.value}, lam={skew.lam}, "
            f"expert mais quente recebe {base.max():.3f} do tráfego top-1"
        )

    def probs(self, block: int) -> np.ndarray:
        return self._probs[block]

    def route(self, block: int, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """Roteia `count` tokens saindo da atenção do bloco `block`."""
        return route_batch(self.rng, self._probs[block], self.model.top_k, count)
