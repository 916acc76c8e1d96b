"""
Dispatcher
Reetiqueta as saídas de uma execução para a próxima camada e agrupa por GPU de destino.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Tuple

from ..core.exceptions import UnknownRequestError
from ..core.schemas import ClusterConfig, LayerId, LayerKind, ModelConfig, RequestState, TokenMeta
from ..workload.routing import ExpertRouter
from .runtime import ExecutionBatch

logger = logging.getLogger(__name__)


@dataclass
class DispatchResult:
    """Lotes de saída por destino e requisições concluídas no sampler."""
    outbound: List[Tuple[int, List[TokenMeta]]] = field(default_factory=list)
    completed: List[RequestState] = field(default_factory=list)
    emitted: int = 0


def _group(cluster: ClusterConfig, tokens: List[TokenMeta]) -> List[Tuple[int, List[TokenMeta]]]:
    groups: Dict[int, List[TokenMeta]] = {}
    for token in tokens:
        groups.setdefault(cluster.placement[token.layer_id], []).append(token)
    return sorted(groups.items())


def _lookup(requests: Mapping[int, RequestState], request_id: int) -> RequestState:
    request = requests.get(request_id)
    if request is None:
        logger.error(f"Dispatcher recebeu token da requisição desconhecida {request_id}")
        raise UnknownRequestError(request_id)
    return request


def dispatch(batch: ExecutionBatch, model: ModelConfig, cluster: ClusterConfig,
             router: ExpertRouter, requests: Mapping[int, RequestState],
             now: int) -> DispatchResult:
    """
    Encaminha as saídas de uma execução.

    - Atenção(b): roteia cada token, duplica em K pernas e agrupa por GPU de Expert(b, e).
    - Expert(b): volta para Atenção(b+1, rank) do dono, ou Sampler(rank) no último bloco.
    - Sampler: emite um token por requisição; ou reentra em Atenção(0) com contexto +1,
      ou a requisição termina.

    Raises:
        UnknownRequestError: token de requisição inexistente
    """
    layer = batch.layer_id
    result = DispatchResult()
    outputs: List[TokenMeta] = []

    if layer.kind is LayerKind.ATTENTION:
        experts, weights = router.route(layer.block, batch.size)
        legs: List[Tuple[int, int, TokenMeta]] = []
        for i, token in enumerate(batch.tokens):
            _lookup(requests, token.request_id)
            for j in range(model.top_k):
                expert = int(experts[i, j])
                leg = TokenMeta(
                    request_id=token.request_id,
                    layer_id=LayerId.expert(layer.block, expert),
                    payload_bytes=token.payload_bytes,
                    context_len=token.context_len,
                    payload_tensors=1,
                    topk_weights=[float(weights[i, j])],
                )
                legs.append((expert, len(legs), leg))
        # permuta por ID de expert, estável dentro de cada expert
        outputs = [leg for _, _, leg in sorted(legs, key=lambda item: (item[0], item[1]))]

    elif layer.kind is LayerKind.EXPERT:
        last_block = layer.block == model.num_blocks - 1
        for token in batch.tokens:
            rank = _lookup(requests, token.request_id).dp_rank
            target = (LayerId.sampler(rank, model.num_blocks) if last_block
                      else LayerId.attention(layer.block + 1, rank))
            outputs.append(TokenMeta(
                request_id=token.request_id,
                layer_id=target,
                payload_bytes=token.payload_bytes,
                context_len=token.context_len,
                payload_tensors=1,
                topk_weights=list(token.topk_weights),
            ))

    else:
        for token in batch.tokens:
            request = _lookup(requests, token.request_id)
            request.record_token(now)
            result.emitted += 1
            if request.is_finished:
                result.completed.append(request)
                continue
            outputs.append(TokenMeta(
                request_id=token.request_id,
                layer_id=LayerId.attention(0, request.dp_rank),
                payload_bytes=token.payload_bytes,
                context_len=token.context_len + 1,
            ))

    result.outbound = _group(cluster, outputs)
    return result
