"""
Modelo de Desempenho
Custo afim (fixo + por token + por contexto) das execuções de camada e custo em duas fases das transferências.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..core.schemas import NS_PER_S, ClusterConfig, LayerKind, ModelConfig

logger = logging.getLogger(__name__)

STAGES: Tuple[str, ...] = ("schedule", "page_table", "pre", "exec", "post")

DEFAULT_STAGE_SPLITS: Dict[LayerKind, Dict[str, float]] = {
    LayerKind.ATTENTION: {"schedule": 0.10, "page_table": 0.30, "pre": 0.10, "exec": 0.25, "post": 0.25},
    LayerKind.EXPERT: {"schedule": 0.15, "page_table": 0.0, "pre": 0.15, "exec": 0.55, "post": 0.15},
    LayerKind.SAMPLER: {"schedule": 0.2, "page_table": 0.0, "pre": 0.2, "exec": 0.4, "post": 0.2},
}


@dataclass
class LayerCostParams:
    """Parâmetros de custo de um tipo de camada (ns)."""
    fixed_ns: int
    per_token_ns: int
    per_context_ns: int = 0
    stage_split: Dict[str, float] = field(default_factory=dict)
    batch_table: Optional[List[Tuple[int, int]]] = None

    def __post_init__(self):
        for name in ("fixed_ns", "per_token_ns", "per_context_ns"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} precisa ser >= 0")
        if self.stage_split:
            unknown = set(self.stage_split) - set(STAGES)
            if unknown:
                raise ValueError(f"Estágios desconhecidos em stage_split: {sorted(unknown)}")
            if abs(sum(self.stage_split.values()) - 1.0) > 1e-9:
                raise ValueError("stage_split precisa somar 1")
        if self.batch_table is not None:
            table = [(int(b), int(t)) for b, t in self.batch_table]
            if not table:
                raise ValueError("batch_table vazia")
            for (b0, t0), (b1, t1) in zip(table, table[1:]):
                if b1 <= b0 or t1 < t0:
                    raise ValueError(
                        "batch_table precisa ser estritamente crescente em batch e não decrescente em ns"
                    )
            self.batch_table = table


@dataclass
class LinkParams:
    """Parâmetros de um enlace entre GPUs."""
    bandwidth_bytes_per_s: int
    propagation_ns: int
    metadata_ns: int = 20_000

    def __post_init__(self):
        if self.bandwidth_bytes_per_s <= 0:
            raise ValueError("bandwidth_bytes_per_s precisa ser > 0")
        self.bandwidth_bytes_per_s = int(self.bandwidth_bytes_per_s)


def default_attention_params() -> LayerCostParams:
    return LayerCostParams(400_000, 6_000, 8, dict(DEFAULT_STAGE_SPLITS[LayerKind.ATTENTION]))


def default_expert_params() -> LayerCostParams:
    # batch 128 custa 0.8 ms e atinge 0.92 do throughput assintótico
    return LayerCostParams(64_000, 5_750, 0, dict(DEFAULT_STAGE_SPLITS[LayerKind.EXPERT]))


def default_sampler_params() -> LayerCostParams:
    return LayerCostParams(50_000, 1_000, 0, dict(DEFAULT_STAGE_SPLITS[LayerKind.SAMPLER]))


def default_intra_link() -> LinkParams:
    return LinkParams(600_000_000_000, 2_000, 20_000)


def default_inter_link() -> LinkParams:
    return LinkParams(12_500_000_000, 10_000, 20_000)


def _ceil_div(num: int, den: int) -> int:
    return -(-num // den)


def _table_time(table: List[Tuple[int, int]], batch_size: int) -> int:
    """Interpolação linear na tabela; extrapola com a inclinação do último segmento."""
    if batch_size <= table[0][0]:
        return table[0][1]
    if len(table) == 1:
        return table[0][1]
    for (b0, t0), (b1, t1) in zip(table, table[1:]):
        if batch_size <= b1:
            return t0 + _ceil_div((t1 - t0) * (batch_size - b0), b1 - b0)
    (b0, t0), (b1, t1) = table[-2], table[-1]
    return t1 + _ceil_div((t1 - t0) * (batch_size - b1), b1 - b0)


def exec_time(layer_kind: LayerKind, batch_size: int, total_context: int,
              params: LayerCostParams) -> int:
    """
    Duração de uma execução de camada em ns.

    fixed_ns + per_token_ns * batch + per_context_ns * contexto (termo de contexto só na atenção).
    Com batch_table, a parte dependente do batch vem da tabela.

    Raises:
        ValueError: batch vazio
    """
    if batch_size < 1:
        raise ValueError(f"batch_size precisa ser >= 1 (recebido {batch_size})")
    if params.batch_table:
        base = _table_time(params.batch_table, batch_size)
    else:
        base = params.fixed_ns + params.per_token_ns * batch_size
    context = params.per_context_ns * total_context if layer_kind is LayerKind.ATTENTION else 0
    return int(math.ceil(base + context))


def transfer_time(num_bytes: int, link: LinkParams) -> Tuple[int, int]:
    """
    Duração das duas fases de uma transferência.

    Fase 1: mensagem de metadados pela CPU do remetente.
    Fase 2: propagação + ceil(bytes / banda) do payload.
    """
    if num_bytes < 0:
        raise ValueError(f"bytes precisa ser >= 0 (recebido {num_bytes})")
    phase2 = link.propagation_ns + _ceil_div(num_bytes * NS_PER_S, link.bandwidth_bytes_per_s)
    return link.metadata_ns, phase2


def batch_payload_bytes(tokens: int, model: ModelConfig) -> int:
    return tokens * model.hidden_dim * model.bytes_per_element


@dataclass
class PerfModel:
    """Conjunto de parâmetros de custo de um cluster."""
    attention: LayerCostParams = field(default_factory=default_attention_params)
    expert: LayerCostParams = field(default_factory=default_expert_params)
    sampler: LayerCostParams = field(default_factory=default_sampler_params)
    intra_node: LinkParams = field(default_factory=default_intra_link)
    inter_node: LinkParams = field(default_factory=default_inter_link)

    def params(self, kind: LayerKind) -> LayerCostParams:
        if kind is LayerKind.ATTENTION:
            return self.attention
        if kind is LayerKind.EXPERT:
            return self.expert
        return self.sampler

    def exec_time(self, kind: LayerKind, batch_size: int, total_context: int = 0) -> int:
        return exec_time(kind, batch_size, total_context, self.params(kind))

    def link(self, src: int, dst: int, cluster: ClusterConfig) -> LinkParams:
        """Enlace entre dois endpoints; o coordenador fica no nó 0."""
        if cluster.same_node(src, dst):
            return self.intra_node
        return self.inter_node

    def transfer_time(self, num_bytes: int, src: int, dst: int,
                      cluster: ClusterConfig) -> Tuple[int, int]:
        return transfer_time(num_bytes, self.link(src, dst, cluster))

    def stage_breakdown(self, kind: LayerKind, batch_size: int,
                        total_context: int = 0) -> Dict[str, int]:
        """
        Reparte uma execução nos cinco estágios.

        A parte fixa é distribuída por stage_split; a parte dependente do batch e o
        resíduo de arredondamento vão para "exec". A soma é exatamente exec_time.
        """
        params = self.params(kind)
        total = exec_time(kind, batch_size, total_context, params)
        split = params.stage_split or DEFAULT_STAGE_SPLITS[kind]
        fixed = min(params.fixed_ns, total)
        stages = {stage: int(fixed * split.get(stage, 0.0)) for stage in STAGES}
        stages["exec"] += total - sum(stages.values())
        return stages

    def describe(self) -> str:
        expert_128 = self.exec_time(LayerKind.EXPERT, 128)
        return (
            f"expert@128={expert_128 / 1e6:.3f}ms, "
            f"atenção@256/ctx200={self.exec_time(LayerKind.ATTENTION, 256, 256 * 200) / 1e6:.3f}ms"
        )
