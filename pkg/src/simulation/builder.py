"""
Montagem de simulações a partir das configurações
"""

import logging
from dataclasses import dataclass
from typing import Optional

from config.settings import LayerPerfSettings, LinkSettings, Settings

from ..core.exceptions import ConfigurationError
from ..core.placement import build_cluster
from ..core.schemas import NS_PER_S, ClusterConfig, LayerKind, ModelConfig
from ..core.validation_system import validate_config
from ..engine.schedulers import SchedulerKind, SchedulerPolicy
from ..perf.perf_model import DEFAULT_STAGE_SPLITS, LayerCostParams, LinkParams, PerfModel
from ..workload.arrivals import WorkloadSpec, validate_workload
from ..workload.routing import SkewKind, SkewSpec
from .aep_simulator import DropPredicate, run
from .events import SimMode
from .trace import SimTrace

logger = logging.getLogger(__name__)


@dataclass
class RunComponents:
    """Objetos de domínio de uma simulação."""
    model: ModelConfig
    cluster: ClusterConfig
    workload: WorkloadSpec
    skew: SkewSpec
    policy: SchedulerPolicy
    perf: PerfModel
    mode: SimMode
    horizon_ns: int
    steady_window: tuple
    rate_bucket_ns: int


def _layer_params(kind: LayerKind, section: LayerPerfSettings) -> LayerCostParams:
    return LayerCostParams(
        fixed_ns=section.fixed_ns,
        per_token_ns=section.per_token_ns,
        per_context_ns=section.per_context_ns,
        stage_split=dict(section.stage_split or DEFAULT_STAGE_SPLITS[kind]),
        batch_table=list(section.batch_table) if section.batch_table else None,
    )


def _link_params(section: LinkSettings) -> LinkParams:
    return LinkParams(section.bandwidth_bytes_per_s, section.propagation_ns, section.metadata_ns)


def build_components(settings: Settings) -> RunComponents:
    """
    Converte Settings nos objetos de domínio e valida o conjunto.

    Raises:
        ConfigurationError: primeiro problema de validação, nomeando a chave
    """
    model = ModelConfig(**settings.model.model_dump())
    cluster_cfg = settings.cluster
    cluster = build_cluster(
        model,
        attention_gpus=cluster_cfg.attention_gpus,
        expert_gpus=cluster_cfg.expert_gpus,
        kv_slots_per_attention_gpu=cluster_cfg.kv_slots_per_attention_gpu,
        gpus_per_node=cluster_cfg.gpus_per_node,
        node_of=cluster_cfg.node_of,
    )

    w = settings.workload
    workload = WorkloadSpec(
        arrival_rate=w.rate,
        input_range=(w.input_min, w.input_max),
        output_range=(w.output_min, w.output_max),
        duration=w.duration_s,
        seed=settings.seed,
    )

    for report in (validate_config(model, cluster), validate_workload(workload, cluster)):
        if not report.is_valid:
            issue = report.issues[0]
            raise ConfigurationError(issue.location or "config", issue.message)

    s = settings.scheduler
    policy = SchedulerPolicy(
        kind=SchedulerKind(s.policy),
        lookahead_depth=s.lookahead_depth,
        weight_decay=s.weight_decay,
        max_batch=s.max_batch,
        lookahead_divisor=s.lookahead_divisor,
    )
    perf = PerfModel(
        attention=_layer_params(LayerKind.ATTENTION, settings.perf.attention),
        expert=_layer_params(LayerKind.EXPERT, settings.perf.expert),
        sampler=_layer_params(LayerKind.SAMPLER, settings.perf.sampler),
        intra_node=_link_params(settings.perf.links.intra_node),
        inter_node=_link_params(settings.perf.links.inter_node),
    )
    skew = SkewSpec(SkewKind(settings.skew.kind), settings.skew.lambda_,
                    settings.skew.per_block_shuffle)

    return RunComponents(
        model=model,
        cluster=cluster,
        workload=workload,
        skew=skew,
        policy=policy,
        perf=perf,
        mode=SimMode(settings.sim.mode),
        horizon_ns=int(round(settings.horizon_s * NS_PER_S)),
        steady_window=tuple(settings.sim.steady_window),
        rate_bucket_ns=int(round(settings.sim.rate_bucket_s * NS_PER_S)),
    )


def run_components(parts: RunComponents, drop_transfer: Optional[DropPredicate] = None) -> SimTrace:
    """Executa uma simulação já montada."""
    logger.debug(f"Modelo de desempenho: {parts.perf.describe()}")
    return run(parts.model, parts.cluster, parts.workload, parts.skew, parts.policy, parts.perf,
               mode=parts.mode, horizon_ns=parts.horizon_ns, drop_transfer=drop_transfer)


def simulate(settings: Settings, drop_transfer: Optional[DropPredicate] = None) -> SimTrace:
    """Monta e executa uma simulação."""
    return run_components(build_components(settings), drop_transfer)
