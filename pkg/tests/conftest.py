"""
Configuração global de testes do simulador.
Modelos e clusters pequenos para que as simulações completas rodem em segundos.
"""

from typing import Callable, List, Optional

import pytest

from src.core.placement import build_cluster
from src.core.schemas import NS_PER_S, ClusterConfig, ModelConfig
from src.engine.schedulers import SchedulerKind, SchedulerPolicy
from src.perf.perf_model import PerfModel
from src.simulation import SimMode, SimTrace, run
from src.workload.arrivals import Arrival, WorkloadSpec
from src.workload.routing import SkewKind, SkewSpec


def make_cluster(model: ModelConfig, attention_gpus: int = 2, expert_gpus: int = 2,
                 kv_slots: int = 65536, gpus_per_node: int = 8) -> ClusterConfig:
    return build_cluster(model, attention_gpus=attention_gpus, expert_gpus=expert_gpus,
                         kv_slots_per_attention_gpu=kv_slots, gpus_per_node=gpus_per_node)


@pytest.fixture
def small_model() -> ModelConfig:
    """4 blocos, 4 experts, top-1."""
    return ModelConfig(num_blocks=4, num_experts=4, top_k=1, hidden_dim=1024, bytes_per_element=2)


@pytest.fixture
def top2_model() -> ModelConfig:
    """4 blocos, 4 experts, top-2."""
    return ModelConfig(num_blocks=4, num_experts=4, top_k=2, hidden_dim=1024, bytes_per_element=2)


@pytest.fixture
def perf() -> PerfModel:
    return PerfModel()


@pytest.fixture
def short_workload() -> WorkloadSpec:
    """~10 requisições curtas em 50 ms."""
    return WorkloadSpec(arrival_rate=200.0, input_range=(10, 30), output_range=(5, 15),
                        duration=0.05, seed=7)


@pytest.fixture
def simulate_small(perf) -> Callable[..., SimTrace]:
    """
    Executa uma simulação pequena com horizonte folgado (drena por completo).
    """
    def _run(model: ModelConfig, workload: WorkloadSpec,
             policy: Optional[SchedulerPolicy] = None,
             skew: Optional[SkewSpec] = None,
             mode: SimMode = SimMode.AEP,
             cluster: Optional[ClusterConfig] = None,
             arrivals: Optional[List[Arrival]] = None,
             drop_transfer=None) -> SimTrace:
        return run(
            model,
            cluster or make_cluster(model),
            workload,
            skew or SkewSpec(SkewKind.EXPONENTIAL, 0.38),
            policy or SchedulerPolicy(SchedulerKind.DEFRAG),
            perf,
            mode=mode,
            horizon_ns=30 * NS_PER_S,
            drop_transfer=drop_transfer,
            arrivals=arrivals,
        )
    return _run
