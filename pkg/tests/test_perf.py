"""
Testes do modelo de desempenho
"""

import numpy as np
import pytest

from src.core.placement import build_cluster
from src.core.schemas import COORDINATOR, LayerKind, ModelConfig
from src.perf import (
    STAGES,
    LayerCostParams,
    LinkParams,
    PerfModel,
    batch_payload_bytes,
    exec_time,
    transfer_time,
)

SIX_MB = 6_000_000


@pytest.mark.unit
class TestExecTime:
    """Testes para exec_time."""

    def test_affine_cost(self):
        params = LayerCostParams(fixed_ns=1000, per_token_ns=10, per_context_ns=2)
        assert exec_time(LayerKind.ATTENTION, 4, 100, params) == 1000 + 40 + 200
        # termo de contexto só vale para atenção
        assert exec_time(LayerKind.EXPERT, 4, 100, params) == 1040

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            exec_time(LayerKind.EXPERT, 0, 0, LayerCostParams(1, 1))

    def test_strict_subadditivity(self):
        """exec(n+m) < exec(n) + exec(m) com custo fixo positivo."""
        perf = PerfModel()
        rng = np.random.default_rng(0)
        for kind in LayerKind:
            for n, m in rng.integers(1, 512, size=(1000, 2)):
                n, m = int(n), int(m)
                assert perf.exec_time(kind, n + m) < perf.exec_time(kind, n) + perf.exec_time(kind, m)

    def test_expert_throughput_near_linear_until_128(self):
        perf = PerfModel()
        per_token = perf.expert.per_token_ns
        throughput = 128 / perf.exec_time(LayerKind.EXPERT, 128)
        assert throughput >= 0.9 * (1 / per_token)

    def test_throughput_monotone_in_batch(self):
        perf = PerfModel()
        rates = [b / perf.exec_time(LayerKind.EXPERT, b) for b in (1, 8, 32, 128, 512)]
        assert rates == sorted(rates)

    def test_attention_step_order_of_magnitude(self):
        perf = PerfModel()
        step = perf.exec_time(LayerKind.ATTENTION, 256, 256 * 200)
        assert 1_000_000 < step < 5_000_000

    def test_batch_table_interpolation(self):
        params = LayerCostParams(0, 0, batch_table=[(1, 100), (10, 1000)])
        assert exec_time(LayerKind.EXPERT, 1, 0, params) == 100
        assert exec_time(LayerKind.EXPERT, 5, 0, params) == 500
        assert exec_time(LayerKind.EXPERT, 10, 0, params) == 1000
        # extrapolação com a inclinação do último segmento
        assert exec_time(LayerKind.EXPERT, 20, 0, params) == 2000

    def test_invalid_batch_table(self):
        with pytest.raises(ValueError):
            LayerCostParams(0, 0, batch_table=[(10, 100), (5, 200)])

    def test_invalid_stage_split(self):
        with pytest.raises(ValueError):
            LayerCostParams(1, 1, stage_split={"exec": 0.5})
        with pytest.raises(ValueError):
            LayerCostParams(1, 1, stage_split={"warmup": 1.0})


@pytest.mark.unit
class TestTransferTime:
    """Testes para transfer_time."""

    def test_zero_bytes(self):
        phase1, phase2 = transfer_time(0, LinkParams(600_000_000_000, 2_000, 20_000))
        assert phase1 == 20_000
        assert phase2 == 2_000

    def test_intra_node_six_mb(self):
        _, phase2 = transfer_time(SIX_MB, LinkParams(600_000_000_000, 0))
        assert phase2 == 10_000

    def test_inter_node_six_mb(self):
        """100 Gbps = 12.5 GB/s."""
        _, phase2 = transfer_time(SIX_MB, LinkParams(12_500_000_000, 0))
        assert phase2 == 480_000

    def test_propagation_added(self):
        _, phase2 = transfer_time(SIX_MB, LinkParams(600_000_000_000, 2_000))
        assert phase2 == 12_000

    def test_rounds_up(self):
        _, phase2 = transfer_time(1, LinkParams(600_000_000_000, 0))
        assert phase2 == 1

    def test_negative_bytes(self):
        with pytest.raises(ValueError):
            transfer_time(-1, LinkParams(1, 0))

    def test_link_selection(self):
        model = ModelConfig(num_blocks=1, num_experts=4)
        cluster = build_cluster(model, attention_gpus=2, expert_gpus=4,
                                kv_slots_per_attention_gpu=100, gpus_per_node=4)
        perf = PerfModel()

        assert perf.link(0, 3, cluster) is perf.intra_node
        assert perf.link(0, 4, cluster) is perf.inter_node
        # coordenador fica no nó 0
        assert perf.link(COORDINATOR, 1, cluster) is perf.intra_node
        assert perf.link(COORDINATOR, 5, cluster) is perf.inter_node


@pytest.mark.unit
class TestPayloadAndStages:
    """Testes de tamanho de payload e decomposição por estágios."""

    def test_batch_payload_bytes(self):
        model = ModelConfig(hidden_dim=4096, bytes_per_element=2)
        assert batch_payload_bytes(0, model) == 0
        assert batch_payload_bytes(128, model) == 1_048_576

    @pytest.mark.parametrize("kind,batch,context", [
        (LayerKind.ATTENTION, 1, 50),
        (LayerKind.ATTENTION, 200, 40_000),
        (LayerKind.EXPERT, 37, 0),
        (LayerKind.SAMPLER, 3, 0),
    ])
    def test_stage_breakdown_sums_to_exec_time(self, kind, batch, context):
        perf = PerfModel()
        stages = perf.stage_breakdown(kind, batch, context)

        assert list(stages) == list(STAGES)
        assert all(value >= 0 for value in stages.values())
        assert sum(stages.values()) == perf.exec_time(kind, batch, context)

    def test_page_table_only_in_attention(self):
        perf = PerfModel()
        assert perf.stage_breakdown(LayerKind.EXPERT, 10)["page_table"] == 0
        assert perf.stage_breakdown(LayerKind.ATTENTION, 10, 100)["page_table"] > 0

    def test_describe(self):
        assert "expert@128=0.800ms" in PerfModel().describe()
