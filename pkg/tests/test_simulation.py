"""
Testes do núcleo de simulação
Motor de eventos AEP, baseline síncrono e auditoria de traces.
"""

import filecmp

import numpy as np
import pytest

from src.core.exceptions import DeadlockError
from src.core.placement import build_cluster
from src.core.schemas import COORDINATOR, NS_PER_S, LayerId, LayerKind, ModelConfig
from src.engine.schedulers import SchedulerKind, SchedulerPolicy
from src.metrics import compute_phase_stall, compute_stall, emit_csv, summarize
from src.perf.perf_model import LayerCostParams, PerfModel
from src.simulation import EventKind, EventQueue, SimMode, drain_check, queue_delay_integral, run
from src.workload.arrivals import Arrival, WorkloadSpec
from src.workload.routing import SkewKind, SkewSpec
from tests.conftest import make_cluster


@pytest.mark.unit
class TestEventQueue:
    """Testes da fila de eventos."""

    def test_orders_by_time_then_insertion(self):
        events = EventQueue()
        events.push(20, EventKind.EXEC_DONE, "c")
        events.push(10, EventKind.EXEC_DONE, "a")
        events.push(10, EventKind.PHASE1_ARRIVE, "b")

        assert [events.pop().payload for _ in range(3)] == ["a", "b", "c"]
        assert events.now == 20
        assert events.processed == 3

    def test_rejects_past_events(self):
        events = EventQueue()
        events.push(100, EventKind.EXEC_DONE)
        events.pop()
        with pytest.raises(ValueError):
            events.push(99, EventKind.EXEC_DONE)

    def test_peek_empty(self):
        assert EventQueue().peek_time() is None


@pytest.mark.integration
class TestAepSimulator:
    """Testes ponta a ponta do simulador AEP."""

    def test_single_request_latency(self, simulate_small, perf):
        """1 bloco, 1 expert, top-1, uma saída: 3 execuções + 4 transferências."""
        model = ModelConfig(num_blocks=1, num_experts=1, top_k=1, hidden_dim=4096, bytes_per_element=2)
        cluster = make_cluster(model, attention_gpus=1, expert_gpus=1)
        workload = WorkloadSpec(1.0, (10, 10), (1, 1), duration=1.0)
        trace = simulate_small(model, workload, cluster=cluster, arrivals=[Arrival(0, 10, 1)])

        def leg(src, dst, num_bytes):
            return sum(perf.transfer_time(num_bytes, src, dst, cluster))

        token_bytes = model.token_bytes
        ingress = leg(COORDINATOR, 0, token_bytes)
        execs = (perf.exec_time(LayerKind.ATTENTION, 1, 10)
                 + perf.exec_time(LayerKind.EXPERT, 1)
                 + perf.exec_time(LayerKind.SAMPLER, 1))
        legs = ingress + leg(0, 1, token_bytes) + leg(1, 0, token_bytes) + leg(0, COORDINATOR, 0)

        request = trace.requests[0]
        assert request.completion_time == execs + legs == 614_872
        assert request.per_token_times == [request.completion_time - leg(0, COORDINATOR, 0)]
        assert [r.layer_id for r in trace.executions] == [
            LayerId.attention(0, 0), LayerId.expert(0, 0), LayerId.sampler(0, 1)
        ]
        assert [(t.src, t.dst) for t in trace.transfers] == [
            (COORDINATOR, 0), (0, 1), (1, 0), (0, COORDINATOR)
        ]
        assert trace.executions[0].start == ingress
        assert drain_check(trace).is_valid

    def test_zero_requests(self, simulate_small, small_model):
        workload = WorkloadSpec(1.0, (10, 10), (1, 1), duration=1.0)
        trace = simulate_small(small_model, workload, arrivals=[])

        assert trace.executions == []
        assert trace.snapshot.drained
        for gpu in range(trace.num_gpus):
            assert compute_stall(trace, gpu, (0, workload.duration_ns)) == 1.0
        assert drain_check(trace).is_valid

    def test_deterministic_outputs(self, simulate_small, small_model, short_workload, tmp_path):
        first = simulate_small(small_model, short_workload)
        second = simulate_small(small_model, short_workload)
        emit_csv(first, tmp_path / "a")
        emit_csv(second, tmp_path / "b")

        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names,
                                                   shallow=False)
        assert mismatch == [] and errors == []
        assert len(match) == len(names)

    @pytest.mark.audit
    @pytest.mark.parametrize("kind", list(SchedulerKind))
    def test_top1_run_passes_audit(self, simulate_small, small_model, short_workload, kind):
        trace = simulate_small(small_model, short_workload, policy=SchedulerPolicy(kind))
        report = drain_check(trace)

        assert report.is_valid, [issue.message for issue in report.issues]
        assert report.total_checks > 0
        assert trace.snapshot.drained
        assert len(trace.completed_requests()) == len(trace.requests) > 0

    @pytest.mark.audit
    @pytest.mark.parametrize("kind", list(SchedulerKind))
    def test_top2_run_passes_audit(self, simulate_small, top2_model, short_workload, kind):
        trace = simulate_small(top2_model, short_workload, policy=SchedulerPolicy(kind))
        report = drain_check(trace)

        assert report.is_valid, [issue.message for issue in report.issues]
        for request_id, request in trace.requests.items():
            counters = trace.counters[request_id]
            assert counters.merged_legs == 2 * counters.merges
            assert counters.merges == top2_model.num_blocks * request.output_len

    def test_kv_released_after_drain(self, simulate_small, small_model, short_workload):
        trace = simulate_small(small_model, short_workload)
        for gpu in trace.snapshot.gpus:
            assert gpu.kv_used == 0
            assert gpu.block_table == {}

    def test_admission_queue_under_tight_kv(self, simulate_small, small_model):
        """Capacidade para poucas requisições: as demais esperam e ainda assim concluem."""
        cluster = make_cluster(small_model, kv_slots=60)
        workload = WorkloadSpec(2000.0, (20, 20), (10, 10), duration=0.01, seed=3)
        trace = simulate_small(small_model, workload, cluster=cluster)

        admitted = sorted(r.admitted_time - r.arrival_time for r in trace.requests.values())
        assert admitted[-1] > 0
        assert len(trace.completed_requests()) == len(trace.requests)
        assert drain_check(trace).is_valid

    def test_max_batch_respected(self, simulate_small, small_model):
        workload = WorkloadSpec(3000.0, (10, 20), (3, 5), duration=0.01, seed=5)
        trace = simulate_small(small_model, workload,
                               policy=SchedulerPolicy(SchedulerKind.MTFS, max_batch=4))
        assert max(r.batch_size for r in trace.executions) <= 4
        assert drain_check(trace).is_valid

    def test_horizon_cut(self, perf, small_model, short_workload):
        trace = run(small_model, make_cluster(small_model), short_workload, SkewSpec(),
                    SchedulerPolicy(), perf, horizon_ns=5_000_000)

        assert not trace.snapshot.drained
        assert all(r.end <= 5_000_000 + max(e.duration for e in trace.executions)
                   for r in trace.executions)
        assert drain_check(trace).is_valid

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_queue_delay_integral(self, simulate_small, small_model, seed):
        workload = WorkloadSpec(400.0, (10, 30), (5, 10), duration=0.03, seed=seed)
        trace = simulate_small(small_model, workload)

        engine = sum(gpu.queue_delay_ns for gpu in trace.snapshot.gpus)
        assert sum(r.queue_delay_sum for r in trace.executions) == engine
        assert queue_delay_integral(trace) == engine


@pytest.mark.audit
class TestFaultInjection:
    """Auditoria e deadlock com transferências descartadas."""

    @staticmethod
    def _drop_first(request_id: int, attention_gpus: int):
        state = {"dropped": False}

        def predicate(src, dst, tokens):
            if state["dropped"] or not 0 <= src < attention_gpus or dst < attention_gpus:
                return False
            if any(token.request_id == request_id for token in tokens):
                state["dropped"] = True
                return True
            return False
        return predicate

    def test_dropped_top1_transfer_names_request(self, simulate_small, small_model, short_workload):
        trace = simulate_small(small_model, short_workload,
                               drop_transfer=self._drop_first(0, attention_gpus=2))
        report = drain_check(trace)

        assert trace.dropped_transfers == 1
        assert not report.is_valid
        locations = {issue.location for issue in report.get_issues_by_rule('token_conservation')}
        assert "request:0" in locations
        assert trace.requests[0].completion_time is None

    def test_dropped_top2_leg_deadlocks(self, simulate_small, short_workload):
        """Dois experts em dois GPUs: perder uma perna deixa a outra presa no pool."""
        model = ModelConfig(num_blocks=2, num_experts=2, top_k=2, hidden_dim=1024)
        with pytest.raises(DeadlockError) as exc_info:
            simulate_small(model, short_workload, cluster=make_cluster(model),
                           drop_transfer=self._drop_first(0, attention_gpus=2))

        stuck = exc_info.value.stuck_tokens
        assert any(t.request_id == 0 and t.where.startswith("pool:") for t in stuck)


@pytest.mark.slow
@pytest.mark.integration
class TestSyncBaseline:
    """Baseline síncrono: ociosidade dos GPUs de expert sob desbalanceamento."""

    @staticmethod
    def _burst(seed: int = 17, count: int = 4000):
        """`count` requisições simultâneas, 8 experts em 8 GPUs."""
        model = ModelConfig(num_blocks=4, num_experts=8, top_k=1, hidden_dim=1024)
        cluster = make_cluster(model, attention_gpus=4, expert_gpus=8, gpus_per_node=16)
        workload = WorkloadSpec(1.0, (10, 10), (2, 2), duration=1.0, seed=seed)
        arrivals = [Arrival(0, 10, 2)] * count
        return model, cluster, workload, arrivals

    @pytest.fixture
    def burst(self):
        return self._burst()

    def _expert_stall(self, simulate_small, burst, skew):
        model, cluster, workload, arrivals = burst
        trace = simulate_small(model, workload, skew=skew, mode=SimMode.SYNC_EP,
                               cluster=cluster, arrivals=arrivals)
        stalls = [compute_phase_stall(trace, gpu, "expert") for gpu in trace.expert_gpu_ids]
        return trace, stalls

    @pytest.mark.parametrize("seed", [17, 18, 19])
    def test_uniform_is_balanced(self, simulate_small, seed):
        trace, stalls = self._expert_stall(simulate_small, self._burst(seed),
                                           SkewSpec(SkewKind.UNIFORM))
        assert np.mean(stalls) < 0.10
        assert drain_check(trace).is_valid
        assert trace.policy == "sync"

    @pytest.mark.parametrize("seed", [17, 18, 19])
    def test_exponential_skew_stalls(self, simulate_small, seed):
        _, stalls = self._expert_stall(simulate_small, self._burst(seed),
                                       SkewSpec(SkewKind.EXPONENTIAL, 0.38))
        assert np.mean(stalls) >= 0.4

    def test_point_mass(self, simulate_small, burst):
        """Todo o tráfego num expert: os outros 7 GPUs ficam ociosos a fase inteira."""
        trace, stalls = self._expert_stall(simulate_small, burst,
                                           SkewSpec(SkewKind.EXPONENTIAL, 50.0))
        hot = trace.expert_gpu_ids[0]
        assert compute_phase_stall(trace, hot, "expert") == pytest.approx(0.0)
        assert stalls[1:] == [1.0] * 7
        assert np.mean(stalls) >= 7 / 8 - 1e-12

    @pytest.mark.parametrize("seed", [17, 18, 19])
    def test_stall_increases_with_lambda(self, simulate_small, seed):
        burst = self._burst(seed)
        means = [
            np.mean(self._expert_stall(simulate_small, burst, SkewSpec(SkewKind.EXPONENTIAL, lam))[1])
            for lam in (0.1, 0.38, 0.8)
        ]
        assert means[0] < means[1] < means[2]

    def test_phase_structure(self, simulate_small, burst):
        trace, _ = self._expert_stall(simulate_small, burst, SkewSpec())
        kinds = [phase.kind for phase in trace.phases[:5]]
        assert kinds == ["attention", "dispatch", "expert", "combine", "attention"]
        assert trace.phases[-1].kind == "sampler"
        for before, after in zip(trace.phases, trace.phases[1:]):
            assert after.start >= before.end
        assert all(r.completion_time is not None for r in trace.requests.values())

    def test_horizon_respected(self, perf, burst):
        from src.simulation import run_sync_baseline
        model, cluster, workload, arrivals = burst
        trace = run_sync_baseline(model, cluster, workload, SkewSpec(), perf,
                                  horizon_ns=NS_PER_S // 1000, arrivals=arrivals)
        assert not trace.snapshot.drained
        assert drain_check(trace).is_valid


def _perf(attention: tuple, expert: tuple) -> PerfModel:
    return PerfModel(attention=LayerCostParams(*attention), expert=LayerCostParams(*expert))


@pytest.mark.slow
@pytest.mark.integration
@pytest.mark.scheduler
class TestSchedulerAblation:
    """MTFS, FLFS e defrag sobre o mesmo workload com experts caros por execução."""

    MODEL = ModelConfig(num_blocks=8, num_experts=8, top_k=1)
    # custo fixo do expert ~ tempo de carregar os pesos
    PERF = ((50_000, 1_000, 0), (300_000, 2_000))
    TUNED = SchedulerPolicy(SchedulerKind.DEFRAG, lookahead_depth=2, weight_decay=0.9,
                            lookahead_divisor=1.0)

    @pytest.fixture(scope="class")
    def summaries(self):
        cluster = make_cluster(self.MODEL, attention_gpus=4, expert_gpus=4, kv_slots=6000)
        workload = WorkloadSpec(1400.0, (30, 70), (10, 30), duration=1.5, seed=1)
        perf = _perf(*self.PERF)
        policies = {
            "mtfs": SchedulerPolicy(SchedulerKind.MTFS),
            "flfs": SchedulerPolicy(SchedulerKind.FLFS),
            "defrag": self.TUNED,
        }
        return {
            name: summarize(run(self.MODEL, cluster, workload, SkewSpec(), policy, perf))
            for name, policy in policies.items()
        }

    def test_defrag_grows_expert_batches(self, summaries):
        ratio = summaries["defrag"].mean_batch["expert"] / summaries["mtfs"].mean_batch["expert"]
        assert ratio >= 1.3

    def test_flfs_starves(self, summaries):
        assert summaries["flfs"].completion_ratio < 0.5

    def test_defrag_keeps_up(self, summaries):
        defrag = summaries["defrag"].completion_ratio
        assert defrag >= 0.9
        assert defrag >= summaries["flfs"].completion_ratio + 0.1
        assert defrag >= summaries["mtfs"].completion_ratio


@pytest.mark.slow
@pytest.mark.integration
class TestSaturation:
    """AEP contra SyncEP acima da saturação, perf padrão."""

    @staticmethod
    def _ratio(top_k: int, seed: int = 1) -> float:
        model = ModelConfig(num_blocks=8, num_experts=8, top_k=top_k)
        cluster = make_cluster(model, attention_gpus=4, expert_gpus=4)
        workload = WorkloadSpec(6000.0, (50, 150), (10, 30), duration=1.5, seed=seed)
        throughput = {}
        for mode in (SimMode.AEP, SimMode.SYNC_EP):
            trace = run(model, cluster, workload, SkewSpec(), SchedulerPolicy(), PerfModel(),
                        mode=mode)
            throughput[mode] = summarize(trace).throughput_tokens_per_s
        return throughput[SimMode.AEP] / throughput[SimMode.SYNC_EP]

    @pytest.mark.parametrize("top_k", [1, 2])
    def test_aep_beats_sync(self, top_k):
        assert self._ratio(top_k) >= 1.3

    def test_top1_margin(self):
        assert self._ratio(1, seed=2) >= 1.5


@pytest.mark.slow
@pytest.mark.integration
class TestScalability:
    """
    De 8 para 16 experts (e GPUs de expert), metade do tráfego entre nós.

    Carga concentrada num expert diferente por bloco e experts caros por token:
    o AEP aproveita os GPUs novos, o SyncEP continua preso ao expert quente de cada bloco.
    """

    ATTENTION_GPUS = 4
    PERF = ((100_000, 1_000, 1), (64_000, 20_000))
    SKEW = SkewSpec(SkewKind.EXPONENTIAL, 0.38, per_block_shuffle=True)

    def _throughput(self, num_experts: int, mode: SimMode, duration: float) -> float:
        model = ModelConfig(num_blocks=8, num_experts=num_experts, top_k=1)
        attention = self.ATTENTION_GPUS
        if num_experts == 8:
            node_of = [0] * (attention + 8)
        else:
            node_of = [int(g >= attention // 2) for g in range(attention)] + [0] * 8 + [1] * 8
        cluster = build_cluster(model, attention, num_experts, 65536, node_of=node_of)
        workload = WorkloadSpec(12000.0, (50, 150), (10, 30), duration=duration, seed=1)
        trace = run(model, cluster, workload, self.SKEW, SchedulerPolicy(), _perf(*self.PERF),
                    mode=mode)
        return summarize(trace).throughput_tokens_per_s

    def _gain(self, mode: SimMode, duration: float) -> float:
        return self._throughput(16, mode, duration) / self._throughput(8, mode, duration)

    @pytest.fixture(scope="class")
    def gains(self):
        # iterações síncronas longas: janela de 3 s para estabilizar
        return {
            SimMode.AEP: self._gain(SimMode.AEP, 1.0),
            SimMode.SYNC_EP: self._gain(SimMode.SYNC_EP, 3.0),
        }

    def test_aep_scales(self, gains):
        assert gains[SimMode.AEP] >= 1.2

    def test_sync_flat(self, gains):
        assert gains[SimMode.SYNC_EP] < 1.15

    def test_aep_gains_more(self, gains):
        assert gains[SimMode.AEP] > gains[SimMode.SYNC_EP] + 0.1


def _random_configs(seed: int, count: int) -> list:
    """Configurações pequenas sorteadas: forma do modelo, cluster, política e workload."""
    rng = np.random.default_rng(seed)
    configs = []
    for _ in range(count):
        num_experts = int(rng.integers(1, 9))
        configs.append(dict(
            num_blocks=int(rng.integers(1, 7)),
            num_experts=num_experts,
            top_k=int(rng.integers(1, min(3, num_experts) + 1)),
            attention_gpus=int(rng.integers(1, 4)),
            expert_gpus=int(rng.integers(1, min(4, num_experts) + 1)),
            kind=list(SchedulerKind)[int(rng.integers(0, len(SchedulerKind)))],
            lam=float(rng.choice([0.0, 0.38, 1.0])),
            rate=float(rng.integers(100, 601)),
            seed=int(rng.integers(0, 2**31)),
        ))
    return configs


def _simulate_random(simulate_small, config: dict):
    model = ModelConfig(num_blocks=config["num_blocks"], num_experts=config["num_experts"],
                        top_k=config["top_k"], hidden_dim=1024)
    cluster = make_cluster(model, attention_gpus=config["attention_gpus"],
                           expert_gpus=config["expert_gpus"])
    workload = WorkloadSpec(config["rate"], (5, 40), (1, 10), duration=0.02, seed=config["seed"])
    return simulate_small(model, workload, policy=SchedulerPolicy(config["kind"]),
                          skew=SkewSpec(SkewKind.EXPONENTIAL, config["lam"]), cluster=cluster)


@pytest.mark.slow
@pytest.mark.audit
class TestRandomizedRuns:
    """Execuções sorteadas (seed fixa) que precisam drenar, auditar e fechar a contabilidade."""

    @pytest.mark.parametrize("config", _random_configs(7, 50))
    def test_drains_and_audits(self, simulate_small, config):
        trace = _simulate_random(simulate_small, config)
        report = drain_check(trace)

        assert report.is_valid, [issue.message for issue in report.issues]
        assert trace.snapshot.drained
        assert len(trace.completed_requests()) == len(trace.requests)

    @pytest.mark.parametrize("config", _random_configs(8, 20))
    def test_accounting_and_determinism(self, simulate_small, config, tmp_path):
        trace = _simulate_random(simulate_small, config)

        engine = sum(gpu.queue_delay_ns for gpu in trace.snapshot.gpus)
        assert queue_delay_integral(trace) == engine

        end = trace.snapshot.end_time
        if end > 0:
            for gpu in trace.snapshot.gpus:
                durations = sum(r.duration for r in trace.executions if r.gpu == gpu.gpu)
                assert durations == gpu.busy_ns
                stall = compute_stall(trace, gpu.gpu, (0, end))
                assert (1.0 - stall) == pytest.approx(gpu.busy_ns / end, abs=1e-9)

        emit_csv(trace, tmp_path / "a")
        emit_csv(_simulate_random(simulate_small, config), tmp_path / "b")
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        _, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
        assert mismatch == [] and errors == []
