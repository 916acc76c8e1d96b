"""
Baseline de Expert Parallelism síncrono
Cada iteração de decode leva o batch ativo inteiro por todos os blocos, com barreira
all-to-all antes e depois de cada fase de experts.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.schemas import ClusterConfig, LayerId, LayerKind, ModelConfig, RequestState
from ..perf.perf_model import PerfModel
from ..workload.arrivals import Arrival, WorkloadSpec, gen_arrivals
from ..workload.load_balancer import LoadBalancer
from ..workload.routing import ExpertRouter, SkewSpec
from .events import SimMode
from .trace import ExecutionRecord, FinalSnapshot, GpuSnapshot, PhaseRecord, SimTrace

logger = logging.getLogger(__name__)


class SyncEpSimulator:
    """Simulação dirigida por iterações com barreiras globais."""

    def __init__(self, model: ModelConfig, cluster: ClusterConfig, workload: WorkloadSpec,
                 skew: SkewSpec, perf: PerfModel, horizon_ns: Optional[int] = None,
                 arrivals: Optional[Sequence[Arrival]] = None):
        self.model = model
        self.cluster = cluster
        self.workload = workload
        self.perf = perf
        self.horizon_ns = horizon_ns if horizon_ns is not None else 2 * workload.duration_ns
        self.arrivals = list(arrivals) if arrivals is not None else gen_arrivals(workload)
        self.router = ExpertRouter(model, skew, seed=workload.seed)
        self.balancer = LoadBalancer(cluster.dp_degree, cluster.kv_slots_per_attention_gpu)

        self.active: List[List[RequestState]] = [[] for _ in range(cluster.dp_degree)]
        self.kv_used = [0] * cluster.dp_degree
        self.block_tables: List[Dict[int, int]] = [{} for _ in range(cluster.dp_degree)]
        self.busy_ns = [0] * cluster.num_gpus
        self.iterations = 0

        # GPU global que hospeda cada expert (igual em todos os blocos no placement padrão)
        self.expert_gpu_of = np.array([
            [cluster.placement[LayerId.expert(b, e)] for e in range(model.num_experts)]
            for b in range(model.num_blocks)
        ])

        self.trace = SimTrace(
            mode=SimMode.SYNC_EP.value,
            policy="sync",
            num_blocks=model.num_blocks,
            num_experts=model.num_experts,
            top_k=model.top_k,
            attention_gpus=cluster.attention_gpus,
            expert_gpus=cluster.expert_gpus,
            duration_ns=workload.duration_ns,
            horizon_ns=self.horizon_ns,
            arrival_rate=workload.arrival_rate,
        )

    def run(self) -> SimTrace:
        logger.info(f"Simulação SyncEP: {len(self.arrivals)} requisições")
        now = 0
        next_arrival = 0
        while now < self.horizon_ns:
            while next_arrival < len(self.arrivals) and self.arrivals[next_arrival].time <= now:
                self._arrive(next_arrival, self.arrivals[next_arrival])
                next_arrival += 1

            if not any(self.active):
                if next_arrival >= len(self.arrivals):
                    break
                # ocioso até a próxima chegada
                now = max(now, self.arrivals[next_arrival].time)
                continue

            now = self._iteration(now)

        drained = not any(self.active) and next_arrival >= len(self.arrivals)
        if not drained:
            logger.warning(f"Horizonte atingido com {sum(map(len, self.active))} requisições ativas")
        self._snapshot(now, drained)
        completed = sum(1 for req in self.trace.requests.values() if req.is_complete)
        logger.info(
            f"Simulação SyncEP concluída: {self.iterations} iterações, "
            f"{completed}/{len(self.arrivals)} requisições completas"
        )
        return self.trace

    def _arrive(self, request_id: int, arrival: Arrival) -> None:
        request = RequestState(request_id, arrival.input_len, arrival.output_len, arrival.time)
        self.trace.requests[request_id] = request
        self._admit(self.balancer.submit(request, arrival.time))

    def _admit(self, admitted: List[Tuple[RequestState, int]]) -> None:
        for request, rank in admitted:
            self.active[rank].append(request)
            self.block_tables[rank][request.request_id] = request.input_len
            self.kv_used[rank] += request.input_len

    def _record(self, gpu: int, layer: LayerId, size: int, start: int, duration: int,
                context: int = 0) -> None:
        self.trace.executions.append(ExecutionRecord(gpu, layer, size, start, start + duration, 0, context))
        self.busy_ns[gpu] += duration

    def _all_to_all(self, legs: np.ndarray, src_gpus: List[int], dst_gpus: List[int]) -> int:
        """Custo da barreira: a maior transferência par a par (fase 1 + fase 2)."""
        worst = 0
        for i, src in enumerate(src_gpus):
            for j, dst in enumerate(dst_gpus):
                count = int(legs[i, j])
                if not count or src == dst:
                    continue
                phase1, phase2 = self.perf.transfer_time(
                    count * self.model.token_bytes, src, dst, self.cluster
                )
                worst = max(worst, phase1 + phase2)
        return worst

    def _iteration(self, start: int) -> int:
        model, cluster = self.model, self.cluster
        ranks = [r for r in range(cluster.dp_degree) if self.active[r]]
        attention_gpus = [cluster.attention_gpu(r) for r in range(cluster.dp_degree)]
        expert_gpus = [cluster.expert_gpu(g) for g in range(cluster.expert_gpus)]
        now = start

        # um slot KV por requisição no início do passo
        for r in ranks:
            for request in self.active[r]:
                self.block_tables[r][request.request_id] += 1
                self.kv_used[r] += 1
                counters = self.trace.counter(request.request_id)
                counters.block0_visits += 1

        for block in range(model.num_blocks):
            # fase de atenção
            phase_end = now
            for r in ranks:
                batch = self.active[r]
                context = sum(req.input_len + req.generated for req in batch)
                duration = self.perf.exec_time(LayerKind.ATTENTION, len(batch), context)
                self._record(attention_gpus[r], LayerId.attention(block, r), len(batch), now,
                             duration, context)
                phase_end = max(phase_end, now + duration)
                for request in batch:
                    self.trace.counter(request.request_id).attention_execs += 1
            self.trace.phases.append(PhaseRecord("attention", block, now, phase_end))
            now = phase_end

            # roteamento e dispatch
            legs = np.zeros((cluster.dp_degree, cluster.expert_gpus), dtype=np.int64)
            expert_load = np.zeros(model.num_experts, dtype=np.int64)
            for r in ranks:
                experts, _ = self.router.route(block, len(self.active[r]))
                chosen = experts.ravel()
                expert_load += np.bincount(chosen, minlength=model.num_experts)
                gpu_index = self.expert_gpu_of[block][chosen] - cluster.attention_gpus
                legs[r] += np.bincount(gpu_index, minlength=cluster.expert_gpus)
                for request in self.active[r]:
                    self.trace.counter(request.request_id).expert_legs += model.top_k

            dispatch_ns = self._all_to_all(legs, attention_gpus, expert_gpus)
            self.trace.phases.append(PhaseRecord("dispatch", block, now, now + dispatch_ns))
            now += dispatch_ns

            # fase de experts: experts colocados no mesmo GPU executam em série
            phase_end = now
            for gpu in expert_gpus:
                cursor = now
                for expert in range(model.num_experts):
                    load = int(expert_load[expert])
                    if not load or self.expert_gpu_of[block][expert] != gpu:
                        continue
                    duration = self.perf.exec_time(LayerKind.EXPERT, load)
                    self._record(gpu, LayerId.expert(block, expert), load, cursor, duration)
                    cursor += duration
                phase_end = max(phase_end, cursor)
            self.trace.phases.append(PhaseRecord("expert", block, now, phase_end))
            now = phase_end

            combine_ns = self._all_to_all(legs.T, expert_gpus, attention_gpus)
            self.trace.phases.append(PhaseRecord("combine", block, now, now + combine_ns))
            now += combine_ns

        # sampler
        phase_end = now
        for r in ranks:
            batch = self.active[r]
            duration = self.perf.exec_time(LayerKind.SAMPLER, len(batch))
            self._record(attention_gpus[r], LayerId.sampler(r, model.num_blocks), len(batch),
                         now, duration)
            phase_end = max(phase_end, now + duration)
        self.trace.phases.append(PhaseRecord("sampler", model.num_blocks, now, phase_end))
        now = phase_end

        finished: List[RequestState] = []
        for r in ranks:
            batch, self.active[r] = self.active[r], []
            for request in batch:
                request.record_token(now)
                self.trace.counter(request.request_id).samples += 1
                if request.is_finished:
                    request.completion_time = now
                    self.kv_used[r] -= self.block_tables[r].pop(request.request_id)
                    finished.append(request)
                else:
                    self.active[r].append(request)
        # admitidos na liberação entram na próxima iteração
        for request in finished:
            self._admit(self.balancer.release(request, now))
        self.iterations += 1
        return now

    def _snapshot(self, now: int, drained: bool) -> None:
        cluster = self.cluster
        gpus = []
        for gpu in range(cluster.num_gpus):
            is_attention = cluster.is_attention_gpu(gpu)
            gpus.append(GpuSnapshot(
                gpu=gpu,
                kv_used=self.kv_used[gpu] if is_attention else 0,
                kv_capacity=cluster.kv_slots_per_attention_gpu if is_attention else 0,
                block_table=dict(sorted(self.block_tables[gpu].items())) if is_attention else {},
                busy_ns=self.busy_ns[gpu],
                queue_delay_ns=0,
                queue_depths={},
            ))
        self.trace.snapshot = FinalSnapshot(
            end_time=now,
            drained=drained,
            gpus=gpus,
            admission_queue=[request.request_id for request in self.balancer.queue],
        )


def run_sync_baseline(model: ModelConfig, cluster: ClusterConfig, workload: WorkloadSpec,
                      skew: SkewSpec, perf: PerfModel, horizon_ns: Optional[int] = None,
                      arrivals: Optional[Sequence[Arrival]] = None) -> SimTrace:
    """Executa o baseline síncrono sobre o mesmo workload do modo AEP."""
    return SyncEpSimulator(model, cluster, workload, skew, perf, horizon_ns, arrivals).run()
