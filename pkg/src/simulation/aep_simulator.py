"""
Simulador AEP
Motor de eventos discretos: coordenador -> runtimes por GPU -> comunicação em duas fases.
Cada GPU escolhe sua próxima camada sozinho; não há barreira entre GPUs.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from ..core.exceptions import DeadlockError
from ..core.schemas import (
    COORDINATOR,
    ClusterConfig,
    LayerId,
    LayerKind,
    ModelConfig,
    RequestState,
    TokenMeta,
)
from ..engine.dispatcher import dispatch
from ..engine.runtime import ExecutionBatch, RuntimeState, form_batch, receptor_ingest
from ..engine.schedulers import SchedulerPolicy, make_scheduler
from ..perf.perf_model import PerfModel
from ..workload.arrivals import Arrival, WorkloadSpec, gen_arrivals
from ..workload.load_balancer import LoadBalancer
from ..workload.routing import ExpertRouter, SkewSpec
from .events import EventKind, EventQueue, SimMode
from .sync_baseline import run_sync_baseline
from .trace import (
    DepthSample,
    ExecutionRecord,
    FinalSnapshot,
    GpuSnapshot,
    PoolSnapshot,
    SimTrace,
    TokenSnapshot,
    TransferRecord,
)

logger = logging.getLogger(__name__)

# (src, dst, tokens) -> True descarta a transferência (injeção de falhas em testes)
DropPredicate = Callable[[int, int, List[TokenMeta]], bool]


@dataclass
class Transfer:
    """Lote em trânsito entre dois endpoints."""
    transfer_id: int
    src: int
    dst: int
    tokens: List[TokenMeta]
    num_bytes: int
    issue: int
    phase2_ns: int
    ingress: bool = False
    completed: List[int] = field(default_factory=list)


class AepSimulator:
    """Uma instância de simulação AEP; todo o estado mutável pertence a ela."""

    def __init__(self, model: ModelConfig, cluster: ClusterConfig, workload: WorkloadSpec,
                 skew: SkewSpec, policy: SchedulerPolicy, perf: PerfModel,
                 horizon_ns: Optional[int] = None, drop_transfer: Optional[DropPredicate] = None,
                 arrivals: Optional[Sequence[Arrival]] = None):
        self.model = model
        self.cluster = cluster
        self.workload = workload
        self.policy = policy
        self.perf = perf
        self.drop_transfer = drop_transfer
        self.horizon_ns = horizon_ns if horizon_ns is not None else 2 * workload.duration_ns
        self.arrivals = list(arrivals) if arrivals is not None else gen_arrivals(workload)

        self.router = ExpertRouter(model, skew, seed=workload.seed)
        self.scheduler = make_scheduler(policy)
        self.events = EventQueue()
        self.balancer = LoadBalancer(cluster.dp_degree, cluster.kv_slots_per_attention_gpu)
        self.runtimes: List[RuntimeState] = [
            RuntimeState(
                gpu_id=gpu,
                hosted=cluster.hosted_layers(gpu),
                num_blocks=model.num_blocks,
                num_experts=model.num_experts,
                top_k=model.top_k,
                kv_capacity=cluster.kv_slots_per_attention_gpu if cluster.is_attention_gpu(gpu) else 0,
                max_batch=policy.max_batch,
            )
            for gpu in range(cluster.num_gpus)
        ]

        self.comm_free: Dict[int, int] = {}
        self.link_free: Dict[Tuple[int, int], int] = {}
        self.in_transit: Dict[int, Transfer] = {}
        self._next_transfer = 0

        self.trace = SimTrace(
            mode=SimMode.AEP.value,
            policy=policy.kind.value,
            num_blocks=model.num_blocks,
            num_experts=model.num_experts,
            top_k=model.top_k,
            attention_gpus=cluster.attention_gpus,
            expert_gpus=cluster.expert_gpus,
            duration_ns=workload.duration_ns,
            horizon_ns=self.horizon_ns,
            arrival_rate=workload.arrival_rate,
        )

    # ------------------------------------------------------------------
    # Laço principal
    # ------------------------------------------------------------------

    def run(self) -> SimTrace:
        logger.info(
            f"Simulação AEP: {len(self.arrivals)} requisições, política {self.policy.kind.value}, "
            f"horizonte {self.horizon_ns / 1e9:.3f}s"
        )
        for request_id, arrival in enumerate(self.arrivals):
            self.events.push(arrival.time, EventKind.REQUEST_ARRIVAL, (request_id, arrival))

        handlers = {
            EventKind.REQUEST_ARRIVAL: self._on_arrival,
            EventKind.PHASE1_ARRIVE: self._on_phase1,
            EventKind.PHASE2_COMPLETE: self._on_phase2,
            EventKind.EXEC_DONE: self._on_exec_done,
        }
        while len(self.events):
            if self.events.peek_time() > self.horizon_ns:
                logger.warning(
                    f"Horizonte atingido com {len(self.events)} evento(s) pendentes"
                )
                break
            event = self.events.pop()
            handlers[event.kind](event.time, event.payload)

        drained = len(self.events) == 0
        if drained:
            stuck = self._live_tokens()
            if stuck:
                logger.error(f"Fila de eventos vazia com {len(stuck)} token(s) retidos")
                raise DeadlockError(stuck)

        self._snapshot(drained)
        completed = sum(1 for req in self.trace.requests.values() if req.is_complete)
        logger.info(
            f"Simulação AEP concluída: {self.events.processed} eventos, "
            f"{completed}/{len(self.arrivals)} requisições completas"
        )
        return self.trace

    # ------------------------------------------------------------------
    # Coordenador
    # ------------------------------------------------------------------

    def _on_arrival(self, now: int, payload: Tuple[int, Arrival]) -> None:
        request_id, arrival = payload
        request = RequestState(request_id, arrival.input_len, arrival.output_len, now)
        self.trace.requests[request_id] = request
        self._admit(self.balancer.submit(request, now), now)

    def _admit(self, admitted: List[Tuple[RequestState, int]], now: int) -> None:
        for request, rank in admitted:
            token = TokenMeta(
                request_id=request.request_id,
                layer_id=LayerId.attention(0, rank),
                payload_bytes=self.model.token_bytes,
                context_len=request.input_len,
            )
            self._send(COORDINATOR, self.cluster.attention_gpu(rank), [token], now, ingress=True)

    def _complete(self, request_ids: List[int], now: int) -> None:
        for request_id in request_ids:
            request = self.trace.requests[request_id]
            request.completion_time = now
            self._admit(self.balancer.release(request, now), now)

    # ------------------------------------------------------------------
    # Comunicação
    # ------------------------------------------------------------------

    def _send(self, src: int, dst: int, tokens: List[TokenMeta], now: int,
              ingress: bool = False, completed: Optional[List[int]] = None) -> None:
        if self.drop_transfer is not None and self.drop_transfer(src, dst, tokens):
            self.trace.dropped_transfers += 1
            logger.debug(f"Transferência {src}->{dst} descartada ({len(tokens)} tokens)")
            return

        num_bytes = sum(token.total_bytes for token in tokens)
        phase1, phase2 = self.perf.transfer_time(num_bytes, src, dst, self.cluster)
        # fase 1 serializa na CPU do remetente
        phase1_end = max(now, self.comm_free.get(src, 0)) + phase1
        self.comm_free[src] = phase1_end

        transfer = Transfer(self._next_transfer, src, dst, tokens, num_bytes, now, phase2,
                            ingress=ingress, completed=list(completed or []))
        self._next_transfer += 1
        self.in_transit[transfer.transfer_id] = transfer
        self.events.push(phase1_end, EventKind.PHASE1_ARRIVE, transfer)

    def _on_phase1(self, now: int, transfer: Transfer) -> None:
        # fase 2 serializa por enlace
        link = (transfer.src, transfer.dst)
        start = max(now, self.link_free.get(link, 0))
        end = start + transfer.phase2_ns
        self.link_free[link] = end
        self.trace.transfers.append(TransferRecord(
            src=transfer.src,
            dst=transfer.dst,
            bytes=transfer.num_bytes,
            tokens=len(transfer.tokens),
            issue=transfer.issue,
            phase1_end=now,
            phase2_start=start,
            phase2_end=end,
        ))
        self.events.push(end, EventKind.PHASE2_COMPLETE, transfer)

    def _on_phase2(self, now: int, transfer: Transfer) -> None:
        del self.in_transit[transfer.transfer_id]
        if transfer.dst == COORDINATOR:
            self._complete(transfer.completed, now)
            return

        rt = self.runtimes[transfer.dst]
        if transfer.ingress:
            for token in transfer.tokens:
                rt.admit(token.request_id, self.trace.requests[token.request_id].input_len)
        self._ingest(rt, transfer.tokens, now)

    # ------------------------------------------------------------------
    # Runtime
    # ------------------------------------------------------------------

    def _sample_depth(self, rt: RuntimeState, layer: LayerId, now: int) -> None:
        self.trace.queue_depth.append(DepthSample(now, rt.gpu_id, layer, len(rt.queues[layer])))

    def _ingest(self, rt: RuntimeState, tokens: List[TokenMeta], now: int,
                schedule: bool = True) -> None:
        result = receptor_ingest(rt, tokens, now)
        for token in result.pooled:
            self.trace.counter(token.request_id).pooled_legs += token.payload_tensors
        for token in result.merged:
            counters = self.trace.counter(token.request_id)
            counters.merges += 1
            counters.merged_legs += token.payload_tensors
        for layer in result.touched:
            self._sample_depth(rt, layer, now)
        if schedule and not rt.busy:
            self._try_schedule(rt, now)

    def _try_schedule(self, rt: RuntimeState, now: int) -> None:
        layer = self.scheduler(rt)
        if layer is None:
            return
        batch = form_batch(rt, layer, now)
        self._sample_depth(rt, layer, now)

        duration = self.perf.exec_time(layer.kind, batch.size, batch.total_context)
        end = now + duration
        rt.busy = True
        rt.advance_busy(end)
        rt.busy_ns += duration
        rt.current = batch
        self.trace.executions.append(ExecutionRecord(
            gpu=rt.gpu_id,
            layer_id=layer,
            batch_size=batch.size,
            start=now,
            end=end,
            queue_delay_sum=batch.queue_delay_sum,
            total_context=batch.total_context,
        ))
        self._count_execution(batch)
        self.events.push(end, EventKind.EXEC_DONE, rt.gpu_id)

    def _count_execution(self, batch: ExecutionBatch) -> None:
        layer = batch.layer_id
        for token in batch.tokens:
            counters = self.trace.counter(token.request_id)
            if layer.kind is LayerKind.ATTENTION:
                counters.attention_execs += 1
                if layer.block == 0:
                    counters.block0_visits += 1
            elif layer.kind is LayerKind.EXPERT:
                counters.expert_legs += 1
            else:
                counters.samples += 1

    def _on_exec_done(self, now: int, gpu: int) -> None:
        rt = self.runtimes[gpu]
        batch = rt.current
        rt.current = None
        rt.busy = False

        result = dispatch(batch, self.model, self.cluster, self.router, self.trace.requests, now)
        if result.completed:
            for request in result.completed:
                rt.release(request.request_id)
            self._send(gpu, COORDINATOR, [], now,
                       completed=[request.request_id for request in result.completed])

        local: List[TokenMeta] = []
        for dst, tokens in result.outbound:
            if dst == gpu:
                local.extend(tokens)
            else:
                self._send(gpu, dst, tokens, now)
        if local:
            self._ingest(rt, local, now, schedule=False)
        self._try_schedule(rt, now)

    # ------------------------------------------------------------------
    # Retrato final
    # ------------------------------------------------------------------

    def _live_tokens(self) -> List[TokenSnapshot]:
        live: List[TokenSnapshot] = []
        for rt in self.runtimes:
            for layer in rt.hosted:
                for token in rt.queues[layer].tokens:
                    live.append(TokenSnapshot(token.request_id, layer.label,
                                              token.payload_tensors, f"queue:{rt.gpu_id}"))
            for request_id, layer, received in rt.pool.entries():
                live.append(TokenSnapshot(request_id, layer.label, received, f"pool:{rt.gpu_id}"))
        return live

    def _snapshot(self, drained: bool) -> None:
        tokens = [t for t in self._live_tokens() if not t.where.startswith("pool:")]
        for transfer_id in sorted(self.in_transit):
            transfer = self.in_transit[transfer_id]
            for token in transfer.tokens:
                tokens.append(TokenSnapshot(token.request_id, token.layer_id.label,
                                            token.payload_tensors,
                                            f"transit:{transfer.src}->{transfer.dst}"))
        for rt in self.runtimes:
            if rt.current is not None:
                for token in rt.current.tokens:
                    tokens.append(TokenSnapshot(token.request_id, token.layer_id.label,
                                                token.payload_tensors, f"exec:{rt.gpu_id}"))

        self.trace.snapshot = FinalSnapshot(
            end_time=self.events.now,
            drained=drained,
            gpus=[
                GpuSnapshot(
                    gpu=rt.gpu_id,
                    kv_used=rt.kv_used,
                    kv_capacity=rt.kv_capacity,
                    block_table=dict(sorted(rt.block_table.items())),
                    busy_ns=rt.busy_ns,
                    queue_delay_ns=rt.queue_delay_ns,
                    queue_depths={layer.label: len(rt.queues[layer]) for layer in rt.hosted},
                )
                for rt in self.runtimes
            ],
            pool=[
                PoolSnapshot(rt.gpu_id, request_id, layer.label, received)
                for rt in self.runtimes
                for request_id, layer, received in rt.pool.entries()
            ],
            tokens=tokens,
            admission_queue=[request.request_id for request in self.balancer.queue],
        )


def run(model: ModelConfig, cluster: ClusterConfig, workload: WorkloadSpec, skew: SkewSpec,
        policy: SchedulerPolicy, perf: PerfModel, mode: SimMode = SimMode.AEP,
        horizon_ns: Optional[int] = None, drop_transfer: Optional[DropPredicate] = None,
        arrivals: Optional[Sequence[Arrival]] = None) -> SimTrace:
    """
    Executa uma simulação completa.

    Args:
        model, cluster: Forma do modelo e do cluster (validados antes)
        workload, skew: Fluxo de requisições e desbalanceamento de experts
        policy: Política de escalonamento (ignorada em SYNC_EP)
        perf: Modelo de latência
        mode: AEP ou SYNC_EP
        horizon_ns: Corte de tempo (padrão: 2 x duração)
        drop_transfer: Predicado de injeção de falhas
        arrivals: Fluxo pré-gerado (padrão: gen_arrivals(workload))

    Raises:
        DeadlockError: fila de eventos vazia com tokens retidos
    """
    if mode is SimMode.SYNC_EP:
        return run_sync_baseline(model, cluster, workload, skew, perf, horizon_ns, arrivals=arrivals)
    simulator = AepSimulator(model, cluster, workload, skew, policy, perf,
                             horizon_ns=horizon_ns, drop_transfer=drop_transfer, arrivals=arrivals)
    return simulator.run()
