"""
Trace de simulação
Registros de execução, transferência, profundidade de fila e fases síncronas, mais o
livro-razão de requisições e o retrato final usado pela auditoria.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

from ..core.schemas import LayerId, RequestState


@dataclass
class ExecutionRecord:
    gpu: int
    layer_id: LayerId
    batch_size: int
    start: int
    end: int
    queue_delay_sum: int
    total_context: int = 0

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass
class TransferRecord:
    src: int
    dst: int
    bytes: int
    tokens: int
    issue: int
    phase1_end: int
    phase2_start: int
    phase2_end: int


@dataclass
class DepthSample:
    time: int
    gpu: int
    layer_id: LayerId
    depth: int


@dataclass
class PhaseRecord:
    """Janela de uma fase síncrona (attention, dispatch, expert, combine, sampler)."""
    kind: str
    block: int
    start: int
    end: int


@dataclass
class RequestCounters:
    """Contadores de auditoria por requisição."""
    attention_execs: int = 0
    block0_visits: int = 0
    expert_legs: int = 0
    samples: int = 0
    pooled_legs: int = 0
    merges: int = 0
    merged_legs: int = 0


@dataclass
class TokenSnapshot:
    """Token ainda vivo ao fim da simulação (em fila, em trânsito ou executando)."""
    request_id: int
    layer: str
    payload_tensors: int
    where: str


@dataclass
class PoolSnapshot:
    gpu: int
    request_id: int
    layer: str
    received: int


@dataclass
class GpuSnapshot:
    gpu: int
    kv_used: int
    kv_capacity: int
    block_table: Dict[int, int]
    busy_ns: int
    queue_delay_ns: int
    queue_depths: Dict[str, int]


@dataclass
class FinalSnapshot:
    end_time: int = 0
    drained: bool = True
    gpus: List[GpuSnapshot] = field(default_factory=list)
    pool: List[PoolSnapshot] = field(default_factory=list)
    tokens: List[TokenSnapshot] = field(default_factory=list)
    admission_queue: List[int] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FinalSnapshot":
        return cls(
            end_time=data["end_time"],
            drained=data["drained"],
            gpus=[
                GpuSnapshot(**{**gpu, "block_table": {int(k): v for k, v in gpu["block_table"].items()}})
                for gpu in data["gpus"]
            ],
            pool=[PoolSnapshot(**entry) for entry in data["pool"]],
            tokens=[TokenSnapshot(**token) for token in data["tokens"]],
            admission_queue=list(data["admission_queue"]),
        )


@dataclass
class SimTrace:
    """Resultado completo de uma simulação."""
    mode: str
    policy: str
    num_blocks: int
    num_experts: int
    top_k: int
    attention_gpus: int
    expert_gpus: int
    duration_ns: int
    horizon_ns: int
    arrival_rate: float = 0.0
    executions: List[ExecutionRecord] = field(default_factory=list)
    transfers: List[TransferRecord] = field(default_factory=list)
    requests: Dict[int, RequestState] = field(default_factory=dict)
    queue_depth: List[DepthSample] = field(default_factory=list)
    phases: List[PhaseRecord] = field(default_factory=list)
    counters: Dict[int, RequestCounters] = field(default_factory=dict)
    snapshot: FinalSnapshot = field(default_factory=FinalSnapshot)
    dropped_transfers: int = 0

    @property
    def num_gpus(self) -> int:
        return self.attention_gpus + self.expert_gpus

    @property
    def attention_gpu_ids(self) -> List[int]:
        return list(range(self.attention_gpus))

    @property
    def expert_gpu_ids(self) -> List[int]:
        return list(range(self.attention_gpus, self.num_gpus))

    def counter(self, request_id: int) -> RequestCounters:
        entry = self.counters.get(request_id)
        if entry is None:
            entry = self.counters[request_id] = RequestCounters()
        return entry

    def busy_by_gpu(self) -> Dict[int, int]:
        """Tempo ocupado por GPU recalculado a partir das execuções."""
        busy = {gpu: 0 for gpu in range(self.num_gpus)}
        for record in self.executions:
            busy[record.gpu] += record.duration
        return busy

    def completed_requests(self) -> List[RequestState]:
        return [req for _, req in sorted(self.requests.items()) if req.is_complete]

    def state_dict(self) -> Dict[str, Any]:
        """Metadados, contadores e retrato final (serializáveis em JSON)."""
        return {
            "mode": self.mode,
            "policy": self.policy,
            "num_blocks": self.num_blocks,
            "num_experts": self.num_experts,
            "top_k": self.top_k,
            "attention_gpus": self.attention_gpus,
            "expert_gpus": self.expert_gpus,
            "duration_ns": self.duration_ns,
            "horizon_ns": self.horizon_ns,
            "arrival_rate": self.arrival_rate,
            "dropped_transfers": self.dropped_transfers,
            "counters": {str(rid): asdict(c) for rid, c in sorted(self.counters.items())},
            "snapshot": asdict(self.snapshot),
        }

    @classmethod
    def from_state_dict(cls, state: Dict[str, Any]) -> "SimTrace":
        trace = cls(**{
            key: state[key] for key in (
                "mode", "policy", "num_blocks", "num_experts", "top_k", "attention_gpus",
                "expert_gpus", "duration_ns", "horizon_ns", "arrival_rate", "dropped_transfers",
            )
        })
        trace.counters = {int(rid): RequestCounters(**c) for rid, c in state["counters"].items()}
        trace.snapshot = FinalSnapshot.from_dict(state["snapshot"])
        return trace
