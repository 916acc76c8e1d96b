"""
Métricas de desempenho
Throughput, latência entre tokens (ITL), ocupação/ociosidade por GPU, tamanho médio de
batch e séries de taxa de chegada/conclusão.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..core.schemas import NS_PER_MS, NS_PER_S, LayerKind, RequestState
from ..simulation.trace import SimTrace

logger = logging.getLogger(__name__)

Window = Tuple[int, int]
Ledger = Union[Mapping[int, RequestState], Iterable[RequestState]]


def _requests(ledger: Ledger) -> List[RequestState]:
    if isinstance(ledger, Mapping):
        return [ledger[key] for key in sorted(ledger)]
    return list(ledger)


@dataclass
class ItlStats:
    """Estatísticas de ITL em ns; `count == 0` indica ausência de amostras."""
    count: int = 0
    mean_ns: Optional[float] = None
    median_ns: Optional[float] = None
    p99_ns: Optional[float] = None

    @property
    def has_samples(self) -> bool:
        return self.count > 0


def itl_samples(ledger: Ledger, window: Window) -> np.ndarray:
    """Intervalos entre tokens consecutivos cujo token posterior cai na janela."""
    start, end = window
    gaps: List[np.ndarray] = []
    for request in _requests(ledger):
        times = np.asarray(request.per_token_times, dtype=np.int64)
        if len(times) < 2:
            continue
        later = times[1:]
        mask = (later >= start) & (later < end)
        gaps.append(np.diff(times)[mask])
    return np.concatenate(gaps) if gaps else np.empty(0, dtype=np.int64)


def compute_itl(ledger: Ledger, window: Window) -> ItlStats:
    samples = itl_samples(ledger, window)
    if samples.size == 0:
        return ItlStats()
    return ItlStats(
        count=int(samples.size),
        mean_ns=float(samples.mean()),
        median_ns=float(np.median(samples)),
        p99_ns=float(np.percentile(samples, 99)),
    )


def compute_throughput(ledger: Ledger, window: Window) -> float:
    """Emissões de tokens dentro da janela por segundo."""
    start, end = window
    if end <= start:
        raise ValueError("Janela com duração não positiva")
    emitted = sum(
        1 for request in _requests(ledger) for t in request.per_token_times if start <= t < end
    )
    return emitted / ((end - start) / NS_PER_S)


def _busy_in_window(trace: SimTrace, gpu: int, window: Window) -> int:
    start, end = window
    busy = 0
    for record in trace.executions:
        if record.gpu != gpu:
            continue
        overlap = min(record.end, end) - max(record.start, start)
        if overlap > 0:
            busy += overlap
    return busy


def compute_busy(trace: SimTrace, gpu: int, window: Window) -> float:
    length = window[1] - window[0]
    if length <= 0:
        raise ValueError("Janela com duração não positiva")
    return _busy_in_window(trace, gpu, window) / length


def compute_stall(trace: SimTrace, gpu: int, window: Window) -> float:
    """1 - fração da janela em que o GPU executa algo."""
    return 1.0 - compute_busy(trace, gpu, window)


def compute_phase_stall(trace: SimTrace, gpu: int, kind: str = "expert") -> float:
    """
    Ociosidade do GPU dentro das fases síncronas de um tipo.

    1 - (tempo ocupado dentro das fases) / (duração total das fases).
    """
    phases = [phase for phase in trace.phases if phase.kind == kind and phase.end > phase.start]
    total = sum(phase.end - phase.start for phase in phases)
    if total == 0:
        return 0.0
    busy = sum(_busy_in_window(trace, gpu, (phase.start, phase.end)) for phase in phases)
    return 1.0 - busy / total


def compute_rate_series(ledger: Ledger, bucket_ns: int, end_ns: int) -> pd.DataFrame:
    """Chegadas e conclusões por intervalo de `bucket_ns`."""
    if bucket_ns <= 0:
        raise ValueError("bucket_ns precisa ser > 0")
    buckets = max(1, -(-end_ns // bucket_ns))
    arrivals = np.zeros(buckets, dtype=np.int64)
    completions = np.zeros(buckets, dtype=np.int64)
    for request in _requests(ledger):
        if request.arrival_time < end_ns:
            arrivals[request.arrival_time // bucket_ns] += 1
        if request.completion_time is not None and request.completion_time < end_ns:
            completions[request.completion_time // bucket_ns] += 1
    return pd.DataFrame({
        "bucket_start_ns": np.arange(buckets, dtype=np.int64) * bucket_ns,
        "arrivals": arrivals,
        "completions": completions,
    })


def steady_window(trace: SimTrace, fractions: Tuple[float, float] = (0.2, 0.9)) -> Window:
    """Janela estacionária como frações da duração do workload."""
    base = trace.duration_ns if trace.duration_ns > 0 else trace.snapshot.end_time
    return int(base * fractions[0]), int(base * fractions[1])


@dataclass
class SummaryStats:
    """Resumo de uma simulação."""
    mode: str
    policy: str
    rate: float
    window_start_ns: int
    window_end_ns: int
    throughput_tokens_per_s: float
    itl_mean_ms: Optional[float]
    itl_median_ms: Optional[float]
    itl_p99_ms: Optional[float]
    itl_samples: int
    requests_arrived: int
    requests_completed: int
    completion_ratio: Optional[float]
    mean_batch: Dict[str, float] = field(default_factory=dict)
    busy_fraction: Dict[int, float] = field(default_factory=dict)
    stall_fraction: Dict[int, float] = field(default_factory=dict)
    mean_expert_stall: float = 0.0

    def to_row(self) -> Dict[str, object]:
        """Linha plana para summary.csv."""
        row = {key: value for key, value in asdict(self).items()
               if key not in ("mean_batch", "busy_fraction", "stall_fraction")}
        for kind in LayerKind:
            row[f"mean_batch_{kind.value}"] = self.mean_batch.get(kind.value, 0.0)
        return row


def summarize(trace: SimTrace, window_fractions: Tuple[float, float] = (0.2, 0.9)) -> SummaryStats:
    """Calcula o SummaryStats na janela estacionária."""
    window = steady_window(trace, window_fractions)
    has_window = window[1] > window[0]
    itl = compute_itl(trace.requests, window) if has_window else ItlStats()
    throughput = compute_throughput(trace.requests, window) if has_window else 0.0

    start, end = window
    arrived = sum(1 for r in trace.requests.values() if start <= r.arrival_time < end)
    completed = sum(
        1 for r in trace.requests.values()
        if r.completion_time is not None and start <= r.completion_time < end
    )

    batches: Dict[str, List[int]] = {}
    for record in trace.executions:
        batches.setdefault(record.layer_id.kind.value, []).append(record.batch_size)
    mean_batch = {kind: float(np.mean(sizes)) for kind, sizes in sorted(batches.items())}

    busy = {gpu: compute_busy(trace, gpu, window) if has_window else 0.0
            for gpu in range(trace.num_gpus)}
    stall = {gpu: 1.0 - value for gpu, value in busy.items()}
    expert_stalls = [stall[gpu] for gpu in trace.expert_gpu_ids]

    def _ms(value: Optional[float]) -> Optional[float]:
        return None if value is None else value / NS_PER_MS

    return SummaryStats(
        mode=trace.mode,
        policy=trace.policy,
        rate=trace.arrival_rate,
        window_start_ns=start,
        window_end_ns=end,
        throughput_tokens_per_s=throughput,
        itl_mean_ms=_ms(itl.mean_ns),
        itl_median_ms=_ms(itl.median_ns),
        itl_p99_ms=_ms(itl.p99_ns),
        itl_samples=itl.count,
        requests_arrived=arrived,
        requests_completed=completed,
        completion_ratio=completed / arrived if arrived else None,
        mean_batch=mean_batch,
        busy_fraction=busy,
        stall_fraction=stall,
        mean_expert_stall=float(np.mean(expert_stalls)) if expert_stalls else 0.0,
    )
