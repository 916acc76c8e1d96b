"""
Gerador de Carga
Chegadas Poisson com comprimentos de entrada/saída uniformes nos intervalos do workload.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from ..core.schemas import NS_PER_S, ClusterConfig
from ..core.validation_system import ValidationReport, ValidationRule, ValidationSeverity

logger = logging.getLogger(__name__)

# Intervalos (entrada, saída) dos workloads de decode.
WORKLOAD_PRESETS: Dict[str, Tuple[Tuple[int, int], Tuple[int, int]]] = {
    "short": ((30, 70), (70, 130)),
    "medium": ((50, 150), (50, 250)),
    "reasonable": ((100, 300), (100, 500)),
}


@dataclass
class WorkloadSpec:
    """Parâmetros do fluxo de requisições."""
    arrival_rate: float
    input_range: Tuple[int, int]
    output_range: Tuple[int, int]
    duration: float
    seed: int = 0

    @classmethod
    def from_preset(cls, preset: str, arrival_rate: float, duration: float,
                    seed: int = 0) -> "WorkloadSpec":
        if preset not in WORKLOAD_PRESETS:
            raise ValueError(f"Preset de workload desconhecido: {preset}")
        input_range, output_range = WORKLOAD_PRESETS[preset]
        return cls(arrival_rate, input_range, output_range, duration, seed)

    @property
    def duration_ns(self) -> int:
        return int(round(self.duration * NS_PER_S))


class Arrival(NamedTuple):
    """Uma requisição gerada: instante (ns), tokens de entrada e de saída."""
    time: int
    input_len: int
    output_len: int


def gen_arrivals(spec: WorkloadSpec, rng: Optional[np.random.Generator] = None) -> List[Arrival]:
    """
    Gera o fluxo de chegadas.

    Intervalos entre chegadas são exponenciais i.i.d. com média 1/arrival_rate; chegadas
    em t >= duration são descartadas. Determinístico para uma seed fixa.

    Args:
        spec: Especificação do workload
        rng: Gerador opcional (padrão: default_rng(spec.seed))

    Returns:
        Lista ordenada de Arrival
    """
    if spec.duration <= 0 or spec.arrival_rate <= 0:
        return []
    rng = rng if rng is not None else np.random.default_rng(spec.seed)

    expected = spec.arrival_rate * spec.duration
    chunk = int(expected + 6 * math.sqrt(expected) + 16)
    mean_gap = 1.0 / spec.arrival_rate

    times: List[np.ndarray] = []
    clock = 0.0
    while clock < spec.duration:
        gaps = rng.exponential(mean_gap, size=chunk)
        stamps = clock + np.cumsum(gaps)
        clock = float(stamps[-1])
        times.append(stamps[stamps < spec.duration])

    arrival_s = np.concatenate(times) if times else np.empty(0)
    count = len(arrival_s)
    inputs = rng.integers(spec.input_range[0], spec.input_range[1] + 1, size=count)
    outputs = rng.integers(spec.output_range[0], spec.output_range[1] + 1, size=count)
    stamps_ns = np.floor(arrival_s * NS_PER_S).astype(np.int64)

    logger.debug(f"{count} chegadas geradas (taxa {spec.arrival_rate}/s, {spec.duration}s)")
    return [
        Arrival(int(t), int(i), int(o))
        for t, i, o in zip(stamps_ns, inputs, outputs)
    ]


_WORKLOAD_RULES = {
    'rate_positive': ValidationRule('rate_positive', 'arrival_rate > 0', ValidationSeverity.ERROR),
    'range_order': ValidationRule('range_order', 'min <= max nos intervalos', ValidationSeverity.ERROR),
    'range_positive': ValidationRule('range_positive', 'comprimentos >= 1', ValidationSeverity.ERROR),
    'kv_admissible': ValidationRule(
        'kv_admissible', 'input_max + output_max cabe num rank', ValidationSeverity.ERROR
    ),
}


def validate_workload(spec: WorkloadSpec, cluster: ClusterConfig) -> ValidationReport:
    """Valida o workload contra a capacidade KV de um rank do cluster."""
    kv_slots_per_rank = cluster.kv_slots_per_attention_gpu
    report = ValidationReport()
    if not report.check(spec.arrival_rate > 0):
        report.add(_WORKLOAD_RULES['rate_positive'],
                   f'arrival_rate precisa ser > 0 (recebido {spec.arrival_rate})',
                   location='workload.rate')
    for name, (low, high) in (('input', spec.input_range), ('output', spec.output_range)):
        if not report.check(low <= high):
            report.add(_WORKLOAD_RULES['range_order'], f'{name}_min {low} > {name}_max {high}',
                       location=f'workload.{name}_min')
        if not report.check(low >= 1):
            report.add(_WORKLOAD_RULES['range_positive'], f'{name}_min precisa ser >= 1',
                       location=f'workload.{name}_min')
    worst = spec.input_range[1] + spec.output_range[1]
    if not report.check(worst <= kv_slots_per_rank):
        report.add(_WORKLOAD_RULES['kv_admissible'],
                   f'Requisição de até {worst} slots nunca cabe em {kv_slots_per_rank} slots',
                   location='cluster.kv_slots_per_attention_gpu', worst=worst)
    return report
