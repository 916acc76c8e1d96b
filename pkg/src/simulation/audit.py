"""
Auditoria de trace
Conservação de tokens, merges top-K, pool vazio, contabilidade KV, tempos de token
monótonos, serialização por GPU e consistência dos atrasos de fila.
"""

import logging
import time
from collections import defaultdict
from typing import Dict, List, Tuple

from ..core.schemas import LayerId, LayerKind
from ..core.validation_system import ValidationReport, ValidationRule, ValidationSeverity
from .events import SimMode
from .trace import RequestCounters, SimTrace, TokenSnapshot

logger = logging.getLogger(__name__)

_RULES: Dict[str, ValidationRule] = {
    'token_conservation': ValidationRule(
        'token_conservation', 'Cada token atravessa todos os blocos exatamente uma vez',
        ValidationSeverity.ERROR,
    ),
    'topk_merge': ValidationRule(
        'topk_merge', 'Cada entrada mesclada consome exatamente K pernas de experts',
        ValidationSeverity.ERROR,
    ),
    'pool_empty': ValidationRule(
        'pool_empty', 'Pool de tokens vazio sem trabalho em andamento', ValidationSeverity.ERROR,
    ),
    'kv_accounting': ValidationRule(
        'kv_accounting', 'kv_used igual aos slots das requisições ativas', ValidationSeverity.ERROR,
    ),
    'token_times': ValidationRule(
        'token_times', 'Tempos de token estritamente crescentes', ValidationSeverity.ERROR,
    ),
    'gpu_serialization': ValidationRule(
        'gpu_serialization', 'Execuções de um GPU nunca se sobrepõem', ValidationSeverity.ERROR,
    ),
    'queue_delay': ValidationRule(
        'queue_delay', 'Atrasos de fila consistentes entre engine e trace', ValidationSeverity.ERROR,
    ),
    'busy_accounting': ValidationRule(
        'busy_accounting', 'Tempo ocupado do engine igual ao das execuções', ValidationSeverity.ERROR,
    ),
}


def _counters(trace: SimTrace, request_id: int) -> RequestCounters:
    return trace.counters.get(request_id) or RequestCounters()


def _leg_weight(token: TokenSnapshot, trace: SimTrace) -> int:
    """Peso de um token vivo em unidades de perna (um token completo vale K)."""
    layer = LayerId.from_label(token.layer, trace.num_blocks)
    if layer.kind is LayerKind.ATTENTION and layer.block == 0:
        return trace.top_k
    if layer.kind is LayerKind.EXPERT:
        return 1
    return token.payload_tensors


def _check_conservation(trace: SimTrace, report: ValidationReport) -> None:
    rule = _RULES['token_conservation']
    n_blocks, top_k = trace.num_blocks, trace.top_k
    check_weights = trace.mode == SimMode.AEP.value

    weights: Dict[int, int] = defaultdict(int)
    if check_weights:
        for token in trace.snapshot.tokens:
            weights[token.request_id] += _leg_weight(token, trace)
        for entry in trace.snapshot.pool:
            weights[entry.request_id] += entry.received

    spans = {'samples': 1, 'attention_execs': n_blocks, 'expert_legs': n_blocks * top_k}

    for request_id, request in sorted(trace.requests.items()):
        counters = _counters(trace, request_id)
        done = request.generated
        expected = {
            'samples': done,
            'attention_execs': n_blocks * done,
            'expert_legs': n_blocks * top_k * done,
        }
        if request.is_finished:
            expected['samples'] = request.output_len
        for name, value in expected.items():
            actual = getattr(counters, name)
            # um passo em andamento pode estar à frente dos tokens emitidos
            span = spans[name] if not request.is_finished else 0
            ok = value <= actual <= value + span
            if not report.check(ok):
                report.add(rule, f'Requisição {request_id}: {name}={actual}, esperado {value}',
                           location=f'request:{request_id}', request_id=request_id)

        if check_weights:
            live = request.dp_rank is not None and not request.is_finished
            wanted = top_k if live else 0
            if not report.check(weights.get(request_id, 0) == wanted):
                report.add(rule,
                           f'Requisição {request_id}: {weights.get(request_id, 0)} perna(s) vivas, '
                           f'esperado {wanted}',
                           location=f'request:{request_id}', request_id=request_id)

    if check_weights and trace.snapshot.drained:
        for request_id, request in sorted(trace.requests.items()):
            if request_id in trace.snapshot.admission_queue:
                continue
            if not report.check(request.is_complete):
                report.add(rule, f'Requisição {request_id} não concluída após drenagem',
                           location=f'request:{request_id}', request_id=request_id)


def _check_merges(trace: SimTrace, report: ValidationReport) -> None:
    rule = _RULES['topk_merge']
    top_k = trace.top_k
    pooled_now: Dict[int, int] = defaultdict(int)
    for entry in trace.snapshot.pool:
        pooled_now[entry.request_id] += entry.received

    for request_id, counters in sorted(trace.counters.items()):
        if top_k <= 1:
            continue
        if not report.check(counters.merged_legs == top_k * counters.merges):
            report.add(rule,
                       f'Requisição {request_id}: {counters.merges} merge(s) com '
                       f'{counters.merged_legs} pernas, esperado {top_k} por merge',
                       location=f'request:{request_id}', request_id=request_id)
        if trace.mode == SimMode.AEP.value:
            if not report.check(counters.pooled_legs == counters.merged_legs + pooled_now[request_id]):
                report.add(rule,
                           f'Requisição {request_id}: {counters.pooled_legs} pernas no pool, '
                           f'{counters.merged_legs} mescladas, {pooled_now[request_id]} pendentes',
                           location=f'request:{request_id}', request_id=request_id)
            request = trace.requests.get(request_id)
            if request is not None and request.is_finished:
                expected = trace.num_blocks * request.output_len
                if not report.check(counters.merges == expected):
                    report.add(rule,
                               f'Requisição {request_id}: {counters.merges} merges, esperado {expected}',
                               location=f'request:{request_id}', request_id=request_id)


def _check_pool(trace: SimTrace, report: ValidationReport) -> None:
    if not trace.snapshot.drained or report.check(not trace.snapshot.pool):
        return
    for entry in trace.snapshot.pool:
        report.add(_RULES['pool_empty'],
                   f'Pool do GPU {entry.gpu} retém {entry.layer} da requisição {entry.request_id}',
                   location=f'gpu:{entry.gpu}', request_id=entry.request_id)


def _check_kv(trace: SimTrace, report: ValidationReport) -> None:
    rule = _RULES['kv_accounting']
    for gpu in trace.snapshot.gpus:
        table_sum = sum(gpu.block_table.values())
        if not report.check(gpu.kv_used == table_sum and gpu.kv_used <= gpu.kv_capacity):
            report.add(rule,
                       f'GPU {gpu.gpu}: kv_used={gpu.kv_used}, soma da block table={table_sum}, '
                       f'capacidade={gpu.kv_capacity}',
                       location=f'gpu:{gpu.gpu}')
        for request_id, slots in gpu.block_table.items():
            request = trace.requests.get(request_id)
            counters = _counters(trace, request_id)
            expected = None if request is None else request.input_len + counters.block0_visits
            ok = request is not None and not request.is_finished and slots == expected
            if not report.check(ok):
                report.add(rule,
                           f'GPU {gpu.gpu}: requisição {request_id} com {slots} slot(s), '
                           f'esperado {expected}',
                           location=f'gpu:{gpu.gpu}', request_id=request_id)


def _check_token_times(trace: SimTrace, report: ValidationReport) -> None:
    rule = _RULES['token_times']
    for request_id, request in sorted(trace.requests.items()):
        times = request.per_token_times
        increasing = all(b > a for a, b in zip(times, times[1:]))
        after_arrival = not times or times[0] > request.arrival_time
        consistent = len(times) == request.generated <= request.output_len
        completion_ok = request.completion_time is None or request.is_finished
        if not report.check(increasing and after_arrival and consistent and completion_ok):
            report.add(rule, f'Requisição {request_id}: tempos de token inconsistentes',
                       location=f'request:{request_id}', request_id=request_id)


def _check_serialization(trace: SimTrace, report: ValidationReport) -> None:
    rule = _RULES['gpu_serialization']
    by_gpu: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for record in trace.executions:
        by_gpu[record.gpu].append((record.start, record.end))
    for gpu, intervals in sorted(by_gpu.items()):
        intervals.sort()
        overlaps = sum(1 for (_, end), (start, _) in zip(intervals, intervals[1:]) if start < end)
        if not report.check(overlaps == 0):
            report.add(rule, f'GPU {gpu}: {overlaps} execução(ões) sobrepostas',
                       location=f'gpu:{gpu}')


def queue_delay_integral(trace: SimTrace) -> int:
    """Integral da profundidade das µ-queues no tempo, reconstruída das amostras."""
    last: Dict[Tuple[int, LayerId], Tuple[int, int]] = {}
    total = 0
    for sample in trace.queue_depth:
        key = (sample.gpu, sample.layer_id)
        if key in last:
            prev_time, prev_depth = last[key]
            total += prev_depth * (sample.time - prev_time)
        last[key] = (sample.time, sample.depth)
    return total


def _check_queue_delay(trace: SimTrace, report: ValidationReport) -> None:
    rule = _RULES['queue_delay']
    from_executions = sum(record.queue_delay_sum for record in trace.executions)
    engine = sum(gpu.queue_delay_ns for gpu in trace.snapshot.gpus)
    if not report.check(from_executions == engine):
        report.add(rule, f'Soma dos atrasos nas execuções {from_executions} != engine {engine}',
                   location='executions')
    if trace.mode == SimMode.AEP.value and trace.snapshot.drained:
        integral = queue_delay_integral(trace)
        if not report.check(integral == engine):
            report.add(rule, f'Integral das profundidades {integral} != engine {engine}',
                       location='queue_depth')


def _check_busy(trace: SimTrace, report: ValidationReport) -> None:
    rule = _RULES['busy_accounting']
    recomputed = trace.busy_by_gpu()
    for gpu in trace.snapshot.gpus:
        if not report.check(recomputed.get(gpu.gpu, 0) == gpu.busy_ns):
            report.add(rule,
                       f'GPU {gpu.gpu}: execuções somam {recomputed.get(gpu.gpu, 0)} ns, '
                       f'engine registrou {gpu.busy_ns} ns',
                       location=f'gpu:{gpu.gpu}')


def drain_check(trace: SimTrace) -> ValidationReport:
    """
    Audita um trace concluído. Nunca levanta exceção.

    Returns:
        Relatório; sem problemas significa que todos os invariantes valem
    """
    start_time = time.time()
    report = ValidationReport()
    for check in (_check_conservation, _check_merges, _check_pool, _check_kv,
                  _check_token_times, _check_serialization, _check_queue_delay, _check_busy):
        check(trace, report)
    report.processing_time = time.time() - start_time

    if report.is_valid:
        logger.info(f"Auditoria OK: {report.total_checks} verificações")
    else:
        logger.warning(f"Auditoria falhou: {len(report.issues)} violação(ões)")
    return report
