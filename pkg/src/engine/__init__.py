"""
Engine de execução por GPU: receptor, escalonadores, executor e dispatcher.
"""

from .dispatcher import DispatchResult, dispatch
from .micro_queue import MicroQueue, PoolEntry, TokenPool
from .runtime import ExecutionBatch, IngestResult, RuntimeState, form_batch, receptor_ingest
from .schedulers import (
    SchedulerKind,
    SchedulerPolicy,
    lookahead_scores,
    make_scheduler,
    schedule_defrag,
    schedule_flfs,
    schedule_mtfs,
)

__all__ = [
    # Receptor e executor
    'MicroQueue', 'PoolEntry', 'TokenPool',
    'ExecutionBatch', 'IngestResult', 'RuntimeState', 'receptor_ingest', 'form_batch',
    # Escalonadores
    'SchedulerKind', 'SchedulerPolicy', 'lookahead_scores', 'make_scheduler',
    'schedule_mtfs', 'schedule_flfs', 'schedule_defrag',
    # Dispatcher
    'DispatchResult', 'dispatch',
]
