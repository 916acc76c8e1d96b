"""
Núcleo de simulação: motor de eventos AEP, baseline síncrono e auditoria.
"""

from .aep_simulator import AepSimulator, DropPredicate, run
from .audit import drain_check, queue_delay_integral
from .events import EventKind, EventQueue, SimEvent, SimMode
from .sync_baseline import SyncEpSimulator, run_sync_baseline
from .trace import (
    DepthSample,
    ExecutionRecord,
    FinalSnapshot,
    GpuSnapshot,
    PhaseRecord,
    PoolSnapshot,
    RequestCounters,
    SimTrace,
    TokenSnapshot,
    TransferRecord,
)

__all__ = [
    # Eventos
    'EventKind', 'EventQueue', 'SimEvent', 'SimMode',
    # Simuladores
    'AepSimulator', 'SyncEpSimulator', 'DropPredicate', 'run', 'run_sync_baseline',
    # Trace
    'SimTrace', 'ExecutionRecord', 'TransferRecord', 'DepthSample', 'PhaseRecord',
    'RequestCounters', 'TokenSnapshot', 'PoolSnapshot', 'GpuSnapshot', 'FinalSnapshot',
    # Auditoria
    'drain_check', 'queue_delay_integral',
]
