"""
Métricas, exportação de artefatos e varreduras de experimentos.
"""

from ..simulation.trace import SimTrace
from .csv_export import emit_csv, load_trace, write_summary, write_table
from .summary import (
    ItlStats,
    SummaryStats,
    compute_busy,
    compute_itl,
    compute_phase_stall,
    compute_rate_series,
    compute_stall,
    compute_throughput,
    itl_samples,
    steady_window,
    summarize,
)

__all__ = [
    'SimTrace',
    # Métricas
    'ItlStats', 'SummaryStats', 'compute_itl', 'compute_throughput', 'compute_busy',
    'compute_stall', 'compute_phase_stall', 'compute_rate_series', 'itl_samples',
    'steady_window', 'summarize',
    # Artefatos
    'emit_csv', 'load_trace', 'write_summary', 'write_table',
]
