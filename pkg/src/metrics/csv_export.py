"""
Exportação de traces
Escreve os artefatos CSV (UTF-8, LF) de uma simulação e reconstrói um SimTrace a partir deles.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from ..core.schemas import LayerId, LayerKind, RequestState
from ..perf.perf_model import STAGES, PerfModel
from ..simulation.trace import (
    DepthSample,
    ExecutionRecord,
    PhaseRecord,
    SimTrace,
    TransferRecord,
)
from .summary import SummaryStats, compute_rate_series, summarize

logger = logging.getLogger(__name__)

EXECUTIONS_COLUMNS = ["gpu", "layer", "block", "slot", "kind", "batch", "start_ns", "end_ns",
                      "queue_delay_sum_ns"]
TRANSFERS_COLUMNS = ["src", "dst", "bytes", "tokens", "issue_ns", "phase1_end_ns",
                     "phase2_start_ns", "phase2_end_ns"]
REQUESTS_COLUMNS = ["id", "arrival_ns", "completion_ns", "input_len", "output_len", "dp_rank"]
TOKENS_COLUMNS = ["id", "token_index", "time_ns"]
QUEUE_DEPTH_COLUMNS = ["time_ns", "gpu", "layer", "depth"]
PHASES_COLUMNS = ["kind", "block", "start_ns", "end_ns"]
GPU_COLUMNS = ["gpu", "role", "busy_fraction", "stall_fraction"]
STAGE_COLUMNS = ["kind", "stage", "mean_ns"]
RATES_COLUMNS = ["bucket_start_ns", "arrivals", "completions"]

STATE_FILE = "trace_state.json"


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    """Escreve um DataFrame como CSV; falhas de I/O nomeiam o caminho."""
    try:
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as exc:
        logger.error(f"Falha ao escrever {path}: {exc}")
        raise OSError(f"Falha ao escrever {path}: {exc}") from exc
    return path


def _frame(rows: Sequence[Sequence[object]], columns: List[str]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=columns)


def _executions_frame(trace: SimTrace) -> pd.DataFrame:
    return _frame([
        (r.gpu, r.layer_id.label, r.layer_id.block, r.layer_id.slot, r.layer_id.kind.value,
         r.batch_size, r.start, r.end, r.queue_delay_sum)
        for r in trace.executions
    ], EXECUTIONS_COLUMNS)


def _requests_frame(trace: SimTrace) -> pd.DataFrame:
    frame = _frame([
        (r.request_id, r.arrival_time, r.completion_time, r.input_len, r.output_len, r.dp_rank)
        for _, r in sorted(trace.requests.items())
    ], REQUESTS_COLUMNS)
    return frame.astype({"completion_ns": "Int64", "dp_rank": "Int64"})


def _stage_frame(trace: SimTrace, perf: PerfModel) -> pd.DataFrame:
    totals: Dict[str, Dict[str, int]] = {}
    counts: Dict[str, int] = {}
    for record in trace.executions:
        kind = record.layer_id.kind
        stages = perf.stage_breakdown(kind, record.batch_size, record.total_context)
        bucket = totals.setdefault(kind.value, dict.fromkeys(STAGES, 0))
        for stage, value in stages.items():
            bucket[stage] += value
        counts[kind.value] = counts.get(kind.value, 0) + 1
    rows = [
        (kind.value, stage, totals[kind.value][stage] / counts[kind.value])
        for kind in LayerKind if kind.value in totals
        for stage in STAGES
    ]
    return _frame(rows, STAGE_COLUMNS)


def _gpu_frame(stats: SummaryStats, trace: SimTrace) -> pd.DataFrame:
    return _frame([
        (gpu, "attention" if gpu < trace.attention_gpus else "expert",
         stats.busy_fraction.get(gpu, 0.0), stats.stall_fraction.get(gpu, 1.0))
        for gpu in range(trace.num_gpus)
    ], GPU_COLUMNS)


def write_summary(rows: Sequence[SummaryStats], path: Path) -> Path:
    """Tabela com uma linha por SummaryStats."""
    return write_table(pd.DataFrame([stats.to_row() for stats in rows]), Path(path))


def emit_csv(source: Union[SimTrace, SummaryStats], out_dir: Union[str, Path],
             perf: Optional[PerfModel] = None,
             window_fractions: Tuple[float, float] = (0.2, 0.9),
             rate_bucket_ns: int = 50_000_000) -> List[Path]:
    """
    Escreve os artefatos de uma simulação em `out_dir`.

    Um SummaryStats isolado gera apenas summary.csv.

    Returns:
        Caminhos escritos
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"Falha ao criar {out}: {exc}") from exc

    if isinstance(source, SummaryStats):
        return [write_summary([source], out / "summary.csv")]

    trace = source
    perf = perf or PerfModel()
    stats = summarize(trace, window_fractions)
    end_ns = max(trace.snapshot.end_time, trace.duration_ns)

    written = [
        write_table(_executions_frame(trace), out / "executions.csv"),
        write_table(_frame([
            (t.src, t.dst, t.bytes, t.tokens, t.issue, t.phase1_end, t.phase2_start, t.phase2_end)
            for t in trace.transfers
        ], TRANSFERS_COLUMNS), out / "transfers.csv"),
        write_table(_requests_frame(trace), out / "requests.csv"),
        write_table(_frame([
            (r.request_id, index, t)
            for _, r in sorted(trace.requests.items())
            for index, t in enumerate(r.per_token_times)
        ], TOKENS_COLUMNS), out / "tokens.csv"),
        write_table(_frame([
            (s.time, s.gpu, s.layer_id.label, s.depth) for s in trace.queue_depth
        ], QUEUE_DEPTH_COLUMNS), out / "queue_depth.csv"),
        write_table(_frame([
            (p.kind, p.block, p.start, p.end) for p in trace.phases
        ], PHASES_COLUMNS), out / "phases.csv"),
        write_summary([stats], out / "summary.csv"),
        write_table(_gpu_frame(stats, trace), out / "gpu_utilization.csv"),
        write_table(_stage_frame(trace, perf), out / "stage_breakdown.csv"),
        write_table(compute_rate_series(trace.requests, rate_bucket_ns, end_ns)[RATES_COLUMNS],
                    out / "rates.csv"),
    ]

    state_path = out / STATE_FILE
    try:
        with open(state_path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(trace.state_dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
    except OSError as exc:
        raise OSError(f"Falha ao escrever {state_path}: {exc}") from exc
    written.append(state_path)

    logger.info(f"{len(written)} arquivos escritos em {out}")
    return written


def load_trace(trace_dir: Union[str, Path]) -> SimTrace:
    """
    Reconstrói um SimTrace a partir dos arquivos de `emit_csv`.

    Raises:
        FileNotFoundError: arquivo ausente (mensagem com o caminho)
    """
    directory = Path(trace_dir)
    state_path = directory / STATE_FILE
    if not state_path.exists():
        raise FileNotFoundError(f"Trace incompleto: {state_path} não encontrado")
    with open(state_path, "r", encoding="utf-8") as f:
        trace = SimTrace.from_state_dict(json.load(f))
    num_blocks = trace.num_blocks

    def _read(name: str, **kwargs) -> pd.DataFrame:
        path = directory / name
        if not path.exists():
            raise FileNotFoundError(f"Trace incompleto: {path} não encontrado")
        return pd.read_csv(path, **kwargs)

    trace.executions = [
        ExecutionRecord(int(row.gpu), LayerId.from_label(row.layer, num_blocks), int(row.batch),
                        int(row.start_ns), int(row.end_ns), int(row.queue_delay_sum_ns))
        for row in _read("executions.csv").itertuples(index=False)
    ]
    trace.transfers = [
        TransferRecord(int(row.src), int(row.dst), int(row.bytes), int(row.tokens), int(row.issue_ns),
                       int(row.phase1_end_ns), int(row.phase2_start_ns), int(row.phase2_end_ns))
        for row in _read("transfers.csv").itertuples(index=False)
    ]
    trace.queue_depth = [
        DepthSample(int(row.time_ns), int(row.gpu), LayerId.from_label(row.layer, num_blocks),
                    int(row.depth))
        for row in _read("queue_depth.csv").itertuples(index=False)
    ]
    trace.phases = [
        PhaseRecord(str(row.kind), int(row.block), int(row.start_ns), int(row.end_ns))
        for row in _read("phases.csv").itertuples(index=False)
    ]

    token_times: Dict[int, List[int]] = {}
    for row in _read("tokens.csv").sort_values(["id", "token_index"]).itertuples(index=False):
        token_times.setdefault(int(row.id), []).append(int(row.time_ns))

    requests = _read("requests.csv", dtype={"completion_ns": "Int64", "dp_rank": "Int64"})
    for row in requests.itertuples(index=False):
        request_id = int(row.id)
        times = token_times.get(request_id, [])
        trace.requests[request_id] = RequestState(
            request_id=request_id,
            input_len=int(row.input_len),
            output_len=int(row.output_len),
            arrival_time=int(row.arrival_ns),
            dp_rank=None if pd.isna(row.dp_rank) else int(row.dp_rank),
            generated=len(times),
            completion_time=None if pd.isna(row.completion_ns) else int(row.completion_ns),
            per_token_times=times,
        )
    logger.info(f"Trace carregado de {directory}: {len(trace.requests)} requisições")
    return trace
