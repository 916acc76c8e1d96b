"""
Varreduras de experimentos
Uma simulação independente por taxa (ou variante) em processos separados; as tabelas
resultantes não dependem do número de workers.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd
import psutil
from tqdm import tqdm

from config.settings import Settings

from ..simulation.builder import build_components, run_components
from .csv_export import emit_csv, write_table
from .summary import summarize

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["rate", "throughput_tokens_per_s", "itl_mean_ms", "itl_median_ms", "itl_p99_ms",
                 "completion_ratio", "requests_completed"]

# (nome da variante, modo, política)
COMPARE_VARIANTS: List[Tuple[str, str, str]] = [
    ("aep/defrag", "aep", "defrag"),
    ("aep/mtfs", "aep", "mtfs"),
    ("aep/flfs", "aep", "flfs"),
    ("sync_ep", "sync_ep", "defrag"),
]


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or 1


def _run_job(settings_data: Dict[str, Any], out_dir: str) -> Dict[str, Any]:
    """Executa uma simulação e escreve seus artefatos (roda no processo worker)."""
    settings = Settings.model_validate(settings_data)
    parts = build_components(settings)
    trace = run_components(parts)
    emit_csv(trace, out_dir, perf=parts.perf, window_fractions=parts.steady_window,
             rate_bucket_ns=parts.rate_bucket_ns)
    return summarize(trace, parts.steady_window).to_row()


def _run_jobs(jobs: Sequence[Tuple[str, Settings, Path]], workers: int,
              description: str) -> Dict[str, Dict[str, Any]]:
    results: Dict[str, Dict[str, Any]] = {}
    if workers <= 1:
        for key, settings, out_dir in tqdm(jobs, desc=description):
            results[key] = _run_job(settings.model_dump(by_alias=True), str(out_dir))
        return results

    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {
            executor.submit(_run_job, settings.model_dump(by_alias=True), str(out_dir)): key
            for key, settings, out_dir in jobs
        }
        for future in tqdm(as_completed(futures), total=len(futures), desc=description):
            key = futures[future]
            results[key] = future.result()
            logger.debug(f"Execução {key} concluída")
    return results


def run_sweep(settings: Settings, rates: Sequence[float], out_dir: Union[str, Path],
              workers: Optional[int] = None) -> pd.DataFrame:
    """
    Varre taxas de chegada.

    Cada taxa grava seus CSVs em rate_<r>/; sweep.csv reúne uma linha por taxa,
    ordenada por taxa.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or default_workers()
    rates = sorted(set(float(rate) for rate in rates))
    if not rates:
        raise ValueError("Nenhuma taxa informada")

    jobs = [
        (f"{rate:g}", settings.with_overrides(workload={"rate": rate}), out / f"rate_{rate:g}")
        for rate in rates
    ]
    logger.info(f"Sweep de {len(jobs)} taxa(s) com {workers} worker(s)")
    results = _run_jobs(jobs, min(workers, len(jobs)), "sweep")

    frame = pd.DataFrame([results[f"{rate:g}"] for rate in rates])[SWEEP_COLUMNS]
    write_table(frame, out / "sweep.csv")
    return frame


def run_compare(settings: Settings, out_dir: Union[str, Path],
                workers: Optional[int] = None) -> pd.DataFrame:
    """Mesmo workload sob AEP (defrag, mtfs, flfs) e SyncEP; uma linha por variante."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or default_workers()

    jobs = [
        (name, settings.with_overrides(sim={"mode": mode}, scheduler={"policy": policy}),
         out / name.replace("/", "_"))
        for name, mode, policy in COMPARE_VARIANTS
    ]
    results = _run_jobs(jobs, min(workers, len(jobs)), "compare")

    rows = []
    for name, _, _ in COMPARE_VARIANTS:
        rows.append({"variant": name, **results[name]})
    frame = pd.DataFrame(rows)
    write_table(frame, out / "compare.csv")
    return frame
