"""
Configurações centralizadas do simulador.
Arquivo YAML validado por modelos pydantic, com sobrescritas por variáveis de ambiente.
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.core.exceptions import ConfigurationError
from src.workload.arrivals import WORKLOAD_PRESETS

DEFAULT_CONFIG_PATH = Path(__file__).parent / "default.yaml"

_STAGES = ("schedule", "page_table", "pre", "exec", "post")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ModelSettings(_Section):
    """Forma do modelo MoE."""
    num_blocks: int = Field(default=32, ge=1)
    num_experts: int = Field(default=8, ge=1)
    top_k: int = Field(default=1, ge=1)
    hidden_dim: int = Field(default=4096, ge=1)
    bytes_per_element: int = Field(default=2, ge=1)


class ClusterSettings(_Section):
    """Forma do cluster."""
    attention_gpus: int = Field(default=4, ge=1)
    expert_gpus: int = Field(default=4, ge=1)
    kv_slots_per_attention_gpu: int = Field(default=65536, ge=1)
    gpus_per_node: int = Field(default=8, ge=1)
    node_of: Optional[List[int]] = None


class WorkloadSettings(_Section):
    """Fluxo de requisições."""
    preset: Optional[Literal["short", "medium", "reasonable"]] = None
    rate: float = Field(default=100.0, gt=0)
    input_min: Optional[int] = Field(default=None, ge=1)
    input_max: Optional[int] = Field(default=None, ge=1)
    output_min: Optional[int] = Field(default=None, ge=1)
    output_max: Optional[int] = Field(default=None, ge=1)
    duration_s: float = Field(default=5.0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _fill_ranges(self) -> "WorkloadSettings":
        (in_lo, in_hi), (out_lo, out_hi) = WORKLOAD_PRESETS[self.preset or "medium"]
        if self.input_min is None:
            self.input_min = in_lo
        if self.input_max is None:
            self.input_max = in_hi
        if self.output_min is None:
            self.output_min = out_lo
        if self.output_max is None:
            self.output_max = out_hi
        if self.input_min > self.input_max:
            raise ValueError(f"input_min {self.input_min} > input_max {self.input_max}")
        if self.output_min > self.output_max:
            raise ValueError(f"output_min {self.output_min} > output_max {self.output_max}")
        return self


class SkewSettings(_Section):
    """Desbalanceamento entre experts."""
    kind: Literal["uniform", "exponential"] = "exponential"
    lambda_: float = Field(default=0.38, ge=0, alias="lambda")
    per_block_shuffle: bool = False


class SchedulerSettings(_Section):
    """Política de escolha de camada por GPU."""
    policy: Literal["mtfs", "flfs", "defrag"] = "defrag"
    lookahead_depth: int = Field(default=4, ge=0)
    weight_decay: float = Field(default=0.5, gt=0, lt=1)
    max_batch: int = Field(default=0, ge=0)
    lookahead_divisor: Optional[float] = Field(default=None, gt=0)


class LayerPerfSettings(_Section):
    """Custo de execução de um tipo de camada (ns)."""
    fixed_ns: int = Field(ge=0)
    per_token_ns: int = Field(ge=0)
    per_context_ns: int = Field(default=0, ge=0)
    stage_split: Optional[Dict[str, float]] = None
    batch_table: Optional[List[Tuple[int, int]]] = None

    @field_validator("stage_split")
    @classmethod
    def _check_split(cls, value: Optional[Dict[str, float]]) -> Optional[Dict[str, float]]:
        if value is None:
            return value
        unknown = set(value) - set(_STAGES)
        if unknown:
            raise ValueError(f"estágios desconhecidos: {sorted(unknown)}")
        if any(v < 0 for v in value.values()) or abs(sum(value.values()) - 1.0) > 1e-9:
            raise ValueError("frações precisam ser >= 0 e somar 1")
        return value

    @field_validator("batch_table")
    @classmethod
    def _check_table(cls, value: Optional[List[Tuple[int, int]]]) -> Optional[List[Tuple[int, int]]]:
        if value is None:
            return value
        if not value:
            raise ValueError("tabela vazia")
        for (b0, t0), (b1, t1) in zip(value, value[1:]):
            if b1 <= b0 or t1 < t0:
                raise ValueError("batch estritamente crescente e ns não decrescente")
        return value


class LinkSettings(_Section):
    """Parâmetros de um tipo de enlace."""
    bandwidth_bytes_per_s: int = Field(gt=0)
    propagation_ns: int = Field(ge=0)
    metadata_ns: int = Field(default=20_000, ge=0)


class LinksSettings(_Section):
    intra_node: LinkSettings = Field(
        default_factory=lambda: LinkSettings(bandwidth_bytes_per_s=600_000_000_000, propagation_ns=2_000)
    )
    inter_node: LinkSettings = Field(
        default_factory=lambda: LinkSettings(bandwidth_bytes_per_s=12_500_000_000, propagation_ns=10_000)
    )


class PerfSettings(_Section):
    """Modelo de latência."""
    attention: LayerPerfSettings = Field(
        default_factory=lambda: LayerPerfSettings(fixed_ns=400_000, per_token_ns=6_000, per_context_ns=8)
    )
    expert: LayerPerfSettings = Field(
        default_factory=lambda: LayerPerfSettings(fixed_ns=64_000, per_token_ns=5_750)
    )
    sampler: LayerPerfSettings = Field(
        default_factory=lambda: LayerPerfSettings(fixed_ns=50_000, per_token_ns=1_000)
    )
    links: LinksSettings = Field(default_factory=LinksSettings)


class SimSettings(_Section):
    """Execução da simulação."""
    mode: Literal["aep", "sync_ep"] = "aep"
    horizon_s: Optional[float] = Field(default=None, gt=0)
    seed: Optional[int] = None
    steady_window: Tuple[float, float] = (0.2, 0.9)
    rate_bucket_s: float = Field(default=0.05, gt=0)

    @field_validator("steady_window")
    @classmethod
    def _check_window(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        start, end = value
        if not 0.0 <= start < end <= 1.0:
            raise ValueError("esperado 0 <= t0 < t1 <= 1")
        return value


class LoggingSettings(_Section):
    """Configurações de logging."""
    level: str = "INFO"
    file_path: Optional[str] = None
    max_file_size: int = Field(default=10 * 1024 * 1024, ge=1)  # 10MB
    backup_count: int = Field(default=5, ge=0)

    @field_validator("level")
    @classmethod
    def _check_level(cls, value: str) -> str:
        level = value.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"nível de log inválido: {value}")
        return level


class Settings(_Section):
    """Configurações principais do simulador."""

    # Informações do projeto
    project_name: str = "amoe-sim"
    version: str = "1.0.0"

    # Configurações específicas
    model: ModelSettings = Field(default_factory=ModelSettings)
    cluster: ClusterSettings = Field(default_factory=ClusterSettings)
    workload: WorkloadSettings = Field(default_factory=WorkloadSettings)
    skew: SkewSettings = Field(default_factory=SkewSettings)
    scheduler: SchedulerSettings = Field(default_factory=SchedulerSettings)
    perf: PerfSettings = Field(default_factory=PerfSettings)
    sim: SimSettings = Field(default_factory=SimSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)

    @property
    def seed(self) -> int:
        return self.sim.seed if self.sim.seed is not None else self.workload.seed

    @property
    def horizon_s(self) -> float:
        if self.sim.horizon_s is not None:
            return self.sim.horizon_s
        return 2.0 * self.workload.duration_s

    def with_overrides(self, **sections: Dict[str, Any]) -> "Settings":
        """Cópia validada com chaves de seção substituídas (usado por sweep/compare)."""
        data = self.model_dump(by_alias=True)
        for section, values in sections.items():
            data.setdefault(section, {}).update(values)
        return _validate(data)


def _error_key(error: Dict[str, Any]) -> str:
    return ".".join(str(part) for part in error["loc"]) or "config"


def _validate(data: Dict[str, Any]) -> Settings:
    try:
        return Settings.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigurationError(_error_key(first), first["msg"]) from exc


def _apply_env_overrides(data: Dict[str, Any]) -> None:
    seed = os.getenv("AMOESIM_SEED")
    if seed:
        try:
            value = int(seed)
        except ValueError as exc:
            raise ConfigurationError("AMOESIM_SEED", f"inteiro esperado, recebido {seed!r}") from exc
        data.setdefault("workload", {})["seed"] = value
        data.setdefault("sim", {})["seed"] = value
    level = os.getenv("AMOESIM_LOG_LEVEL")
    if level:
        data.setdefault("logging", {})["level"] = level


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """
    Carrega e valida a configuração.

    Args:
        path: Arquivo YAML (padrão: config/default.yaml)

    Returns:
        Settings validado

    Raises:
        ConfigurationError: arquivo ilegível ou chave inválida (mensagem nomeia a chave)
    """
    load_dotenv()
    config_path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except FileNotFoundError as exc:
        raise ConfigurationError("config", f"arquivo não encontrado: {config_path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError("config", f"YAML inválido em {config_path}: {exc}") from exc

    if not isinstance(data, dict):
        raise ConfigurationError("config", f"esperado um mapeamento de seções em {config_path}")
    for section, values in data.items():
        if values is None:
            data[section] = {}

    _apply_env_overrides(data)
    return _validate(data)


def configure_logging(config: LoggingSettings) -> None:
    """Instala handlers de console e, opcionalmente, de arquivo rotativo."""
    formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    root = logging.getLogger()
    root.setLevel(config.level)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    console = logging.StreamHandler()
    console.setFormatter(formatter)
    root.addHandler(console)

    if config.file_path:
        log_path = Path(config.file_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_path, maxBytes=config.max_file_size, backupCount=config.backup_count, encoding="utf-8"
        )
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)
