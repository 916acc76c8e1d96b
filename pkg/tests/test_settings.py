"""
Testes das configurações
Carga do YAML, sobrescritas por ambiente e mensagens de erro nomeando a chave.
"""

import logging

import pytest
import yaml

from config.settings import (
    DEFAULT_CONFIG_PATH,
    LoggingSettings,
    Settings,
    WorkloadSettings,
    configure_logging,
    load_settings,
)
from src.core.exceptions import ConfigurationError
from src.engine.schedulers import SchedulerKind
from src.simulation.builder import build_components
from src.simulation.events import SimMode
from src.workload.arrivals import WORKLOAD_PRESETS, WorkloadSpec


def _write(tmp_path, data) -> str:
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("AMOESIM_SEED", raising=False)
    monkeypatch.delenv("AMOESIM_LOG_LEVEL", raising=False)


@pytest.mark.unit
class TestLoadSettings:
    """Testes para load_settings."""

    def test_bundled_defaults(self):
        settings = load_settings(DEFAULT_CONFIG_PATH)

        assert settings.model.num_blocks == 32
        assert settings.cluster.attention_gpus == 4
        assert settings.workload.preset == "medium"
        assert (settings.workload.input_min, settings.workload.output_max) == (50, 250)
        assert settings.skew.lambda_ == pytest.approx(0.38)
        assert settings.scheduler.policy == "defrag"
        assert settings.seed == 42
        assert settings.horizon_s == pytest.approx(2 * settings.workload.duration_s)

    def test_empty_file_uses_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("", encoding="utf-8")
        settings = load_settings(path)
        assert settings == Settings()

    def test_preset_fills_ranges(self, tmp_path):
        settings = load_settings(_write(tmp_path, {"workload": {"preset": "short", "input_max": 60}}))
        assert (settings.workload.input_min, settings.workload.input_max) == (30, 60)
        assert (settings.workload.output_min, settings.workload.output_max) == (70, 130)

    @pytest.mark.parametrize("preset", sorted(WORKLOAD_PRESETS))
    def test_preset_matches_workload_spec(self, preset):
        """Settings e WorkloadSpec.from_preset resolvem os mesmos intervalos."""
        w = WorkloadSettings(preset=preset)
        spec = WorkloadSpec.from_preset(preset, arrival_rate=1.0, duration=1.0)
        assert ((w.input_min, w.input_max), (w.output_min, w.output_max)) == (
            spec.input_range, spec.output_range
        )

    def test_env_seed_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("AMOESIM_SEED", "1234")
        settings = load_settings(_write(tmp_path, {"workload": {"seed": 1}}))
        assert settings.seed == 1234
        assert settings.workload.seed == 1234

    def test_env_log_level(self, tmp_path, monkeypatch):
        monkeypatch.setenv("AMOESIM_LOG_LEVEL", "debug")
        settings = load_settings(_write(tmp_path, {}))
        assert settings.logging.level == "DEBUG"

    def test_bad_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("AMOESIM_SEED", "abc")
        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(_write(tmp_path, {}))
        assert exc_info.value.key == "AMOESIM_SEED"

    def test_bad_value_names_key(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(_write(tmp_path, {"scheduler": {"weight_decay": 1.5}}))
        assert exc_info.value.key == "scheduler.weight_decay"
        assert "scheduler.weight_decay" in str(exc_info.value)

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(_write(tmp_path, {"model": {"num_layers": 4}}))
        assert exc_info.value.key == "model.num_layers"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(tmp_path / "nope.yaml")
        assert exc_info.value.key == "config"

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("model: [1, 2\n", encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_settings(path)

    def test_steady_window_bounds(self, tmp_path):
        with pytest.raises(ConfigurationError) as exc_info:
            load_settings(_write(tmp_path, {"sim": {"steady_window": [0.9, 0.2]}}))
        assert exc_info.value.key == "sim.steady_window"

    def test_with_overrides(self):
        settings = Settings().with_overrides(workload={"rate": 250.0}, sim={"mode": "sync_ep"})
        assert settings.workload.rate == 250.0
        assert settings.sim.mode == "sync_ep"
        assert Settings().workload.rate == 100.0


@pytest.mark.unit
class TestBuildComponents:
    """Conversão de Settings em objetos de domínio."""

    def test_domain_objects(self):
        settings = Settings().with_overrides(
            model={"num_blocks": 4, "num_experts": 8, "top_k": 2},
            scheduler={"policy": "mtfs", "lookahead_depth": 2},
            sim={"mode": "sync_ep", "seed": 9},
        )
        parts = build_components(settings)

        assert parts.model.top_k == 2
        assert parts.policy.kind is SchedulerKind.MTFS
        assert parts.mode is SimMode.SYNC_EP
        assert parts.workload.seed == 9
        assert parts.horizon_ns == int(2 * settings.workload.duration_s * 1e9)
        assert len(parts.cluster.placement) == 4 * (4 + 8) + 4

    def test_top_k_over_experts(self):
        settings = Settings().with_overrides(model={"num_experts": 2, "top_k": 3})
        with pytest.raises(ConfigurationError) as exc_info:
            build_components(settings)
        assert exc_info.value.key == "model.top_k"

    def test_kv_too_small(self):
        settings = Settings().with_overrides(cluster={"kv_slots_per_attention_gpu": 100})
        with pytest.raises(ConfigurationError) as exc_info:
            build_components(settings)
        assert exc_info.value.key == "cluster.kv_slots_per_attention_gpu"


@pytest.mark.unit
class TestConfigureLogging:
    """Testes para configure_logging."""

    def test_file_handler(self, tmp_path):
        log_file = tmp_path / "logs" / "sim.log"
        configure_logging(LoggingSettings(level="WARNING", file_path=str(log_file)))
        logging.getLogger("src.test").warning("mensagem de teste")

        root = logging.getLogger()
        assert root.level == logging.WARNING
        assert len(root.handlers) == 2
        for handler in root.handlers:
            handler.flush()
        assert "mensagem de teste" in log_file.read_text(encoding="utf-8")

        configure_logging(LoggingSettings())

    def test_invalid_level(self):
        with pytest.raises(ValueError):
            LoggingSettings(level="LOUD")
