"""
Testes da linha de comando
"""

import json
from pathlib import Path

import pandas as pd
import pytest
import yaml

from src.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main


@pytest.fixture
def small_config(tmp_path) -> str:
    """Configuração pequena o bastante para rodar em segundos."""
    data = {
        "model": {"num_blocks": 2, "num_experts": 4, "top_k": 1, "hidden_dim": 1024},
        "cluster": {"attention_gpus": 2, "expert_gpus": 2},
        "workload": {"preset": "short", "rate": 100, "duration_s": 0.05, "seed": 5},
        "sim": {"horizon_s": 10.0},
        "logging": {"level": "WARNING"},
    }
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def _with_workload(config_path: str, **workload) -> str:
    """Cópia da configuração com campos de workload trocados."""
    source = Path(config_path)
    data = yaml.safe_load(source.read_text(encoding="utf-8"))
    data["workload"].update(workload)
    path = source.with_name(f"{source.stem}_override.yaml")
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


@pytest.mark.integration
class TestCli:
    """Testes dos subcomandos."""

    def test_simulate_then_audit(self, small_config, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["simulate", small_config, "-o", str(out)]) == EXIT_OK

        summary = pd.read_csv(out / "summary.csv")
        assert len(summary) == 1
        assert summary.loc[0, "mode"] == "aep"
        assert "tokens/s" in capsys.readouterr().out

        assert main(["audit", str(out)]) == EXIT_OK
        assert "Auditoria OK" in capsys.readouterr().out

    def test_audit_detects_tampering(self, small_config, tmp_path, capsys):
        out = tmp_path / "run"
        main(["simulate", small_config, "-o", str(out)])

        state_path = out / "trace_state.json"
        state = json.loads(state_path.read_text(encoding="utf-8"))
        first = sorted(state["counters"], key=int)[0]
        state["counters"][first]["samples"] += 1
        state_path.write_text(json.dumps(state), encoding="utf-8")
        capsys.readouterr()

        assert main(["audit", str(out)]) == EXIT_FAILURE
        assert f"request:{first}" in capsys.readouterr().out

    def test_bad_config_names_key(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"scheduler": {"weight_decay": 2.0}}), encoding="utf-8")

        assert main(["simulate", str(path), "-o", str(tmp_path / "out")]) == EXIT_CONFIG
        assert "scheduler.weight_decay" in capsys.readouterr().err

    def test_audit_missing_dir(self, tmp_path):
        assert main(["audit", str(tmp_path / "missing")]) == EXIT_FAILURE

    def test_invalid_rates(self, small_config, tmp_path):
        with pytest.raises(SystemExit):
            main(["sweep", small_config, "--rates", "abc", "-o", str(tmp_path)])

    @pytest.mark.slow
    def test_sweep(self, small_config, tmp_path):
        """Abaixo da saturação a vazão acompanha a taxa de chegada."""
        config = _with_workload(small_config, duration_s=0.2)
        out = tmp_path / "sweep"
        assert main(["sweep", config, "--rates", "50,150,450", "-o", str(out),
                     "--workers", "1"]) == EXIT_OK

        table = pd.read_csv(out / "sweep.csv")
        assert table["rate"].tolist() == [50.0, 150.0, 450.0]
        assert {"throughput_tokens_per_s", "itl_mean_ms"} <= set(table.columns)
        throughput = table["throughput_tokens_per_s"].tolist()
        assert throughput[0] > 0
        assert throughput == sorted(throughput)

    @pytest.mark.slow
    def test_compare(self, small_config, tmp_path):
        """Acima da saturação o AEP com defrag supera o SyncEP."""
        config = _with_workload(small_config, rate=3000, duration_s=0.2)
        out = tmp_path / "compare"
        assert main(["compare", config, "-o", str(out), "--workers", "1"]) == EXIT_OK

        table = pd.read_csv(out / "compare.csv")
        assert table["variant"].tolist() == ["aep/defrag", "aep/mtfs", "aep/flfs", "sync_ep"]
        assert (out / "sync_ep" / "phases.csv").exists()
        assert (out / "aep_defrag" / "executions.csv").exists()

        throughput = table.set_index("variant")["throughput_tokens_per_s"]
        assert throughput["aep/defrag"] >= throughput["sync_ep"]
