#!/usr/bin/env python3
"""
Script para verificar se o ambiente do simulador está pronto.
Confere dependências, variáveis AMOESIM_* e a configuração embutida.
"""

import importlib
import os
import sys
from pathlib import Path
from typing import List, Tuple

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

REQUIRED_PACKAGES = [
    ("numpy", "RNG e estatísticas"),
    ("pandas", "CSVs e tabelas de varredura"),
    ("pydantic", "Modelos de configuração"),
    ("yaml", "Leitura do YAML (PyYAML)"),
    ("dotenv", "Sobrescritas por ambiente (python-dotenv)"),
    ("tqdm", "Barra de progresso das varreduras"),
    ("psutil", "Número padrão de workers"),
]


def check_packages() -> List[Tuple[str, bool, str]]:
    """Verifica se os pacotes de runtime podem ser importados."""
    results = []
    for module, description in REQUIRED_PACKAGES:
        try:
            importlib.import_module(module)
            results.append((module, True, f"✅ {module}: {description}"))
        except ImportError:
            results.append((module, False, f"❌ {module}: não instalado ({description})"))
    return results


def check_env_vars() -> List[Tuple[str, bool, str]]:
    """Verifica as variáveis opcionais AMOESIM_*."""
    results = []

    seed = os.getenv("AMOESIM_SEED")
    if seed is None:
        results.append(("AMOESIM_SEED", True, "🔧 AMOESIM_SEED: usando seed do YAML"))
    elif seed.strip().lstrip("-").isdigit():
        results.append(("AMOESIM_SEED", True, f"✅ AMOESIM_SEED: {seed}"))
    else:
        results.append(("AMOESIM_SEED", False, f"❌ AMOESIM_SEED: '{seed}' não é inteiro"))

    level = os.getenv("AMOESIM_LOG_LEVEL")
    if level is None:
        results.append(("AMOESIM_LOG_LEVEL", True, "🔧 AMOESIM_LOG_LEVEL: usando nível do YAML"))
    elif level.upper() in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
        results.append(("AMOESIM_LOG_LEVEL", True, f"✅ AMOESIM_LOG_LEVEL: {level.upper()}"))
    else:
        results.append(("AMOESIM_LOG_LEVEL", False, f"❌ AMOESIM_LOG_LEVEL: '{level}' inválido"))

    return results


def check_default_config() -> Tuple[bool, str]:
    """Carrega config/default.yaml e valida modelo e cluster."""
    try:
        from config.settings import DEFAULT_CONFIG_PATH, load_settings
        from src.core.exceptions import ConfigurationError
        from src.simulation.builder import build_components
    except ImportError as exc:
        return False, f"❌ Não foi possível importar o simulador: {exc}"

    try:
        parts = build_components(load_settings(DEFAULT_CONFIG_PATH))
    except ConfigurationError as exc:
        return False, f"❌ Configuração inválida ({exc.key}): {exc}"

    return True, (f"✅ {DEFAULT_CONFIG_PATH.name}: {parts.model.num_blocks} blocos, "
                  f"{parts.model.num_experts} experts, {parts.cluster.num_gpus} GPUs")


def main() -> int:
    """Executa todas as verificações."""
    print("🔍 Verificando ambiente do amoe-sim...\n")

    env_path = ROOT / ".env"
    try:
        from dotenv import load_dotenv
        if env_path.exists():
            load_dotenv(env_path)
            print("✅ Arquivo .env carregado\n")
        else:
            print("⚠️  Arquivo .env não encontrado (opcional). Use: cp config/env_example.txt .env\n")
    except ImportError:
        print("⚠️  python-dotenv não instalado. Instale com: pip install python-dotenv\n")

    print("📦 Dependências:")
    print("-" * 50)
    packages = check_packages()
    for _, _, message in packages:
        print(message)
    packages_ok = sum(1 for _, ok, _ in packages if ok)
    print(f"\n📊 Pacotes: {packages_ok}/{len(packages)} OK\n")

    print("⚙️  Variáveis de ambiente:")
    print("-" * 50)
    env_results = check_env_vars()
    for _, _, message in env_results:
        print(message)

    print("\n🧮 Configuração embutida:")
    print("-" * 50)
    config_ok, config_message = (False, "⏭️  Pulada: dependências ausentes")
    if packages_ok == len(packages):
        config_ok, config_message = check_default_config()
    print(config_message)

    print("\n" + "=" * 60)
    if packages_ok == len(packages) and all(ok for _, ok, _ in env_results) and config_ok:
        print("🎉 Ambiente pronto. Experimente: amoe-sim simulate config/default.yaml -o results/run")
        return 0

    print("⚠️  Ambiente incompleto. Verifique os itens acima.")
    print("\n💡 Dicas:")
    print("   - pip install -r requirements.txt")
    print("   - Consulte docs/environment_setup.md")
    return 1


if __name__ == "__main__":
    sys.exit(main())
