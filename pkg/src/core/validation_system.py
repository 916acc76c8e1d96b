"""
Sistema de Validação
Relatórios de violações para configuração do modelo/cluster e auditorias de trace.
Operações de validação nunca levantam exceção: acumulam problemas num relatório.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from .schemas import ClusterConfig, ModelConfig, enumerate_layers

logger = logging.getLogger(__name__)


class ValidationSeverity(Enum):
    """Severidade dos resultados de validação."""
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"
    CRITICAL = "critical"


@dataclass
class ValidationRule:
    """Representa uma regra de validação."""
    name: str
    description: str
    severity: ValidationSeverity
    enabled: bool = True


@dataclass
class ValidationIssue:
    """Representa um problema encontrado na validação."""
    rule_name: str
    severity: ValidationSeverity
    message: str
    details: Dict[str, Any] = field(default_factory=dict)
    location: Optional[str] = None


@dataclass
class ValidationReport:
    """Resultado de uma validação ou auditoria."""
    issues: List[ValidationIssue] = field(default_factory=list)
    total_checks: int = 0
    passed_checks: int = 0
    processing_time: float = 0.0

    @property
    def is_valid(self) -> bool:
        """Válido quando não há erros nem problemas críticos."""
        return not (self.has_errors() or self.has_critical_issues())

    @property
    def failed_checks(self) -> int:
        return self.total_checks - self.passed_checks

    def has_critical_issues(self) -> bool:
        return any(issue.severity == ValidationSeverity.CRITICAL for issue in self.issues)

    def has_errors(self) -> bool:
        return any(issue.severity == ValidationSeverity.ERROR for issue in self.issues)

    def get_issues_by_severity(self, severity: ValidationSeverity) -> List[ValidationIssue]:
        return [issue for issue in self.issues if issue.severity == severity]

    def get_issues_by_rule(self, rule_name: str) -> List[ValidationIssue]:
        return [issue for issue in self.issues if issue.rule_name == rule_name]

    def add(self, rule: ValidationRule, message: str, location: Optional[str] = None,
            **details: Any) -> None:
        self.issues.append(ValidationIssue(
            rule_name=rule.name,
            severity=rule.severity,
            message=message,
            details=details,
            location=location,
        ))

    def check(self, passed: bool) -> bool:
        """Contabiliza uma verificação; retorna `passed` para encadear."""
        self.total_checks += 1
        if passed:
            self.passed_checks += 1
        return passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            'is_valid': self.is_valid,
            'total_checks': self.total_checks,
            'passed_checks': self.passed_checks,
            'failed_checks': self.failed_checks,
            'issues': [
                {
                    'rule_name': issue.rule_name,
                    'severity': issue.severity.value,
                    'message': issue.message,
                    'location': issue.location,
                    'details': issue.details,
                }
                for issue in self.issues
            ],
        }


class ConfigValidator:
    """Validador da forma do modelo e do cluster."""

    def __init__(self):
        self.rules = self._initialize_config_rules()

    def _initialize_config_rules(self) -> Dict[str, ValidationRule]:
        return {
            'model_bounds': ValidationRule(
                name='model_bounds',
                description='num_blocks, num_experts, hidden_dim e bytes_per_element positivos',
                severity=ValidationSeverity.ERROR,
            ),
            'top_k_bound': ValidationRule(
                name='top_k_bound',
                description='1 <= top_k <= num_experts',
                severity=ValidationSeverity.ERROR,
            ),
            'cluster_capacity': ValidationRule(
                name='cluster_capacity',
                description='GPUs e capacidade KV positivos',
                severity=ValidationSeverity.ERROR,
            ),
            'node_map': ValidationRule(
                name='node_map',
                description='node_of cobre todos os GPUs',
                severity=ValidationSeverity.ERROR,
            ),
            'placement_total': ValidationRule(
                name='placement_total',
                description='Toda camada mapeada para exatamente um GPU',
                severity=ValidationSeverity.CRITICAL,
            ),
            'placement_slot_bounds': ValidationRule(
                name='placement_slot_bounds',
                description='Slots e GPUs do placement dentro dos limites',
                severity=ValidationSeverity.ERROR,
            ),
        }

    def validate(self, model: ModelConfig, cluster: ClusterConfig) -> ValidationReport:
        """Valida modelo e cluster juntos."""
        start_time = time.time()
        report = ValidationReport()
        rules = self.rules

        for name in ('num_blocks', 'num_experts', 'hidden_dim', 'bytes_per_element'):
            value = getattr(model, name)
            if not report.check(value >= 1):
                report.add(rules['model_bounds'], f'{name} precisa ser >= 1 (recebido {value})',
                           location=f'model.{name}', value=value)

        if not report.check(1 <= model.top_k <= max(model.num_experts, 0)):
            if model.top_k > model.num_experts:
                message = (f'top_k exceeds num_experts: top_k={model.top_k} '
                           f'> num_experts={model.num_experts}')
            else:
                message = f'top_k precisa ser >= 1 (recebido {model.top_k})'
            report.add(rules['top_k_bound'], message, location='model.top_k',
                       top_k=model.top_k, num_experts=model.num_experts)

        for name in ('attention_gpus', 'expert_gpus', 'kv_slots_per_attention_gpu'):
            value = getattr(cluster, name)
            if not report.check(value >= 1):
                report.add(rules['cluster_capacity'], f'{name} precisa ser >= 1 (recebido {value})',
                           location=f'cluster.{name}', value=value)

        if cluster.node_of:
            if not report.check(len(cluster.node_of) == cluster.num_gpus):
                report.add(rules['node_map'],
                           f'node_of tem {len(cluster.node_of)} entradas para {cluster.num_gpus} GPUs',
                           location='cluster.node_of')

        # Totalidade só faz sentido com dimensões válidas.
        if model.num_blocks >= 1 and model.num_experts >= 1 and cluster.attention_gpus >= 1:
            expected = set(enumerate_layers(model, cluster.dp_degree))
            for layer in sorted(expected):
                if not report.check(layer in cluster.placement):
                    report.add(rules['placement_total'],
                               f'Camada {layer.label} sem GPU no placement',
                               location=layer.label, layer=layer.label)
            for layer, gpu in sorted(cluster.placement.items()):
                in_domain = layer in expected
                gpu_ok = 0 <= gpu < cluster.num_gpus
                if not report.check(in_domain and gpu_ok):
                    reason = 'slot fora dos limites' if not in_domain else f'GPU {gpu} inexistente'
                    report.add(rules['placement_slot_bounds'],
                               f'Camada {layer.label}: {reason}',
                               location=layer.label, gpu=gpu)

        report.processing_time = time.time() - start_time
        if not report.is_valid:
            logger.warning(f"Configuração inválida: {len(report.issues)} problema(s)")
        return report


def validate_config(model: ModelConfig, cluster: ClusterConfig) -> ValidationReport:
    """Valida modelo e cluster; lista vazia de problemas significa válido."""
    return ConfigValidator().validate(model, cluster)


__all__ = [
    'ValidationSeverity', 'ValidationRule', 'ValidationIssue', 'ValidationReport',
    'ConfigValidator', 'validate_config',
]
