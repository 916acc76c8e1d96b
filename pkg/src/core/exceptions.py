"""
Exceções do simulador.
Hierarquia única para que a CLI consiga distinguir erros de configuração de falhas de simulação.
"""

from typing import Any, List, Optional


class SimulationError(Exception):
    """Erro base do simulador."""


class ConfigurationError(SimulationError):
    """Configuração inválida. Sempre nomeia a chave ofensiva."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class RoutingFault(SimulationError):
    """Token entregue a um runtime que não hospeda a camada de destino."""

    def __init__(self, layer_id: Any, gpu_id: Optional[int] = None):
        self.layer_id = layer_id
        self.gpu_id = gpu_id
        where = f" no GPU {gpu_id}" if gpu_id is not None else ""
        super().__init__(f"Camada {layer_id} não hospedada{where}")


class UnknownRequestError(SimulationError):
    """Token referencia uma requisição desconhecida."""

    def __init__(self, request_id: int):
        self.request_id = request_id
        super().__init__(f"Requisição desconhecida: {request_id}")


class KVCapacityError(SimulationError):
    """Alocação de slots KV acima da capacidade do GPU."""


class DeadlockError(SimulationError):
    """Fila de eventos esgotada com tokens ainda retidos."""

    def __init__(self, stuck_tokens: List[Any]):
        self.stuck_tokens = stuck_tokens
        preview = ", ".join(str(t) for t in stuck_tokens[:5])
        super().__init__(
            f"Deadlock: {len(stuck_tokens)} token(s) retidos sem eventos pendentes [{preview}]"
        )
