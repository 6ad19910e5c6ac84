"""QoE-driven composition of crowdsourced IoT energy services."""

from .composition import (
    Strategy,
    StrategyConfig,
    compose,
    compose_db,
    compose_greedy,
    compose_maxmin,
    compose_pb,
)
from .domain import (
    CompositionResult,
    EnergyRequest,
    EnergyService,
    Grant,
    MicrocellDemand,
    TimeSlot,
    Violation,
    build_demand,
    load_instance,
    save_instance,
    validate_composition,
    validate_instance,
)
from .errors import (
    BudgetError,
    EnergyShareError,
    IngestError,
    InstanceValidationError,
    ParameterError,
    UndefinedRatioError,
)
from .harness import SweepResult, SweepSpec, reference_scenario, run_sweep
from .metrics import (
    QoEReport,
    aggregate_blend,
    energy_utilization,
    fulfillment_ratio,
    qoe,
    satisfaction_ratio,
)
from .oracle import OracleBudget, optimal_qoe
from .workload import GeneratorConfig, generate, ingest_transactions

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "CompositionResult",
    "EnergyRequest",
    "EnergyService",
    "EnergyShareError",
    "GeneratorConfig",
    "Grant",
    "IngestError",
    "InstanceValidationError",
    "MicrocellDemand",
    "OracleBudget",
    "ParameterError",
    "QoEReport",
    "Strategy",
    "StrategyConfig",
    "SweepResult",
    "SweepSpec",
    "TimeSlot",
    "UndefinedRatioError",
    "Violation",
    "aggregate_blend",
    "build_demand",
    "compose",
    "compose_db",
    "compose_greedy",
    "compose_maxmin",
    "compose_pb",
    "energy_utilization",
    "fulfillment_ratio",
    "generate",
    "ingest_transactions",
    "load_instance",
    "optimal_qoe",
    "qoe",
    "reference_scenario",
    "run_sweep",
    "satisfaction_ratio",
    "save_instance",
    "validate_composition",
    "validate_instance",
]
