from mecbench.scenario.config import ScenarioConfig, SuiteConfig, bundled_suite, load_config, parse_suite
from mecbench.scenario.orchestrate import ChainEndpoints, HealthStatus, health_check, run_scenario, run_suite

__all__ = [
    "ChainEndpoints",
    "HealthStatus",
    "ScenarioConfig",
    "SuiteConfig",
    "bundled_suite",
    "health_check",
    "load_config",
    "parse_suite",
    "run_scenario",
    "run_suite",
]
