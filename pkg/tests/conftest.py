from __future__ import annotations

import pytest

from hexar.explainers import build_default_registry
from hexar.reasoner import RuleReasoner
from hexar.scenarios import list_scenarios
from hexar.simulate import generate_trace


@pytest.fixture(scope="session")
def rule_reasoner() -> RuleReasoner:
    return RuleReasoner()


@pytest.fixture(scope="session")
def registry():
    return build_default_registry()


@pytest.fixture(scope="session")
def specs_by_id():
    return {spec.scenario_id: spec for spec in list_scenarios()}


@pytest.fixture(scope="session")
def trace_cache():
    cache: dict[tuple[int, int, int], object] = {}

    def get(scenario_id: int, variant: int = 1, seed: int = 0):
        key = (scenario_id, variant, seed)
        if key not in cache:
            cache[key] = generate_trace(scenario_id, variant, seed)
        return cache[key]

    return get
