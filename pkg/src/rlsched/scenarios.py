"""The ten cluster scenarios used throughout training and evaluation."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ScenarioConfig:
    """One cluster configuration: processors, max job length, max job size.

    id 0 is reserved for ad-hoc configurations built in tests or experiments;
    ids 1..10 form the fixed registry below.
    """

    id: int
    n_p: int
    d: int
    j_s: int

    def __post_init__(self):
        if self.n_p < 1 or self.d < 5 or self.j_s < 1:
            raise ValueError(f"invalid scenario {self}")
        if self.j_s > self.n_p:
            raise ValueError(f"scenario {self.id}: max job size {self.j_s} exceeds {self.n_p} processors")


SCENARIOS: dict[int, ScenarioConfig] = {
    1: ScenarioConfig(1, 10, 15, 10),
    2: ScenarioConfig(2, 10, 48, 10),
    3: ScenarioConfig(3, 38, 15, 32),
    4: ScenarioConfig(4, 38, 33, 32),
    5: ScenarioConfig(5, 38, 48, 32),
    6: ScenarioConfig(6, 64, 15, 64),
    7: ScenarioConfig(7, 64, 33, 32),
    8: ScenarioConfig(8, 64, 33, 64),
    9: ScenarioConfig(9, 64, 48, 32),
    10: ScenarioConfig(10, 64, 48, 64),
}


def get_scenario(scenario_id: int) -> ScenarioConfig:
    if scenario_id not in SCENARIOS:
        raise ValueError(f"unknown scenario id {scenario_id}; valid ids are 1..10")
    return SCENARIOS[scenario_id]
