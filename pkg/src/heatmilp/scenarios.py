"""Scenario cells: wood boiler x carbon tax x electricity CO2 x gas CO2."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, replace

GAS_CO2 = {"NG": 227.0, "BG": 22.0}  # kg/MWh
ELEC_CO2_FACTOR = {"RE": 1.0, "HE": 8.0}  # multiplier on the reference electricity series

_NAME_RE = re.compile(r"^(NWB|WWB)-CT(\d+(?:\.\d+)?)-(RE|HE)-(NG|BG)$")


@dataclass(frozen=True)
class ScenarioConfig:
    wood_boiler_enabled: bool = False
    carbon_tax: float = 74.0  # EUR/t
    elec_profile: str = "RE"
    gas: str = "NG"
    renewable_share_min: float = 0.5

    def __post_init__(self):
        if self.elec_profile not in ELEC_CO2_FACTOR:
            raise ValueError(f"unknown electricity profile {self.elec_profile!r}")
        if self.gas not in GAS_CO2:
            raise ValueError(f"unknown gas type {self.gas!r}")
        if self.carbon_tax < 0:
            raise ValueError("carbon tax must be >= 0")
        if not 0 <= self.renewable_share_min <= 1:
            raise ValueError("renewable_share_min must lie in [0, 1]")

    @property
    def name(self) -> str:
        wood = "WWB" if self.wood_boiler_enabled else "NWB"
        return f"{wood}-CT{self.carbon_tax:g}-{self.elec_profile}-{self.gas}"

    @property
    def gas_co2(self) -> float:
        return GAS_CO2[self.gas]

    @property
    def elec_co2_factor(self) -> float:
        return ELEC_CO2_FACTOR[self.elec_profile]

    @classmethod
    def from_name(cls, name, template=None) -> "ScenarioConfig":
        m = _NAME_RE.match(name.strip())
        if m is None:
            raise ValueError(f"not a scenario name: {name!r}")
        wood, tax, elec, gas = m.groups()
        base = template or cls()
        return replace(base, wood_boiler_enabled=wood == "WWB", carbon_tax=float(tax),
                       elec_profile=elec, gas=gas)


REFERENCE = ScenarioConfig()


def scenario_matrix(template=None, wood=(False, True), taxes=(74.0, 200.0),
                    elec=("RE", "HE"), gas=("NG", "BG")):
    """Cross product of the four scenario axes, in canonical order."""
    axes = {"wood": wood, "taxes": taxes, "elec": elec, "gas": gas}
    empty = [k for k, v in axes.items() if len(v) == 0]
    if empty:
        raise ValueError(f"empty scenario axis: {', '.join(empty)}")
    base = template or ScenarioConfig()
    return [
        replace(base, wood_boiler_enabled=w, carbon_tax=float(c), elec_profile=e, gas=g)
        for w, c, e, g in itertools.product(wood, taxes, elec, gas)
    ]
