from __future__ import annotations

from ipaddress import IPv4Address

import pytest

from censorkit.netsim.scenarios import load_scenario


ARCHETYPE_NAMES = ("airtel_wm", "jio_wm", "idea_im", "vodafone_im")


def small_chain_config(routers: int = 3, anonymized: tuple[int, ...] = ()) -> dict:
    """Client -- r1..rN -- two servers; deliberately tiny."""
    cfg = {
        "seed": 0,
        "routers": [
            {"addr": f"81.0.0.{i}", "as": "AS-TEST", "anonymized": i in anonymized}
            for i in range(1, routers + 1)
        ],
        "clients": [{"name": "c1", "addr": "81.0.1.10", "as_prefixes": ["81.0.0.0/16"]}],
        "servers": [
            {"addr": "151.101.9.10", "pages": {"blocked.example": {"body": "<p>forbidden</p>"}}},
            {"addr": "151.101.9.11", "pages": {"allowed.example": {"body": "<p>cats</p>"}}},
        ],
        "links": [["81.0.1.10", "81.0.0.1"]]
        + [[f"81.0.0.{i}", f"81.0.0.{i+1}"] for i in range(1, routers)]
        + [[f"81.0.0.{routers}", "151.101.9.10"], [f"81.0.0.{routers}", "151.101.9.11"]],
        "authority": {"blocked.example": ["151.101.9.10"], "allowed.example": ["151.101.9.11"]},
        "as_map": {"81.0.0.0/16": "AS-TEST", "151.101.0.0/16": "AS-HOSTING"},
    }
    return cfg


@pytest.fixture
def chain_config():
    return small_chain_config()


def scenario_client(name: str, seed: int = 0):
    scenario = load_scenario(name, seed)
    sim = scenario.build()
    return scenario, sim, scenario.client(sim)


def addr(text: str) -> IPv4Address:
    return IPv4Address(text)
