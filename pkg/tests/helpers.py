import textwrap

from icnsim.names import Name
from icnsim.scenario import build, loads_scenario

# Five-node edge substrate: PoAs A, B (icn_bs) and C (icn_sr) behind core router R,
# regional cloud D. One-way UE-to-cloud latency is 1 ms radio + 1 ms + 2 ms.
EDGE5 = """
topology:
  nodes:
    - {id: A, role: icn_bs, cpu: 4, storage: 30000000}
    - {id: B, role: icn_bs, cpu: 4, storage: 30000000}
    - {id: C, role: icn_sr, cpu: 4, storage: 30000000}
    - {id: R, role: core_router, cpu: 8, storage: 50000000}
    - {id: D, role: cloud, cpu: 32, storage: 500000000}
  links:
    - {id: A-R, a: A, b: R, latency: 1000, bandwidth: 1000000000}
    - {id: B-R, a: B, b: R, latency: 1000, bandwidth: 1000000000}
    - {id: C-R, a: C, b: R, latency: 1000, bandwidth: 1000000000}
    - {id: R-D, a: R, b: D, latency: 2000, bandwidth: 10000000000}
"""


def scenario_text(timeline: str, ues=(), duration: int = 1_000_000, config: str = "", topology: str = EDGE5,
                  seed: int = 1) -> str:
    parts = [f"seed: {seed}", f"duration_us: {duration}", textwrap.dedent(topology)]
    if config:
        parts.append("config:\n" + textwrap.indent(textwrap.dedent(config).strip(), "  "))
    parts.append(f"ues: [{', '.join(ues)}]")
    parts.append("timeline:\n" + textwrap.indent(textwrap.dedent(timeline).strip(), "  "))
    return "\n".join(parts) + "\n"


def make_sim(timeline: str, ues=(), **kwargs):
    """Build (but do not run) a simulation for an inline scenario."""
    return build(loads_scenario(scenario_text(timeline, ues, **kwargs)))


CONF_SETUP = """
- {at: 0, action: submit_intent, service: base}
- at: 100
  action: submit_intent
  service: conference
  slice: conf1
  name_space: /conf1
  participants: {A: 1, C: 1}
"""


def n(text: str) -> Name:
    return Name.parse(text)
