"""Builders for the three study networks.

All three share naming conventions: the arterial/mainline runs "eastbound"
(EB) and "westbound" (WB); lane 0 is the curb lane and indices grow toward
the median, with turn bays / U-turn pockets as partial lanes above the full
lane count.

cdi   Conventional diamond interchange: two three-phase ramp terminals,
      left-turn bays on the interior links, off-ramp rights yield.
ddi   Diverging diamond: the interior links carry traffic on the opposite
      side (lane mapping swaps at the crossovers), two-phase signals at the
      crossovers only, ramp movements unsignalized.
rcut  Restricted crossing U-turn, westbound mainline only: minor street
      merges right-in under yield control, U-turn pocket diverges about
      1,300 ft downstream, with normal and late route decision points.

Builders are pure functions of the configuration.
"""

from __future__ import annotations

from .config import ScenarioConfig
from .control import crossover_plan, diamond_terminal_plan
from .netmodel import (ConfusionZone, Connector, DecisionPoint, Detector,
                       LaneSpan, Link, Origin, RoadNetwork, Route, StopLine)
from .units import mph_to_ms

# Decision-point conventions for the RCUT U-turn movement: familiar drivers
# commit shortly after the minor street; confused drivers only react when
# the pocket opens beside them.
_RCUT_NORMAL_DP = 30.0


def _through_map(lanes: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, i) for i in range(lanes))


def _cross_map(lanes: int) -> tuple[tuple[int, int], ...]:
    """Crossover mapping: traffic swaps to the opposite side of the road."""
    return tuple((i, lanes - 1 - i) for i in range(lanes))


def _diamond_skeleton(cfg: ScenarioConfig, cross: bool) -> dict[str, Link]:
    """Links shared by both interchange forms; `cross` swaps the interior
    lane mappings and frees the ramp movements (diverging layout)."""
    net, n = cfg.network, cfg.network.lanes
    v = net.speed_limit
    ramp_v = mph_to_ms(30.0)
    bay = LaneSpan(net.interior_length - net.bay_length, net.interior_length)
    arterial_map = _cross_map(n) if cross else _through_map(n)

    def mid(name: str, out_link: str, ramp: str) -> Link:
        return Link(
            id=name, length=net.interior_length, lane_count=n, speed_limit=v,
            pockets={n: bay},
            connectors=(
                Connector(out_link, arterial_map, "through"),
                Connector(ramp, ((n, 0),), "left"),
            ),
        )

    def off_ramp(name: str, left_target: str, right_target: str) -> Link:
        # Lane 0 is the channelized right turn (always yield-controlled);
        # lane 1 carries the left turn onto the arterial.
        return Link(
            id=name, length=net.ramp_length, lane_count=2, speed_limit=ramp_v,
            connectors=(
                Connector(left_target, ((1, n - 1),), "left", yields=cross),
                Connector(right_target, ((0, 0),), "right", yields=True),
            ),
        )

    return {
        "EB_in": Link("EB_in", net.approach_length, n, v,
                      (Connector("EB_mid", arterial_map, "through"),)),
        "EB_mid": mid("EB_mid", "EB_out", "ON2"),
        "EB_out": Link("EB_out", net.approach_length, n, v),
        "WB_in": Link("WB_in", net.approach_length, n, v,
                      (Connector("WB_mid", arterial_map, "through"),)),
        "WB_mid": mid("WB_mid", "WB_out", "ON1"),
        "WB_out": Link("WB_out", net.approach_length, n, v),
        "OFF1": off_ramp("OFF1", "EB_mid", "WB_out"),
        "OFF2": off_ramp("OFF2", "WB_mid", "EB_out"),
        "ON1": Link("ON1", net.ramp_length, 1, ramp_v),
        "ON2": Link("ON2", net.ramp_length, 1, ramp_v),
    }


def _diamond_demand(cfg: ScenarioConfig) -> tuple[dict, dict]:
    d = cfg.demand
    left, ramp_left = d.left_turn_share, d.ramp_left_share
    origins = {
        "EB": Origin("EB", "EB_in", d.arterial_vph),
        "WB": Origin("WB", "WB_in", d.arterial_vph),
        "OFF1": Origin("OFF1", "OFF1", d.ramp_vph),
        "OFF2": Origin("OFF2", "OFF2", d.ramp_vph),
    }
    routes = {
        "eb_through": Route("eb_through", ("EB_in", "EB_mid", "EB_out"), 1 - left),
        "eb_left": Route("eb_left", ("EB_in", "EB_mid", "ON2"), left),
        "wb_through": Route("wb_through", ("WB_in", "WB_mid", "WB_out"), 1 - left),
        "wb_left": Route("wb_left", ("WB_in", "WB_mid", "ON1"), left),
        "off1_left": Route("off1_left", ("OFF1", "EB_mid", "EB_out"), ramp_left),
        "off1_right": Route("off1_right", ("OFF1", "WB_out"), 1 - ramp_left),
        "off2_left": Route("off2_left", ("OFF2", "WB_mid", "WB_out"), ramp_left),
        "off2_right": Route("off2_right", ("OFF2", "EB_out"), 1 - ramp_left),
    }
    return origins, routes


def build_cdi(cfg: ScenarioConfig) -> RoadNetwork:
    """Conventional diamond interchange."""
    _require_kind(cfg, "cdi")
    net, sig, n = cfg.network, cfg.signals, cfg.network.lanes
    links = _diamond_skeleton(cfg, cross=False)
    origins, routes = _diamond_demand(cfg)

    def terminal(node: str, offset: float):
        return diamond_terminal_plan(
            node, through=sig.cdi_through_green,
            left_to_ramp=sig.cdi_left_to_ramp_green,
            left_from_ramp=sig.cdi_left_from_ramp_green,
            clearance=sig.cdi_clearance, cycle=sig.cycle, offset=offset)

    t1 = terminal("T1", 0.0)
    t2 = terminal("T2", sig.offset_second_node)
    full = tuple(range(n))
    stop_lines = [
        StopLine("EB_in", full, net.approach_length, "T1:through"),
        StopLine("WB_mid", full, net.interior_length, "T1:through"),
        StopLine("WB_mid", (n,), net.interior_length, "T1:left_to_ramp"),
        StopLine("OFF1", (1,), net.ramp_length, "T1:left_from_ramp"),
        StopLine("WB_in", full, net.approach_length, "T2:through"),
        StopLine("EB_mid", full, net.interior_length, "T2:through"),
        StopLine("EB_mid", (n,), net.interior_length, "T2:left_to_ramp"),
        StopLine("OFF2", (1,), net.ramp_length, "T2:left_from_ramp"),
    ]
    network = RoadNetwork(
        name="cdi", links=links, routes=routes, origins=origins,
        controllers=[t1, t2], stop_lines=stop_lines)
    network.validate()
    return network


def build_ddi(cfg: ScenarioConfig) -> RoadNetwork:
    """Diverging diamond interchange."""
    _require_kind(cfg, "ddi")
    net, sig, conf, n = cfg.network, cfg.signals, cfg.confusion, cfg.network.lanes
    links = _diamond_skeleton(cfg, cross=True)
    origins, routes = _diamond_demand(cfg)

    def crossover(node: str, offset: float):
        return crossover_plan(node, green=sig.ddi_green,
                              clearance=sig.ddi_clearance,
                              cycle=sig.cycle, offset=offset)

    x1 = crossover("X1", 0.0)
    x2 = crossover("X2", sig.offset_second_node)
    full = tuple(range(n))
    stop_lines = [
        StopLine("EB_in", full, net.approach_length, "X1:fwd"),
        StopLine("WB_mid", full, net.interior_length, "X1:rev"),
        StopLine("EB_mid", full, net.interior_length, "X2:fwd"),
        StopLine("WB_in", full, net.approach_length, "X2:rev"),
    ]
    zone = conf.zone_length
    zones = [
        ConfusionZone("EB_in", net.approach_length - zone, net.approach_length),
        ConfusionZone("WB_in", net.approach_length - zone, net.approach_length),
        ConfusionZone("EB_mid", net.interior_length - zone, net.interior_length),
        ConfusionZone("WB_mid", net.interior_length - zone, net.interior_length),
    ]
    network = RoadNetwork(
        name="ddi", links=links, routes=routes, origins=origins,
        controllers=[x1, x2], stop_lines=stop_lines, confusion_zones=zones)
    network.validate()
    return network


def build_rcut(cfg: ScenarioConfig) -> RoadNetwork:
    """Restricted crossing U-turn intersection, westbound mainline."""
    _require_kind(cfg, "rcut")
    net, dem, conf, n = cfg.network, cfg.demand, cfg.confusion, cfg.network.lanes
    v = net.speed_limit
    len_a = net.minor_offset
    len_b = net.diverge_offset
    len_c = net.mainline_length - len_a - len_b
    pocket = LaneSpan(len_b - net.pocket_length, len_b)
    links = {
        "WB_a": Link("WB_a", len_a, n, v,
                     (Connector("WB_b", _through_map(n), "through"),)),
        "WB_b": Link("WB_b", len_b, n, v, pockets={n: pocket},
                     connectors=(
                         Connector("WB_c", _through_map(n), "through"),
                         Connector("UTURN", ((n, 0),), "uturn"),
                     )),
        "WB_c": Link("WB_c", len_c, n, v),
        "MINOR": Link("MINOR", net.ramp_length, 1, mph_to_ms(30.0),
                      (Connector("WB_b", ((0, 0),), "merge", yields=True),)),
        "UTURN": Link("UTURN", net.uturn_length, 1, mph_to_ms(20.0),
                      (Connector("EB_r", ((0, n - 1),), "merge"),)),
        "EB_r": Link("EB_r", 400.0, n, v),
    }
    origins = {
        "WB": Origin("WB", "WB_a", dem.mainline_vph),
        "MINOR": Origin("MINOR", "MINOR", dem.minor_vph),
    }
    u = dem.minor_uturn_share
    routes = {
        "wb_through": Route("wb_through", ("WB_a", "WB_b", "WB_c"), 1.0),
        "minor_uturn": Route("minor_uturn", ("MINOR", "WB_b", "UTURN", "EB_r"), u),
        "minor_through": Route("minor_through", ("MINOR", "WB_b", "WB_c"), 1 - u),
    }
    detectors = [
        Detector("upstream", "WB_a", min(400.0, len_a / 2), cfg.measurement.detector_window),
        Detector("diverging", "WB_b", len_b - 16.0, cfg.measurement.detector_window),
        Detector("downstream", "WB_c", min(400.0, len_c / 2), cfg.measurement.detector_window),
    ]
    decision_points = [
        DecisionPoint("WB_b", _RCUT_NORMAL_DP, "uturn", "normal"),
        DecisionPoint("WB_b", pocket.start, "uturn", "late"),
    ]
    zones = [ConfusionZone("WB_b", len_b - conf.zone_length, len_b)]
    network = RoadNetwork(
        name="rcut", links=links, routes=routes, origins=origins,
        detectors=detectors, decision_points=decision_points,
        confusion_zones=zones)
    network.validate()
    return network


def build_network(cfg: ScenarioConfig) -> RoadNetwork:
    """Dispatch on cfg.network.kind."""
    cfg.validate()
    builder = {"cdi": build_cdi, "ddi": build_ddi, "rcut": build_rcut}[cfg.network.kind]
    return builder(cfg)


def _require_kind(cfg: ScenarioConfig, kind: str) -> None:
    cfg.validate()
    if cfg.network.kind != kind:
        raise ValueError(f"config selects network {cfg.network.kind!r}, not {kind!r}")
