"""Road network representation.

A network is a directed graph of links. Each link carries `lane_count`
full-length lanes indexed from 0 at the curb side; turn bays and U-turn
pockets are extra partial-extent lanes with indices continuing upward.
Connectors join links at the downstream end with an explicit lane mapping
and a movement tag; a connector may yield to the priority streams feeding
its target lane. Networks are immutable after build and safe to share
across concurrently running replications.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .control import SignalController


class NetworkError(ValueError):
    """Raised by validate() with one message line per violated constraint."""


@dataclass(frozen=True)
class LaneSpan:
    """Longitudinal extent of a partial lane (pocket / bay) on its link."""

    start: float
    end: float


@dataclass(frozen=True)
class Connector:
    to_link: str
    lane_map: tuple[tuple[int, int], ...]   # (from-lane, to-lane) pairs
    movement: str                           # through | left | right | uturn | merge
    yields: bool = False                    # gap-accept against priority feeders


@dataclass(frozen=True)
class Link:
    id: str
    length: float
    lane_count: int
    speed_limit: float
    connectors: tuple[Connector, ...] = ()
    pockets: dict[int, LaneSpan] = field(default_factory=dict)

    def lane_indices(self) -> list[int]:
        return list(range(self.lane_count)) + sorted(self.pockets)

    def lane_span(self, lane: int) -> LaneSpan:
        if lane < self.lane_count:
            return LaneSpan(0.0, self.length)
        return self.pockets[lane]

    def connector_to(self, to_link: str) -> Connector | None:
        for c in self.connectors:
            if c.to_link == to_link:
                return c
        return None


@dataclass(frozen=True)
class Route:
    id: str
    links: tuple[str, ...]
    share: float                 # share of the origin's demand


@dataclass(frozen=True)
class Origin:
    id: str
    link: str
    vph: float


@dataclass(frozen=True)
class Detector:
    id: str
    link: str
    position: float
    window: float = 300.0


@dataclass(frozen=True)
class DecisionPoint:
    """Where drivers commit to the lane changes a movement requires.

    The late variant sits strictly downstream of the normal one and is used
    by confused drivers, forcing last-minute maneuvers.
    """

    link: str
    position: float
    movement: str
    variant: str = "normal"      # "normal" | "late"


@dataclass(frozen=True)
class StopLine:
    link: str
    lanes: tuple[int, ...]
    position: float
    signal_group: str            # "<controller>:<phase>"


@dataclass(frozen=True)
class ConfusionZone:
    """Stretch where confused drivers drop to a fraction of desired speed."""

    link: str
    start: float
    end: float


@dataclass
class RoadNetwork:
    name: str
    links: dict[str, Link] = field(default_factory=dict)
    routes: dict[str, Route] = field(default_factory=dict)
    origins: dict[str, Origin] = field(default_factory=dict)
    controllers: list[SignalController] = field(default_factory=list)
    stop_lines: list[StopLine] = field(default_factory=list)
    detectors: list[Detector] = field(default_factory=list)
    decision_points: list[DecisionPoint] = field(default_factory=list)
    confusion_zones: list[ConfusionZone] = field(default_factory=list)

    # -- queries ----------------------------------------------------------

    def routes_from(self, origin_id: str) -> list[Route]:
        link = self.origins[origin_id].link
        return [r for r in self.routes.values() if r.links[0] == link]

    def signal_groups(self) -> dict[str, SignalController]:
        groups = {}
        for ctrl in self.controllers:
            for ph in ctrl.phases:
                groups[ctrl.group(ph.id)] = ctrl
        return groups

    def reachable_links(self, start: str) -> set[str]:
        seen = {start}
        frontier = [start]
        while frontier:
            here = frontier.pop()
            for conn in self.links[here].connectors:
                if conn.to_link not in seen:
                    seen.add(conn.to_link)
                    frontier.append(conn.to_link)
        return seen

    # -- validation -------------------------------------------------------

    def validate(self) -> None:
        problems = []
        problems += self._check_links()
        problems += self._check_routes()
        problems += self._check_signals()
        problems += self._check_measurement()
        if problems:
            raise NetworkError("\n".join(problems))

    def _check_links(self) -> list[str]:
        problems = []
        for link in self.links.values():
            if link.length <= 0:
                problems.append(f"link {link.id}: length must be positive")
            if link.lane_count < 1:
                problems.append(f"link {link.id}: needs at least one lane")
            if link.speed_limit <= 0:
                problems.append(f"link {link.id}: speed limit must be positive")
            for lane, span in link.pockets.items():
                if lane < link.lane_count:
                    problems.append(
                        f"link {link.id}: pocket index {lane} collides with full lanes")
                if not 0 <= span.start < span.end <= link.length:
                    problems.append(f"link {link.id}: pocket {lane} extent invalid")
            lanes = set(link.lane_indices())
            for conn in link.connectors:
                if conn.to_link not in self.links:
                    problems.append(
                        f"link {link.id}: connector to unknown link {conn.to_link}")
                    continue
                to = self.links[conn.to_link]
                to_lanes = set(to.lane_indices())
                for src, dst in conn.lane_map:
                    if src not in lanes:
                        problems.append(
                            f"connector {link.id}->{conn.to_link}: no source lane {src}")
                    if dst not in to_lanes:
                        problems.append(
                            f"connector {link.id}->{conn.to_link}: no target lane {dst}")
        return problems

    def _check_routes(self) -> list[str]:
        problems = []
        for route in self.routes.values():
            for a, b in zip(route.links, route.links[1:]):
                if a not in self.links:
                    problems.append(f"route {route.id}: unknown link {a}")
                    continue
                if self.links[a].connector_to(b) is None:
                    problems.append(
                        f"route {route.id}: links {a} and {b} are not connected")
        for origin in self.origins.values():
            if origin.vph < 0:
                problems.append(f"origin {origin.id}: negative demand")
            if origin.link not in self.links:
                problems.append(f"origin {origin.id}: unknown entry link {origin.link}")
                continue
            routes = self.routes_from(origin.id)
            if routes:
                total = sum(r.share for r in routes)
                if abs(total - 1.0) > 1e-9:
                    problems.append(
                        f"origin {origin.id}: route shares sum to {total}, expected 1")
            elif origin.vph > 0:
                problems.append(f"origin {origin.id}: demand but no routes")
        return problems

    def _check_signals(self) -> list[str]:
        problems = []
        groups = self.signal_groups()
        ids = [c.id for c in self.controllers]
        if len(set(ids)) != len(ids):
            problems.append("duplicate controller ids")
        seen: dict[tuple[str, int], str] = {}
        for sl in self.stop_lines:
            if sl.link not in self.links:
                problems.append(f"stop line on unknown link {sl.link}")
                continue
            if sl.signal_group not in groups:
                problems.append(
                    f"stop line {sl.link}@{sl.position}: unknown group {sl.signal_group}")
            link = self.links[sl.link]
            lanes = set(link.lane_indices())
            for lane in sl.lanes:
                if lane not in lanes:
                    problems.append(f"stop line {sl.link}: no lane {lane}")
                key = (sl.link, lane)
                if key in seen and seen[key] != sl.signal_group:
                    problems.append(
                        f"lane {sl.link}:{lane} controlled by more than one group")
                seen[key] = sl.signal_group
        return problems

    def _check_measurement(self) -> list[str]:
        problems = []
        for det in self.detectors:
            if det.link not in self.links:
                problems.append(f"detector {det.id}: unknown link {det.link}")
                continue
            if not 0 <= det.position <= self.links[det.link].length:
                problems.append(f"detector {det.id}: position outside link")
            if det.window <= 0:
                problems.append(f"detector {det.id}: nonpositive window")
        by_movement: dict[tuple[str, str], dict[str, float]] = {}
        for dp in self.decision_points:
            if dp.link not in self.links:
                problems.append(f"decision point on unknown link {dp.link}")
                continue
            if not 0 <= dp.position <= self.links[dp.link].length:
                problems.append(f"decision point {dp.link}@{dp.position}: outside link")
            if dp.variant not in ("normal", "late"):
                problems.append(f"decision point {dp.link}: bad variant {dp.variant}")
            by_movement.setdefault((dp.link, dp.movement), {})[dp.variant] = dp.position
        for (link, movement), variants in by_movement.items():
            if "late" in variants and "normal" in variants:
                if variants["late"] <= variants["normal"]:
                    problems.append(
                        f"decision points for {movement} on {link}: "
                        "late variant must sit downstream of normal")
        for cz in self.confusion_zones:
            if cz.link not in self.links:
                problems.append(f"confusion zone on unknown link {cz.link}")
            elif not 0 <= cz.start < cz.end <= self.links[cz.link].length:
                problems.append(f"confusion zone on {cz.link}: extent invalid")
        return problems
