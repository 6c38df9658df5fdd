"""Fixed-time signal control.

Controllers are immutable cycle plans; the state of any stop-line group at
time t is a pure function of (plan, t mod cycle). Built-in plans cover the
two interchange forms:

* diamond terminals: three phases (through, left-to-ramp, left-from-ramp)
  with 73/17/18 s greens and 4 s clearance each in a 120 s cycle;
* crossover nodes: two phases of 55 s green and 5 s clearance each.
"""

from __future__ import annotations

from dataclasses import dataclass, field

GREEN = "green"
YELLOW = "yellow"
RED = "red"


@dataclass(frozen=True)
class Phase:
    id: str
    green_start: float
    green_duration: float
    clearance: float

    @property
    def green_end(self) -> float:
        return self.green_start + self.green_duration

    @property
    def clearance_end(self) -> float:
        return self.green_end + self.clearance


@dataclass(frozen=True)
class SignalController:
    id: str
    cycle_length: float
    phases: tuple[Phase, ...]
    offset: float = 0.0

    def __post_init__(self):
        if self.cycle_length <= 0:
            raise ValueError(f"controller {self.id}: cycle_length must be positive")
        spans = []
        for ph in self.phases:
            if ph.green_duration <= 0 or ph.clearance < 0:
                raise ValueError(f"phase {self.id}:{ph.id}: bad durations")
            if ph.green_start < 0 or ph.clearance_end > self.cycle_length:
                raise ValueError(
                    f"phase {self.id}:{ph.id}: interval outside [0, cycle)")
            spans.append((ph.green_start, ph.clearance_end, ph.id))
        spans.sort()
        for (s0, e0, p0), (s1, e1, p1) in zip(spans, spans[1:]):
            if s1 < e0:
                raise ValueError(
                    f"controller {self.id}: phases {p0} and {p1} overlap")

    def group(self, phase_id: str) -> str:
        """Qualified signal-group name for a phase, referenced by stop lines."""
        if phase_id not in [p.id for p in self.phases]:
            raise KeyError(f"controller {self.id} has no phase {phase_id}")
        return f"{self.id}:{phase_id}"

    def phase_state(self, phase_id: str, t: float) -> str:
        tau = (t - self.offset) % self.cycle_length
        for ph in self.phases:
            if ph.id == phase_id:
                if ph.green_start <= tau < ph.green_end:
                    return GREEN
                if ph.green_end <= tau < ph.clearance_end:
                    return YELLOW
                return RED
        raise KeyError(f"controller {self.id} has no phase {phase_id}")


@dataclass(frozen=True)
class SignalState:
    """Snapshot of every signal group at one instant."""

    time: float
    states: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, group: str) -> str:
        return self.states[group]


def state_at(controllers, t: float) -> SignalState:
    """States of all groups of one controller (or an iterable of them) at time t."""
    if isinstance(controllers, SignalController):
        controllers = [controllers]
    states = {}
    for ctrl in controllers:
        for ph in ctrl.phases:
            states[ctrl.group(ph.id)] = ctrl.phase_state(ph.id, t)
    return SignalState(time=t, states=states)


def crossover_plan(node_id: str, green: float = 55.0, clearance: float = 5.0,
                   cycle: float = 120.0, offset: float = 0.0) -> SignalController:
    """Two-phase crossover controller: each through movement gets `green` s."""
    return SignalController(
        id=node_id,
        cycle_length=cycle,
        offset=offset,
        phases=(
            Phase("fwd", 0.0, green, clearance),
            Phase("rev", green + clearance, green, clearance),
        ),
    )


def diamond_terminal_plan(node_id: str, through: float = 73.0,
                          left_to_ramp: float = 17.0, left_from_ramp: float = 18.0,
                          clearance: float = 4.0, cycle: float = 120.0,
                          offset: float = 0.0) -> SignalController:
    """Three-phase diamond terminal controller (through / left-to-ramp / left-from-ramp)."""
    t0 = 0.0
    t1 = through + clearance
    t2 = t1 + left_to_ramp + clearance
    return SignalController(
        id=node_id,
        cycle_length=cycle,
        offset=offset,
        phases=(
            Phase("through", t0, through, clearance),
            Phase("left_to_ramp", t1, left_to_ramp, clearance),
            Phase("left_from_ramp", t2, left_from_ramp, clearance),
        ),
    )


def default_ddi_plan() -> tuple[SignalController, SignalController]:
    """The two crossover controllers with default (zero) offsets."""
    return crossover_plan("X1"), crossover_plan("X2")


def default_cdi_plan() -> tuple[SignalController, SignalController]:
    """The two diamond terminal controllers with default (zero) offsets."""
    return diamond_terminal_plan("T1"), diamond_terminal_plan("T2")
