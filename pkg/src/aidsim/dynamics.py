"""Longitudinal car-following dynamics and lane-change rules.

Two vehicle classes are modeled:

* automated vehicles follow an ACC law that blends the Intelligent Driver
  Model with a constant-acceleration heuristic (CAH) through a coolness
  factor, which suppresses overreaction to cut-ins;
* human-driven vehicles follow plain IDM with a longer time gap, plus a
  start-up lost time at signals.

The scalar laws live in numba-compiled functions so the same code backs
both the public API below and the simulation kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from numba import njit

from .units import kmh_to_ms

# Commanded accelerations are clamped to [EMERGENCY_DECEL, a_max].
EMERGENCY_DECEL = -9.0

# Lane-change gap acceptance: a change is accepted when it would not force
# the new follower (nor the subject) below these decelerations. The relaxed
# bound applies to confused drivers acting on a late route decision.
LC_SAFE_DECEL = -4.0
LC_SAFE_DECEL_RELAXED = -6.0
LC_ADVANTAGE = 0.2       # m/s^2 gain required for a discretionary change
LC_COOLDOWN = 2.0        # s between successive changes by one vehicle

_CAH_DENOM_EPS = 1e-9    # branch-1 denominator guard


@dataclass(frozen=True)
class DriverParams:
    """Car-following parameter bundle for one vehicle class."""

    a_max: float            # maximum acceleration, m/s^2
    b_comf: float           # comfortable deceleration, m/s^2
    coolness: float         # blend weight of the CAH term, in [0, 1]
    delta: float            # free-acceleration exponent
    time_gap: float         # desired time gap T, s
    min_gap: float          # standstill minimum gap s0, m
    desired_speed: float    # open-road desired speed, m/s
    startup_lost_time: float = 0.0
    uses_cah: bool = False

    def __post_init__(self):
        if self.a_max <= 0 or self.b_comf <= 0 or self.min_gap <= 0:
            raise ValueError("a_max, b_comf and min_gap must be positive")
        if self.time_gap < 0 or self.startup_lost_time < 0:
            raise ValueError("time_gap and startup_lost_time must be nonnegative")
        if not 0.0 <= self.coolness <= 1.0:
            raise ValueError("coolness must lie in [0, 1]")
        if self.desired_speed <= 0:
            raise ValueError("desired_speed must be positive")

    def with_overrides(self, **kwargs) -> "DriverParams":
        return replace(self, **kwargs)


# Automated-vehicle control parameters (ACC preset).
CAV_PARAMS = DriverParams(
    a_max=2.0,
    b_comf=2.0,
    coolness=0.99,
    delta=4.0,
    time_gap=0.9,
    min_gap=1.0,
    desired_speed=kmh_to_ms(105.0),  # 29.167 m/s open-road ceiling
    startup_lost_time=0.0,
    uses_cah=True,
)

# Human-driver preset: standard human-calibrated IDM values; desired speed
# follows the current link's limit (the ceiling here is never binding).
HV_PARAMS = DriverParams(
    a_max=1.5,
    b_comf=2.0,
    coolness=0.0,
    delta=4.0,
    time_gap=1.5,
    min_gap=2.0,
    desired_speed=1e9,
    startup_lost_time=2.0,
    uses_cah=False,
)


@dataclass(frozen=True)
class LeaderContext:
    """View of the vehicle directly ahead (or absence thereof)."""

    gap: float = 0.0          # bumper-to-bumper distance, m
    leader_speed: float = 0.0
    leader_accel: float = 0.0
    exists: bool = False

    @staticmethod
    def none() -> "LeaderContext":
        return LeaderContext()

    @staticmethod
    def of(gap: float, leader_speed: float, leader_accel: float = 0.0) -> "LeaderContext":
        return LeaderContext(gap, leader_speed, leader_accel, True)


# --------------------------------------------------------------------------
# Scalar laws (numba-compiled; shared with the simulation kernel)
# --------------------------------------------------------------------------

@njit(cache=True)
def desired_gap_s(s0, T, a_max, b_comf, v, v_lead):
    s = s0 + v * T + v * (v - v_lead) / (2.0 * math.sqrt(a_max * b_comf))
    return max(s0, s)


@njit(cache=True)
def idm_accel_s(a_max, b_comf, delta, T, s0, v_des, v, gap, has_leader, v_lead):
    free = 1.0 - (v / v_des) ** delta
    if not has_leader:
        return a_max * free
    ss = desired_gap_s(s0, T, a_max, b_comf, v, v_lead)
    return a_max * (free - (ss / gap) ** 2)


@njit(cache=True)
def cah_accel_s(a_max, v, gap, v_lead, a_lead):
    a_eff = min(a_lead, a_max)
    if v_lead * (v - v_lead) <= -2.0 * gap * a_eff:
        denom = v_lead * v_lead - 2.0 * gap * a_eff
        if abs(denom) >= _CAH_DENOM_EPS:
            return v * v * a_eff / denom
    dv = v - v_lead
    theta = 1.0 if dv > 0.0 else 0.0
    return a_eff - dv * dv * theta / (2.0 * gap)


@njit(cache=True)
def eidm_accel_s(a_max, b_comf, coolness, delta, T, s0, v_des,
                 v, gap, has_leader, v_lead, a_lead):
    a_idm = idm_accel_s(a_max, b_comf, delta, T, s0, v_des, v, gap, has_leader, v_lead)
    if not has_leader:
        return a_idm
    a_cah = cah_accel_s(a_max, v, gap, v_lead, a_lead)
    if a_idm >= a_cah:
        return a_idm
    return (1.0 - coolness) * a_idm + coolness * (
        a_cah + b_comf * math.tanh((a_idm - a_cah) / b_comf)
    )


@njit(cache=True)
def clamp_accel(a, a_max):
    if a < EMERGENCY_DECEL:
        return EMERGENCY_DECEL
    if a > a_max:
        return a_max
    return a


# --------------------------------------------------------------------------
# Public API
# --------------------------------------------------------------------------

def desired_gap(p: DriverParams, v: float, v_lead: float) -> float:
    """Desired bumper-to-bumper gap at speed v against a leader at v_lead.

    Never below the standstill minimum s0 (the raw expression goes negative
    for strongly opening gaps and is clamped).
    """
    if v < 0:
        raise ValueError("speed must be nonnegative")
    return desired_gap_s(p.min_gap, p.time_gap, p.a_max, p.b_comf, v, v_lead)


def idm_accel(p: DriverParams, v: float, ctx: LeaderContext) -> float:
    """IDM acceleration (free + interaction term); interaction zero without a leader."""
    if v < 0:
        raise ValueError("speed must be nonnegative")
    if ctx.exists and ctx.gap <= 0:
        raise ValueError("nonpositive gap to leader is a collision, not an input")
    v_des = min(p.desired_speed, 1e9)
    return idm_accel_s(p.a_max, p.b_comf, p.delta, p.time_gap, p.min_gap,
                       v_des, v, ctx.gap, ctx.exists, ctx.leader_speed)


def cah_accel(p: DriverParams, v: float, ctx: LeaderContext) -> float:
    """Constant-acceleration-heuristic bound on the required acceleration.

    The leader's acceleration enters capped at the subject's own a_max; the
    near-singular branch-1 denominator falls through to branch 2.
    """
    if not ctx.exists or ctx.gap <= 0:
        raise ValueError("cah_accel requires a leader at positive gap")
    return cah_accel_s(p.a_max, v, ctx.gap, ctx.leader_speed, ctx.leader_accel)


def eidm_accel(p: DriverParams, v: float, ctx: LeaderContext) -> float:
    """ACC acceleration: IDM when it is the milder branch, else the coolness
    blend of IDM and CAH (softened braking, never harsher than IDM)."""
    if v < 0:
        raise ValueError("speed must be nonnegative")
    if ctx.exists and ctx.gap <= 0:
        raise ValueError("nonpositive gap to leader is a collision, not an input")
    return eidm_accel_s(p.a_max, p.b_comf, p.coolness, p.delta, p.time_gap,
                        p.min_gap, p.desired_speed, v, ctx.gap, ctx.exists,
                        ctx.leader_speed, ctx.leader_accel)


def car_following_accel(p: DriverParams, v: float, ctx: LeaderContext) -> float:
    """Class dispatch: blended ACC law for uses_cah params, plain IDM otherwise."""
    if p.uses_cah:
        return eidm_accel(p, v, ctx)
    return idm_accel(p, v, ctx)


def equilibrium_gap(p: DriverParams, v: float) -> float:
    """Gap at which a follower at common speed v has exactly zero acceleration.

    Inverts the IDM interaction balance: s_eq = s*(v, v) / sqrt(1 - (v/v_des)^delta).
    Only defined for v < desired speed; at v = 0 this equals s0.
    """
    if not 0 <= v < p.desired_speed:
        raise ValueError("equilibrium exists only for 0 <= v < desired_speed")
    ss = desired_gap_s(p.min_gap, p.time_gap, p.a_max, p.b_comf, v, v)
    return ss / math.sqrt(1.0 - (v / p.desired_speed) ** p.delta)


@dataclass(frozen=True)
class SignalView:
    """A vehicle's view of the next stop line on its lane."""

    distance: float           # m to the stop line
    state: str                # "green" | "yellow" | "red"
    startup_remaining: float = 0.0


def signal_approach_accel(p: DriverParams, v: float, dist_to_stopline: float,
                          signal_state: str) -> float:
    """Acceleration commanded by an upcoming stop line on an otherwise free road.

    Red (or yellow with enough distance to brake comfortably) turns the stop
    line into a standing virtual leader; green passes through to free flow.
    """
    stop = signal_state == "red"
    if signal_state == "yellow":
        stop = dist_to_stopline >= v * v / (2.0 * p.b_comf)
    if not stop:
        return car_following_accel(p, v, LeaderContext.none())
    ctx = LeaderContext.of(gap=dist_to_stopline, leader_speed=0.0, leader_accel=0.0)
    return car_following_accel(p, v, ctx)


def hv_accel(p: DriverParams, v: float, ctx: LeaderContext,
             signal_view: SignalView | None = None) -> float:
    """Human-driver acceleration: IDM, a stop-line hold, and start-up lost time.

    A queue leader whose signal has just turned green holds zero acceleration
    until its start-up timer elapses; followers are delayed only through the
    ordinary gap dynamics.
    """
    if p.uses_cah:
        raise ValueError("hv_accel is the human-driver law (uses_cah must be False)")
    if signal_view is not None and signal_view.startup_remaining > 0:
        return 0.0
    a = idm_accel(p, v, ctx)
    if signal_view is not None:
        a = min(a, signal_approach_accel(p, v, signal_view.distance, signal_view.state))
    return clamp_accel(a, p.a_max)


def confusion_speed_filter(desired_speed: float, confused: bool, in_zone: bool,
                           factor: float = 0.5) -> float:
    """Current desired speed after the confusion slowdown.

    Confused drivers inside a designated confusion zone drop to
    factor * desired_speed; everyone else (and anyone outside the zone)
    keeps the unmodified value.
    """
    if confused and in_zone:
        return factor * desired_speed
    return desired_speed


@dataclass(frozen=True)
class GapAssessment:
    """Decelerations a lane change would impose on the new follower and on self."""

    follower_decel: float     # new follower's acceleration against the mover
    self_decel: float         # mover's acceleration against its new leader


def gap_is_acceptable(assessment: GapAssessment, relaxed: bool = False) -> bool:
    limit = LC_SAFE_DECEL_RELAXED if relaxed else LC_SAFE_DECEL
    return assessment.follower_decel >= limit and assessment.self_decel >= limit


def lane_change_decision(mandatory: bool, assessment: GapAssessment | None,
                         advantage: float = 0.0, relaxed: bool = False) -> bool:
    """Accept or reject a candidate lane change.

    Mandatory changes (required to reach the route's connector) accept any
    gap meeting the safety bound (-4 m/s^2 normally, -6 m/s^2 for a confused
    driver acting on a late decision). Discretionary changes additionally
    require an acceleration advantage of at least LC_ADVANTAGE and never use
    the relaxed bound. `assessment` is None when the target lane is empty at
    the candidate position, which any criterion accepts.
    """
    if assessment is not None and not gap_is_acceptable(assessment, relaxed and mandatory):
        return False
    if not mandatory and advantage < LC_ADVANTAGE:
        return False
    return True
