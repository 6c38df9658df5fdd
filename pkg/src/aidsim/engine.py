"""Deterministic simulation engine.

Compiles a RoadNetwork + ScenarioConfig into flat arrays, pregenerates the
demand (all randomness is drawn up front from named substreams, so the step
kernel itself is purely deterministic), runs replications, and reduces the
raw event buffers into RunRecords and measurements.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from .config import ScenarioConfig
from .dynamics import DriverParams
from .netmodel import RoadNetwork
from .rng import RandomStream, as_generator
from .scenarios import build_network

HV = 0
CAV = 1
CLASS_NAMES = ("HV", "CAV")

_NO_DP = -1.0e18


# --------------------------------------------------------------------------
# Demand primitives
# --------------------------------------------------------------------------

def generate_arrivals(vph: float, duration: float, stream) -> np.ndarray:
    """Arrival times of a homogeneous Poisson process over [0, duration).

    Exponential headways with mean 3600/vph seconds. Spawning may defer an
    arrival when the entry is blocked; generation itself never drops one.
    """
    if vph < 0:
        raise ValueError("vph must be nonnegative")
    if vph == 0 or duration <= 0:
        return np.empty(0, dtype=np.float64)
    rng = as_generator(stream)
    mean = 3600.0 / vph
    expected = duration / mean
    chunk = int(expected + 10.0 * np.sqrt(expected) + 50)
    times = np.cumsum(rng.exponential(mean, chunk))
    while times[-1] < duration:
        more = np.cumsum(rng.exponential(mean, chunk)) + times[-1]
        times = np.concatenate([times, more])
    return times[times < duration]


def assign_class(stream, mpr: float, size=None):
    """Bernoulli(mpr) class draw per vehicle: CAV with probability mpr."""
    if not 0.0 <= mpr <= 1.0:
        raise ValueError("mpr must lie in [0, 1]")
    rng = as_generator(stream)
    draw = rng.random(size)
    if size is None:
        return CAV if draw < mpr else HV
    return np.where(draw < mpr, CAV, HV).astype(np.uint8)


def assign_confusion(stream, share: float, vclass, size=None):
    """Confusion flag: true with probability `share` for HVs, never for CAVs
    (connectivity removes the unfamiliarity)."""
    if not 0.0 <= share <= 1.0:
        raise ValueError("share must lie in [0, 1]")
    rng = as_generator(stream)
    draw = rng.random(size)
    if size is None:
        return bool(draw < share) and vclass == HV
    flags = (draw < share) & (np.asarray(vclass) == HV)
    return flags.astype(np.uint8)


# --------------------------------------------------------------------------
# Scenario compilation
# --------------------------------------------------------------------------

class CompiledScenario:
    """Flat-array form of a network + config, as consumed by the kernel."""

    def __init__(self, cfg: ScenarioConfig, network: RoadNetwork | None = None):
        cfg.validate()
        self.cfg = cfg
        self.network = network if network is not None else build_network(cfg)
        self._build()

    def _build(self) -> None:
        net = self.network
        links = list(net.links.values())
        self.link_ids = [ln.id for ln in links]
        link_idx = {lid: i for i, lid in enumerate(self.link_ids)}
        L = len(links)

        # lanes: contiguous global ids per link, local index order
        lane_link, lane_lo, lane_hi = [], [], []
        link_lane0 = np.zeros(L, np.int32)
        link_nlanes = np.zeros(L, np.int32)
        link_full = np.zeros(L, np.int32)
        for li, link in enumerate(links):
            link_lane0[li] = len(lane_link)
            for lane in link.lane_indices():
                span = link.lane_span(lane)
                lane_link.append(li)
                lane_lo.append(span.start)
                lane_hi.append(span.end)
            link_nlanes[li] = len(link.lane_indices())
            link_full[li] = link.lane_count
        NL = len(lane_link)
        self.n_lanes = NL
        lane_link = np.array(lane_link, np.int32)
        self.lane_gid = lambda lid, lane: int(link_lane0[link_idx[lid]] + lane)

        link_len = np.array([ln.length for ln in links], np.float64)
        link_cap = np.array([ln.speed_limit for ln in links], np.float64)

        # signal groups
        grp_ids: list[str] = []
        grp_cycle, grp_off, grp_g0, grp_g1, grp_y1 = [], [], [], [], []
        for ctrl in net.controllers:
            for ph in ctrl.phases:
                grp_ids.append(ctrl.group(ph.id))
                grp_cycle.append(ctrl.cycle_length)
                grp_off.append(ctrl.offset)
                grp_g0.append(ph.green_start)
                grp_g1.append(ph.green_end)
                grp_y1.append(ph.clearance_end)
        self.group_ids = grp_ids
        gidx = {g: i for i, g in enumerate(grp_ids)}
        lane_stop_pos = np.full(NL, kernel.NO_STOP, np.float64)
        lane_stop_grp = np.full(NL, -1, np.int32)
        for sl in net.stop_lines:
            for lane in sl.lanes:
                g = self.lane_gid(sl.link, lane)
                lane_stop_pos[g] = sl.position
                lane_stop_grp[g] = gidx[sl.signal_group]
        if not grp_ids:  # keep kernel group arrays non-empty
            grp_cycle, grp_off, grp_g0, grp_g1, grp_y1 = [1.0], [0.0], [0.0], [0.0], [0.0]

        # confusion zones (at most one per link by construction)
        link_cz_lo = np.full(L, kernel.FAR, np.float64)
        link_cz_hi = np.full(L, -kernel.FAR, np.float64)
        for cz in net.confusion_zones:
            li = link_idx[cz.link]
            link_cz_lo[li] = cz.start
            link_cz_hi[li] = cz.end

        # detectors grouped by link, sorted by position
        det_order = sorted(range(len(net.detectors)),
                           key=lambda d: (link_idx[net.detectors[d].link],
                                          net.detectors[d].position))
        self.detector_names = [net.detectors[d].id for d in det_order]
        det_pos = np.array([net.detectors[d].position for d in det_order],
                           np.float64)
        self.detector_links = [link_idx[net.detectors[d].link] for d in det_order]
        link_det0 = np.zeros(L, np.int32)
        link_detn = np.zeros(L, np.int32)
        for li in range(L):
            idxs = [k for k, dl in enumerate(self.detector_links) if dl == li]
            if idxs:
                link_det0[li] = min(idxs)
                link_detn[li] = max(idxs) + 1

        # routes
        routes = list(net.routes.values())
        self.route_ids = [r.id for r in routes]
        route_off = np.zeros(len(routes) + 1, np.int32)
        for r, route in enumerate(routes):
            route_off[r + 1] = route_off[r] + len(route.links)
        S = int(route_off[-1])
        maxl = int(link_nlanes.max())
        rs_link = np.zeros(S, np.int32)
        rs_cum = np.zeros(S, np.float64)
        rs_target = np.full((S, maxl), -1, np.int32)
        rs_last = np.zeros(S, np.uint8)
        rs_yield = np.zeros(S, np.uint8)
        rs_dpn = np.full(S, _NO_DP, np.float64)
        rs_dpl = np.full(S, _NO_DP, np.float64)
        dps = {}
        for dp in net.decision_points:
            dps.setdefault((dp.link, dp.movement, dp.variant), dp.position)
        for r, route in enumerate(routes):
            cum = 0.0
            for s, lid in enumerate(route.links):
                rs = route_off[r] + s
                li = link_idx[lid]
                rs_link[rs] = li
                rs_cum[rs] = cum
                cum += links[li].length
                if s == len(route.links) - 1:
                    rs_last[rs] = 1
                    continue
                conn = links[li].connector_to(route.links[s + 1])
                rs_yield[rs] = 1 if conn.yields else 0
                for src, dst in conn.lane_map:
                    rs_target[rs, src] = self.lane_gid(route.links[s + 1], dst)
                key_n = (lid, conn.movement, "normal")
                key_l = (lid, conn.movement, "late")
                if key_n in dps:
                    rs_dpn[rs] = dps[key_n]
                if key_l in dps:
                    rs_dpl[rs] = dps[key_l]

        # priority feeders per lane: lanes that reach it via non-yield connectors
        feeders: list[list[int]] = [[] for _ in range(NL)]
        for link in links:
            for conn in link.connectors:
                if conn.yields:
                    continue
                for src, dst in conn.lane_map:
                    tgt = self.lane_gid(conn.to_link, dst)
                    feeders[tgt].append(self.lane_gid(link.id, src))
        feed_off = np.zeros(NL + 1, np.int32)
        for g in range(NL):
            feed_off[g + 1] = feed_off[g] + len(feeders[g])
        feed_lane = np.array([f for fl in feeders for f in fl] or [0], np.int32)

        # vehicle classes: row HV, row CAV
        fleet = self.cfg.fleet
        self.params = {HV: fleet.hv_params(), CAV: fleet.cav_params()}

        def row(attr):
            return np.array([getattr(self.params[HV], attr),
                             getattr(self.params[CAV], attr)], np.float64)

        cls_a, cls_b = row("a_max"), row("b_comf")
        cls_cool, cls_delta = row("coolness"), row("delta")
        cls_T, cls_s0 = row("time_gap"), row("min_gap")
        cls_ceiling, cls_startup = row("desired_speed"), row("startup_lost_time")
        cls_cah = np.array([1 if self.params[c].uses_cah else 0
                            for c in (HV, CAV)], np.uint8)

        # free-flow travel time per route and class
        self.route_fft = np.zeros((len(routes), 2), np.float64)
        for r, route in enumerate(routes):
            for c in (HV, CAV):
                ceil = self.params[c].desired_speed
                self.route_fft[r, c] = sum(
                    links[link_idx[lid]].length
                    / min(ceil, links[link_idx[lid]].speed_limit)
                    for lid in route.links)

        # origins and their routes
        origins = list(net.origins.values())
        self.origin_ids = [o.id for o in origins]
        self.origin_vph = np.array([o.vph for o in origins], np.float64)
        org_link = np.array([link_idx[o.link] for o in origins], np.int32)
        self.origin_routes = []
        ridx = {rid: i for i, rid in enumerate(self.route_ids)}
        for o in origins:
            rs = net.routes_from(o.id)
            self.origin_routes.append(
                ([ridx[r.id] for r in rs], np.array([r.share for r in rs])))

        self.net = (lane_link, np.array(lane_lo), np.array(lane_hi),
                    lane_stop_pos, lane_stop_grp,
                    link_len, link_cap, link_lane0, link_nlanes, link_full,
                    link_cz_lo, link_cz_hi, link_det0, link_detn, det_pos,
                    feed_off, feed_lane)
        self.rts = (route_off, rs_link, rs_cum, rs_target, rs_last, rs_yield,
                    rs_dpn, rs_dpl)
        self.sig = (np.array(grp_cycle), np.array(grp_off), np.array(grp_g0),
                    np.array(grp_g1), np.array(grp_y1))
        self.cls = (cls_a, cls_b, cls_cool, cls_delta, cls_T, cls_s0,
                    cls_ceiling, cls_startup, cls_cah)
        self.route_dets = [
            sum(1 for dl in self.detector_links if dl in
                {link_idx[lid] for lid in route.links})
            for route in routes]


# --------------------------------------------------------------------------
# Demand tables and world state
# --------------------------------------------------------------------------

@dataclass
class Demand:
    time: np.ndarray        # arrival epoch per vehicle, globally time-sorted
    route: np.ndarray
    vclass: np.ndarray
    confused: np.ndarray
    org_off: np.ndarray     # CSR of vehicle ids per origin
    org_veh: np.ndarray
    org_link: np.ndarray

    @property
    def n(self) -> int:
        return len(self.time)


def build_demand(scn: CompiledScenario, stream: RandomStream,
                 extra_capacity: int = 0) -> Demand:
    """Pregenerate every arrival with its route, class and confusion flag."""
    cfg = scn.cfg
    duration = cfg.run.duration
    times, routes, orgs = [], [], []
    for o, oid in enumerate(scn.origin_ids):
        arr = generate_arrivals(scn.origin_vph[o], duration,
                                stream.substream(f"arrivals:{oid}"))
        ridx, shares = scn.origin_routes[o]
        if len(arr) and not ridx:
            raise ValueError(f"origin {oid} has demand but no routes")
        rng = stream.substream(f"route:{oid}")
        choice = rng.choice(len(ridx), size=len(arr), p=shares / shares.sum())
        times.append(arr)
        routes.append(np.array([ridx[c] for c in choice], np.int32))
        orgs.append(np.full(len(arr), o, np.int32))
    time = np.concatenate(times) if times else np.empty(0)
    route = np.concatenate(routes) if routes else np.empty(0, np.int32)
    org = np.concatenate(orgs) if orgs else np.empty(0, np.int32)
    order = np.lexsort((org, time))
    time, route, org = time[order], route[order], org[order]

    vclass = assign_class(stream.substream("class"), cfg.fleet.mpr, len(time))
    confused = assign_confusion(stream.substream("confusion"),
                                cfg.confusion.share, vclass, len(time))
    if extra_capacity:
        pad = extra_capacity
        time = np.concatenate([time, np.full(pad, np.inf)])
        route = np.concatenate([route, np.zeros(pad, np.int32)])
        org = np.concatenate([org, np.full(pad, -1, np.int32)])
        vclass = np.concatenate([vclass, np.zeros(pad, np.uint8)])
        confused = np.concatenate([confused, np.zeros(pad, np.uint8)])

    n_org = len(scn.origin_ids)
    org_off = np.zeros(n_org + 1, np.int32)
    org_veh = np.zeros(len(time), np.int32)
    pos = 0
    for o in range(n_org):
        ids = np.nonzero(org == o)[0].astype(np.int32)
        org_off[o + 1] = org_off[o] + len(ids)
        org_veh[pos:pos + len(ids)] = ids
        pos += len(ids)
    return Demand(time, route, vclass, confused, org_off, org_veh,
                  _origin_links(scn))


def _origin_links(scn: CompiledScenario) -> np.ndarray:
    link_idx = {lid: i for i, lid in enumerate(scn.link_ids)}
    return np.array([link_idx[scn.network.origins[oid].link]
                     for oid in scn.origin_ids], np.int32)


class World:
    """Mutable simulation state bound to a compiled scenario.

    Owns the state arrays and event buffers; step() advances the kernel.
    Tests may also place vehicles directly via place_vehicle().
    """

    MANUAL_CAPACITY = 256

    def __init__(self, cfg: ScenarioConfig, network: RoadNetwork | None = None,
                 seed: int | None = None, demand: Demand | None = None,
                 trajectories: bool | None = None):
        self.scn = CompiledScenario(cfg, network)
        if demand is None:
            stream = RandomStream(cfg.run.seed if seed is None else seed)
            demand = build_demand(self.scn, stream, self.MANUAL_CAPACITY)
        self.demand = demand
        self.cfg = cfg
        n = demand.n
        self.n_vehicles = n
        self._manual_used = 0

        self.s_phase = np.zeros(n, np.uint8)
        self.s_lane = np.zeros(n, np.int32)
        self.s_pos = np.zeros(n, np.float64)
        self.s_v = np.zeros(n, np.float64)
        self.s_a = np.zeros(n, np.float64)
        self.s_rs = np.zeros(n, np.int32)
        self.s_entry = np.full(n, np.nan)
        self.s_exit = np.full(n, np.nan)
        self.s_startup = np.zeros(n, np.float64)
        self.s_cool = np.zeros(n, np.float64)
        self.s_armed = np.zeros(n, np.uint8)
        self.s_collided = np.zeros(n, np.uint8)
        self.act = np.zeros(max(n, 1), np.int32)
        self.org_head = demand.org_off[:-1].copy()

        de_cap = 1024
        for k in range(n):
            r = demand.route[k]
            if demand.time[k] < np.inf:
                de_cap += self.scn.route_dets[r]
        self.de_det = np.zeros(de_cap, np.int32)
        self.de_t = np.zeros(de_cap, np.float64)
        self.de_v = np.zeros(de_cap, np.float64)
        self.col_t = np.zeros(4096, np.float64)
        self.col_vid = np.zeros(4096, np.int32)
        traj = cfg.measurement.trajectories if trajectories is None else trajectories
        self.traj_on = 1 if traj else 0
        cap = 2_000_000 if traj else 1
        self.tr_vid = np.zeros(cap, np.int32)
        self.tr_t = np.zeros(cap, np.float64)
        self.tr_x = np.zeros(cap, np.float64)
        self.tr_v = np.zeros(cap, np.float64)
        self.tr_conf = np.zeros(cap, np.uint8)

        self.cur = np.zeros(kernel.N_CUR, np.int64)
        nl = self.scn.n_lanes
        cap_n = max(n, 1)
        self.scratch = (np.zeros(cap_n, np.float64), np.zeros(cap_n, np.int32),
                        np.zeros(cap_n, np.int32), np.zeros(nl, np.int32),
                        np.zeros(nl, np.int32), np.zeros(cap_n, np.float64),
                        np.full(cap_n, -1, np.int32), np.zeros(cap_n, np.uint8),
                        np.zeros(cap_n, np.int32), np.zeros(cap_n, np.float64),
                        np.zeros(nl, np.float64), np.zeros(nl, np.float64))

    # -- state access -------------------------------------------------------

    @property
    def time(self) -> float:
        return float(self.cur[kernel.CUR_STEP]) * self.cfg.run.step

    @property
    def n_active(self) -> int:
        return int(self.cur[kernel.CUR_NACT])

    def active_ids(self) -> np.ndarray:
        return self.act[:self.n_active].copy()

    def place_vehicle(self, link: str, lane: int, pos: float, speed: float,
                      route: str, vclass: int = HV, confused: bool = False) -> int:
        """Insert a vehicle directly (testing hook; bypasses the spawner)."""
        slot = self.demand.n - self.MANUAL_CAPACITY + self._manual_used
        if self._manual_used >= self.MANUAL_CAPACITY:
            raise RuntimeError("manual vehicle capacity exhausted")
        self._manual_used += 1
        r = self.scn.route_ids.index(route)
        self.demand.route[slot] = r
        self.demand.vclass[slot] = vclass
        self.demand.confused[slot] = 1 if confused else 0
        self.demand.time[slot] = -1.0
        self.s_phase[slot] = 1
        self.s_lane[slot] = self.scn.lane_gid(link, lane)
        self.s_pos[slot] = pos
        self.s_v[slot] = speed
        self.s_a[slot] = 0.0
        off = self.scn.rts[0]
        self.s_rs[slot] = off[r]
        for s in range(off[r], off[r + 1]):
            if self.scn.link_ids[self.scn.rts[1][s]] == link:
                self.s_rs[slot] = s
                break
        self.s_entry[slot] = -1.0
        na = self.n_active
        self.act[na] = slot
        self.cur[kernel.CUR_NACT] = na + 1
        return slot

    # -- stepping -----------------------------------------------------------

    def step(self, n_steps: int = 1) -> None:
        cfg = self.cfg
        st = (self.s_phase, self.s_lane, self.s_pos, self.s_v, self.s_a,
              self.s_rs, self.s_entry, self.s_exit, self.s_startup,
              self.s_cool, self.s_armed, self.s_collided, self.act,
              self.org_head)
        buf = (self.de_det, self.de_t, self.de_v, self.col_t, self.col_vid,
               self.tr_vid, self.tr_t, self.tr_x, self.tr_v, self.tr_conf)
        dem = (self.demand.time, self.demand.route, self.demand.vclass,
               self.demand.confused, self.demand.org_off, self.demand.org_veh,
               self.demand.org_link)
        kernel.sim_steps(n_steps, 0.0, cfg.run.step, cfg.fleet.vehicle_length,
                         cfg.confusion.speed_factor, self.traj_on,
                         self.scn.net, self.scn.rts, self.scn.sig,
                         self.scn.cls, dem, st, buf, self.cur, self.scratch)

    def run(self) -> None:
        n_steps = int(round(self.cfg.run.duration / self.cfg.run.step))
        self.step(n_steps)

    def conservation_counts(self) -> dict:
        due = int(np.sum(self.demand.time <= self.time))
        return {
            "due": due,
            "spawned": int(self.cur[kernel.CUR_SPAWNED]),
            "exited": int(self.cur[kernel.CUR_EXITED]),
            "active": self.n_active,
            "deferred": due - int(self.cur[kernel.CUR_SPAWNED]),
        }


def step(world: World, n_steps: int = 1) -> World:
    """Advance the world by n_steps of the configured resolution."""
    world.step(n_steps)
    return world


# --------------------------------------------------------------------------
# Run records and measurements
# --------------------------------------------------------------------------

@dataclass
class RunRecord:
    replication: int
    seed: int
    warmup: float
    duration: float
    window: float
    # per completed trip (exit inside the measurement period)
    vehicle_id: np.ndarray
    route: np.ndarray            # route index
    vclass: np.ndarray
    confused: np.ndarray
    arrival: np.ndarray          # demand epoch
    entry: np.ndarray            # actual network entry (>= arrival if deferred)
    exit: np.ndarray
    freeflow: np.ndarray
    delay: np.ndarray            # max(0, exit - arrival - freeflow)
    throughput_bins: np.ndarray  # completions per measurement window
    detector_names: list
    det_flow: dict               # name -> vph/lane per window
    det_speed: dict              # name -> space-mean (harmonic) m/s per window
    collisions_t: np.ndarray
    collisions_vid: np.ndarray
    counters: dict
    route_ids: list = field(default_factory=list)
    trajectories: tuple | None = None

    @property
    def valid(self) -> bool:
        return len(self.collisions_t) == 0

    @property
    def n_trips(self) -> int:
        return len(self.exit)


def _harvest(world: World, replication: int, seed: int) -> RunRecord:
    cfg, scn, dem = world.cfg, world.scn, world.demand
    warmup, duration = cfg.run.warmup, cfg.run.duration
    window = cfg.measurement.detector_window
    n_bins = int(np.ceil((duration - warmup) / window))

    n = dem.n - World.MANUAL_CAPACITY if dem.n >= World.MANUAL_CAPACITY else dem.n
    done = (world.s_phase[:n] == 2)
    ex = world.s_exit[:n]
    sel = np.nonzero(done & (ex > warmup) & (ex <= duration))[0]
    sel = sel[np.argsort(ex[sel], kind="stable")]
    arrival = dem.time[sel]
    entry = world.s_entry[sel]
    exit_t = ex[sel]
    route = dem.route[sel]
    vclass = dem.vclass[sel]
    fft = scn.route_fft[route, vclass]
    delay = np.maximum(0.0, (exit_t - arrival) - fft)

    tp_bins = np.zeros(n_bins, np.int64)
    if len(exit_t):
        b = np.minimum(((exit_t - warmup) / window).astype(np.int64),
                       n_bins - 1)
        np.add.at(tp_bins, b, 1)

    nde = int(world.cur[kernel.CUR_NDE])
    det_flow, det_speed = {}, {}
    d_id = world.de_det[:nde]
    d_t = world.de_t[:nde]
    d_v = world.de_v[:nde]
    in_window = (d_t > warmup) & (d_t <= duration)
    link_full = scn.net[9]
    for d, name in enumerate(scn.detector_names):
        mask = in_window & (d_id == d)
        tt, vv = d_t[mask], d_v[mask]
        lanes = link_full[scn.detector_links[d]]
        flow = np.zeros(n_bins)
        speed = np.zeros(n_bins)
        if len(tt):
            b = np.minimum(((tt - warmup) / window).astype(np.int64), n_bins - 1)
            np.add.at(flow, b, 1.0)
            inv = np.zeros(n_bins)
            np.add.at(inv, b, 1.0 / np.maximum(vv, 0.01))
            nzero = flow > 0
            speed[nzero] = flow[nzero] / inv[nzero]
        det_flow[name] = flow * (3600.0 / window) / lanes
        det_speed[name] = speed

    ncol = int(world.cur[kernel.CUR_NCOL])
    counters = world.conservation_counts()
    counters["deferral_time_total"] = float(np.sum(entry - arrival))

    traj = None
    if world.traj_on:
        nt = int(world.cur[kernel.CUR_NTR])
        traj = (world.tr_vid[:nt].copy(), world.tr_t[:nt].copy(),
                world.tr_x[:nt].copy(), world.tr_v[:nt].copy(),
                world.tr_conf[:nt].copy())

    return RunRecord(
        replication=replication, seed=seed, warmup=warmup, duration=duration,
        window=window, vehicle_id=sel.astype(np.int64), route=route.copy(),
        vclass=vclass.copy(), confused=dem.confused[sel].copy(),
        arrival=arrival.copy(), entry=entry.copy(), exit=exit_t.copy(),
        freeflow=fft.copy(), delay=delay, throughput_bins=tp_bins,
        detector_names=list(scn.detector_names), det_flow=det_flow,
        det_speed=det_speed,
        collisions_t=world.col_t[:min(ncol, len(world.col_t))].copy(),
        collisions_vid=world.col_vid[:min(ncol, len(world.col_vid))].copy(),
        counters=counters, route_ids=list(scn.route_ids), trajectories=traj)


def run_replication(cfg: ScenarioConfig, seed: int, replication: int = 0,
                    network: RoadNetwork | None = None) -> RunRecord:
    """One warm-up + measurement run; bit-identical for identical (cfg, seed)."""
    cfg.validate()
    world = World(cfg, network=network, seed=seed)
    world.run()
    return _harvest(world, replication, seed)


def _rep_seed(base_seed: int, index: int) -> int:
    return RandomStream(base_seed).replication(index).seed


def _run_one(args):
    cfg, index = args
    seed = _rep_seed(cfg.run.seed, index)
    return run_replication(cfg, seed, replication=index)


def run_experiment(cfg: ScenarioConfig, replications: int | None = None,
                   jobs: int = 1) -> list[RunRecord]:
    """Independent replications with counter-derived seeds.

    Results are a pure function of (cfg, replication index); neither `jobs`
    nor scheduling affects them.
    """
    cfg.validate()
    n = cfg.run.replications if replications is None else int(replications)
    if n < 1:
        raise ValueError("need at least one replication")
    tasks = [(cfg, i) for i in range(n)]
    if jobs <= 1 or n == 1:
        return [_run_one(t) for t in tasks]
    import multiprocessing as mp
    with mp.get_context("fork").Pool(min(jobs, n)) as pool:
        return pool.map(_run_one, tasks)


# -- measurements ------------------------------------------------------------

def measure_delay(record: RunRecord) -> float:
    """Mean delay (s/vehicle) over completed trips, each clamped at zero."""
    if record.n_trips == 0:
        raise ValueError("no completed trips in the measurement period")
    return float(np.mean(record.delay))


def measure_throughput(record: RunRecord) -> float:
    """Completed trips scaled to vehicles/hour over the measurement period."""
    horizon = record.duration - record.warmup
    if horizon <= 0:
        raise ValueError("empty measurement period")
    return record.n_trips * 3600.0 / horizon


def detector_bins(record: RunRecord, detector: str) -> list[tuple[float, float]]:
    """(flow vph/lane, space-mean speed m/s) per measurement window."""
    if detector not in record.det_flow:
        raise KeyError(f"unknown detector {detector!r}")
    return list(zip(record.det_flow[detector].tolist(),
                    record.det_speed[detector].tolist()))


def delay_bin_means(record: RunRecord) -> np.ndarray:
    """Mean delay of trips completing in each measurement window.

    This is the observation unit for the confusion analysis: windows with no
    completions carry the record mean to keep group sizes balanced.
    """
    n_bins = len(record.throughput_bins)
    out = np.zeros(n_bins)
    if record.n_trips == 0:
        return out
    b = np.minimum(((record.exit - record.warmup) / record.window)
                   .astype(np.int64), n_bins - 1)
    overall = float(np.mean(record.delay))
    for k in range(n_bins):
        mask = b == k
        out[k] = float(np.mean(record.delay[mask])) if mask.any() else overall
    return out


def record_digest(record: RunRecord) -> str:
    """SHA-256 over the record's serialized arrays (determinism checks)."""
    h = hashlib.sha256()
    for arr in (record.vehicle_id, record.route, record.vclass,
                record.confused, record.arrival, record.entry, record.exit,
                record.freeflow, record.delay, record.throughput_bins,
                record.collisions_t, record.collisions_vid):
        h.update(np.ascontiguousarray(arr).tobytes())
    for name in record.detector_names:
        h.update(record.det_flow[name].tobytes())
        h.update(record.det_speed[name].tobytes())
    return h.hexdigest()
