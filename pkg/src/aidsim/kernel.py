"""Numba step kernel for the time-stepped simulation.

The engine compiles a scenario into flat arrays (see engine.CompiledScenario)
and this module advances the vehicle state. Each step is a two-phase update:
commanded accelerations and lane-change decisions are computed from a frozen
snapshot of the sorted per-lane state, then lane reassignments, kinematics,
link transitions, spawns, exits and detector crossings are applied in a
deterministic order. Everything here is single-threaded per replication;
parallelism happens across replications.

Array group conventions (positional tuples, unpacked at the top):

net   lane/link/detector/feeder geometry
rts   per-route step tables (links, lane targets, decision points, yields)
sig   signal group windows (green/yellow within the cycle)
cls   per-class driver parameters (row 0 = HV, row 1 = CAV)
dem   pregenerated demand (arrival time, route, class, confusion, per origin)
st    mutable vehicle state
buf   event buffers (detector crossings, collisions, trajectories)
cur   int64 cursor array, see CUR_* indices
"""

import math

import numpy as np
from numba import njit

from .dynamics import (LC_ADVANTAGE, LC_COOLDOWN, LC_SAFE_DECEL,
                       LC_SAFE_DECEL_RELAXED, clamp_accel, eidm_accel_s,
                       idm_accel_s)

NO_STOP = 1.0e18
FAR = 1.0e18
LOOKAHEAD = 300.0          # m, leader search horizon across links
MERGE_ACCEPT_GAP = 0.5     # m, minimum physical gap for yields/lane changes
POCKET_ENTRY_MARGIN = 3.0  # m past a pocket's opening before entering it
LC_PERIOD = 5              # steps between discretionary lane-change checks

# cursor indices
CUR_NACT = 0
CUR_NDE = 1
CUR_NCOL = 2
CUR_NTR = 3
CUR_SPAWNED = 4
CUR_EXITED = 5
CUR_STEP = 6
CUR_TROVF = 7
N_CUR = 8

S_GREEN = 0
S_YELLOW = 1
S_RED = 2


@njit(cache=True)
def group_state(grp_cycle, grp_off, grp_g0, grp_g1, grp_y1, g, t):
    tau = (t - grp_off[g]) % grp_cycle[g]
    if grp_g0[g] <= tau < grp_g1[g]:
        return S_GREEN
    if grp_g1[g] <= tau < grp_y1[g]:
        return S_YELLOW
    return S_RED


@njit(cache=True)
def _cf(uses_cah, pa, pb, pc, pdelta, pT, ps0, vd, v, gap, has_leader, vl, al):
    g = gap if gap > 0.01 else 0.01
    if uses_cah:
        return eidm_accel_s(pa, pb, pc, pdelta, pT, ps0, vd, v, g,
                            has_leader, vl, al)
    return idm_accel_s(pa, pb, pdelta, pT, ps0, vd, v, g, has_leader, vl)


@njit(cache=True)
def _seek(order, seg_lo, seg_hi, s_pos, lane, pos):
    """First index in `order`'s segment of `lane` with position > pos, or -1
    when the lane holds no vehicle."""
    lo = seg_lo[lane]
    hi = seg_hi[lane]
    if lo < 0:
        return -1
    while lo < hi:
        mid = (lo + hi) // 2
        if s_pos[order[mid]] > pos:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def sim_steps(n_steps, t0, dt, veh_len, conf_factor, traj_on,
              net, rts, sig, cls, dem, st, buf, cur, scratch):
    (lane_link, lane_lo, lane_hi, lane_stop_pos, lane_stop_grp,
     link_len, link_cap, link_lane0, link_nlanes, link_full,
     link_cz_lo, link_cz_hi, link_det0, link_detn, det_pos,
     feed_off, feed_lane) = net
    (route_off, rs_link, rs_cum, rs_target, rs_last, rs_yield,
     rs_dpn, rs_dpl) = rts
    (grp_cycle, grp_off, grp_g0, grp_g1, grp_y1) = sig
    (cls_a, cls_b, cls_cool, cls_delta, cls_T, cls_s0, cls_ceiling,
     cls_startup, cls_cah) = cls
    (veh_time, veh_route, veh_cls, veh_conf, org_off, org_veh, org_link) = dem
    (s_phase, s_lane, s_pos, s_v, s_a, s_rs, s_entry, s_exit,
     s_startup, s_cool, s_armed, s_collided, act, org_head) = st
    (de_det, de_t, de_v, col_t, col_vid, tr_vid, tr_t, tr_x, tr_v,
     tr_conf) = buf
    (key, order, rank, seg_lo, seg_hi, new_a, lc_to, wall_on,
     ins_lane, ins_pos, spawn_pos, spawn_v) = scratch

    n_lane = lane_link.shape[0]
    n_org = org_link.shape[0]

    for _ in range(n_steps):
        t = t0 + cur[CUR_STEP] * dt
        n_sorted = int(cur[CUR_NACT])

        # ---- frozen snapshot: sort active vehicles by (lane, position) ---
        for k in range(n_sorted):
            i = act[k]
            key[k] = s_lane[i] * 100000.0 + s_pos[i]
        ord_k = np.argsort(key[:n_sorted])
        for k in range(n_sorted):
            order[k] = act[ord_k[k]]
        for ln in range(n_lane):
            seg_lo[ln] = -1
            seg_hi[ln] = -1
        for k in range(n_sorted):
            ln = s_lane[order[k]]
            if seg_lo[ln] < 0:
                seg_lo[ln] = k
            seg_hi[ln] = k + 1
            rank[order[k]] = k

        # ---- collision scan (overlap => event + emergency stop) ----------
        for k in range(n_sorted - 1):
            i = order[k]
            j = order[k + 1]
            if s_lane[i] != s_lane[j]:
                continue
            gap = s_pos[j] - veh_len - s_pos[i]
            if gap <= 0.0:
                if s_collided[i] == 0:
                    s_collided[i] = 1
                    nc = cur[CUR_NCOL]
                    if nc < col_t.shape[0]:
                        col_t[nc] = t
                        col_vid[nc] = i
                    cur[CUR_NCOL] = nc + 1
                s_v[i] = 0.0
                p = s_pos[j] - veh_len - 0.01
                if p < s_pos[i]:
                    s_pos[i] = max(p, lane_lo[s_lane[i]])
            elif gap > 1.0 and s_collided[i] == 1:
                s_collided[i] = 0

        # ---- spawns (arrivals due at or before t; deferred when blocked) --
        for ln in range(n_lane):
            spawn_pos[ln] = FAR
        n_act = n_sorted
        for o in range(n_org):
            while org_head[o] < org_off[o + 1]:
                vid = org_veh[org_head[o]]
                if veh_time[vid] > t:
                    break
                el = org_link[o]
                c = veh_cls[vid]
                ps0 = cls_s0[c]
                best_lane = -1
                best_clear = -FAR
                best_v = FAR
                for li in range(link_full[el]):
                    ln = link_lane0[el] + li
                    clear = link_len[el]
                    vl = FAR
                    if seg_lo[ln] >= 0:
                        first = order[seg_lo[ln]]
                        clear = s_pos[first] - veh_len
                        vl = s_v[first]
                    if spawn_pos[ln] < FAR:
                        c2 = spawn_pos[ln] - veh_len
                        if c2 < clear:
                            clear = c2
                            vl = spawn_v[ln]
                    if clear > best_clear:
                        best_clear = clear
                        best_lane = ln
                        best_v = vl
                if best_clear < ps0 + 0.5:
                    break  # entry blocked; keep FIFO order, retry next step
                v0 = min(cls_ceiling[c], link_cap[el])
                if best_v < FAR:
                    vsafe2 = best_v * best_v + 2.0 * cls_b[c] * (best_clear - ps0)
                    if vsafe2 < v0 * v0:
                        v0 = math.sqrt(max(vsafe2, 0.0))
                s_phase[vid] = 1
                s_lane[vid] = best_lane
                s_pos[vid] = 0.0
                s_v[vid] = v0
                s_a[vid] = 0.0
                s_rs[vid] = route_off[veh_route[vid]]
                s_entry[vid] = t
                s_startup[vid] = 0.0
                s_cool[vid] = 0.0
                s_armed[vid] = 0
                s_collided[vid] = 0
                act[n_act] = vid
                n_act += 1
                cur[CUR_SPAWNED] += 1
                spawn_pos[best_lane] = 0.0
                spawn_v[best_lane] = v0
                org_head[o] += 1
        cur[CUR_NACT] = n_act

        # ---- phase 1: accelerations and lane-change decisions ------------
        n_ins = 0
        for k in range(n_sorted):
            i = order[k]
            lane = s_lane[i]
            link = lane_link[lane]
            li = lane - link_lane0[link]
            pos = s_pos[i]
            v = s_v[i]
            rs = s_rs[i]
            last = rs_last[rs]
            c = veh_cls[i]
            pa = cls_a[c]
            pb = cls_b[c]
            pc = cls_cool[c]
            pd = cls_delta[c]
            pT = cls_T[c]
            ps0 = cls_s0[c]
            cah = cls_cah[c] == 1

            # desired speed: link cap, confusion slowdown, next-link approach
            vd = min(cls_ceiling[c], link_cap[link])
            if veh_conf[i] == 1 and link_cz_lo[link] <= pos <= link_cz_hi[link]:
                vd *= conf_factor
            d_end = lane_hi[lane] - pos
            tl = -1
            if last == 0:
                tl = rs_target[rs, li]
                nxt_cap = link_cap[rs_link[rs + 1]]
                if nxt_cap < vd:
                    v_allow = math.sqrt(nxt_cap * nxt_cap
                                        + 2.0 * pb * max(d_end, 0.0))
                    if v_allow < vd:
                        vd = v_allow
            if vd < 0.1:
                vd = 0.1

            # leader context (same lane, else across the route's connector)
            has_ldr = False
            gap = FAR
            vl = 0.0
            al = 0.0
            ldr_rear = FAR
            if k + 1 < n_sorted and s_lane[order[k + 1]] == lane:
                j = order[k + 1]
                has_ldr = True
                gap = s_pos[j] - veh_len - pos
                vl = s_v[j]
                al = s_a[j]
                ldr_rear = s_pos[j] - veh_len
            elif tl >= 0 and d_end < LOOKAHEAD:
                if seg_lo[tl] >= 0:
                    j = order[seg_lo[tl]]
                    has_ldr = True
                    gap = d_end + (s_pos[j] - lane_lo[tl]) - veh_len
                    vl = s_v[j]
                    al = s_a[j]
                else:
                    link2 = lane_link[tl]
                    li2 = tl - link_lane0[link2]
                    rs2 = rs + 1
                    if rs_last[rs2] == 0:
                        tl2 = rs_target[rs2, li2]
                        if tl2 >= 0 and seg_lo[tl2] >= 0:
                            j = order[seg_lo[tl2]]
                            g2 = (d_end + (lane_hi[tl] - lane_lo[tl])
                                  + (s_pos[j] - lane_lo[tl2]) - veh_len)
                            if g2 < LOOKAHEAD:
                                has_ldr = True
                                gap = g2
                                vl = s_v[j]
                                al = s_a[j]

            # stop line (applies to the vehicle nearest to it on this lane)
            sp = lane_stop_pos[lane]
            stop_gap = FAR
            if sp < NO_STOP and pos <= sp and ldr_rear > sp:
                g = lane_stop_grp[lane]
                st_state = group_state(grp_cycle, grp_off, grp_g0, grp_g1,
                                       grp_y1, g, t)
                stop_here = st_state == S_RED
                if st_state == S_YELLOW:
                    stop_here = (sp - pos) >= v * v / (2.0 * pb)
                if stop_here:
                    stop_gap = max(sp - pos, 0.01)
                # start-up lost time: arm the stopped queue head on red,
                # hold it for the lost time once its signal turns green
                if cls_startup[c] > 0.0:
                    if st_state != S_GREEN and v < 0.1 and (sp - pos) < 4.0:
                        s_armed[i] = 1
                    elif st_state == S_GREEN and s_armed[i] == 1:
                        s_startup[i] = cls_startup[c]
                        s_armed[i] = 0
                    elif v > 1.0:
                        s_armed[i] = 0

            # route wall: dead-end lane for this route, or an unaccepted yield
            wall_gap = FAR
            wall_on[i] = 0
            if last == 0:
                if tl < 0:
                    wall_gap = max(d_end, 0.01)
                    wall_on[i] = 1
                elif rs_yield[rs] == 1:
                    accepted = True
                    for fidx in range(feed_off[tl], feed_off[tl + 1]):
                        f = feed_lane[fidx]
                        if f == lane or seg_lo[f] < 0:
                            continue
                        j = order[seg_hi[f] - 1]  # closest to the merge point
                        gap_f = (lane_hi[f] - s_pos[j]) - d_end - veh_len
                        if gap_f < MERGE_ACCEPT_GAP:
                            accepted = False
                            break
                        fc = veh_cls[j]
                        fvd = min(cls_ceiling[fc], link_cap[lane_link[f]])
                        a_f = _cf(cls_cah[fc] == 1, cls_a[fc], cls_b[fc],
                                  cls_cool[fc], cls_delta[fc], cls_T[fc],
                                  cls_s0[fc], fvd, s_v[j], gap_f, True, v,
                                  s_a[i])
                        if a_f < LC_SAFE_DECEL:
                            accepted = False
                            break
                    if not accepted:
                        wall_gap = max(d_end, 0.01)
                        wall_on[i] = 1

            # commanded acceleration: most constraining context wins
            a_cf = _cf(cah, pa, pb, pc, pd, pT, ps0, vd, v, gap, has_ldr,
                       vl, al)
            a_cmd = a_cf
            if stop_gap < FAR:
                a_sig = _cf(cah, pa, pb, pc, pd, pT, ps0, vd, v, stop_gap,
                            True, 0.0, 0.0)
                if a_sig < a_cmd:
                    a_cmd = a_sig
            if wall_gap < FAR:
                a_wall = _cf(cah, pa, pb, pc, pd, pT, ps0, vd, v, wall_gap,
                             True, 0.0, 0.0)
                if a_wall < a_cmd:
                    a_cmd = a_wall
            if s_startup[i] > 0.0:
                a_cmd = 0.0
            new_a[i] = clamp_accel(a_cmd, pa)

            # ---- lane-change decision ------------------------------------
            lc_to[i] = -1
            if s_cool[i] > 0.0 or last == 1:
                continue
            mandatory = tl < 0
            relaxed = False
            cand = -1
            if mandatory:
                late = veh_conf[i] == 1 and rs_dpl[rs] > -1.0e17
                act_pos = rs_dpl[rs] if late else rs_dpn[rs]
                if pos < act_pos:
                    continue
                relaxed = late
                best_li = -1
                best_d = 1 << 30
                for lj in range(link_nlanes[link]):
                    if rs_target[rs, lj] >= 0:
                        dist = lj - li if lj > li else li - lj
                        if dist < best_d:
                            best_d = dist
                            best_li = lj
                if best_li < 0:
                    continue
                step_dir = 1 if best_li > li else -1
                cj = li + step_dir
                if 0 <= cj < link_nlanes[link]:
                    cand = link_lane0[link] + cj
            elif (i + cur[CUR_STEP]) % LC_PERIOD == 0:
                # discretionary: probe both sides for an acceleration gain
                best_gain = LC_ADVANTAGE
                for step_dir in (-1, 1):
                    cj = li + step_dir
                    if cj < 0 or cj >= link_nlanes[link]:
                        continue
                    cl = link_lane0[link] + cj
                    if rs_target[rs, cj] < 0:
                        continue
                    if not (lane_lo[cl] + POCKET_ENTRY_MARGIN <= pos
                            <= lane_hi[cl] - 1.0):
                        continue
                    a_new = _cf(cah, pa, pb, pc, pd, pT, ps0, vd, v,
                                FAR, False, 0.0, 0.0)
                    kl = _seek(order, seg_lo, seg_hi, s_pos, cl, pos)
                    if 0 <= kl < seg_hi[cl]:
                        j = order[kl]
                        g_new = s_pos[j] - veh_len - pos
                        if g_new < MERGE_ACCEPT_GAP:
                            continue
                        a_new = _cf(cah, pa, pb, pc, pd, pT, ps0, vd, v,
                                    g_new, True, s_v[j], s_a[j])
                    gain = a_new - a_cf
                    if gain >= best_gain:
                        best_gain = gain
                        cand = cl
            if cand < 0:
                continue
            if not (lane_lo[cand] + POCKET_ENTRY_MARGIN <= pos
                    <= lane_hi[cand] - 1.0):
                continue
            limit = LC_SAFE_DECEL_RELAXED if relaxed else LC_SAFE_DECEL
            ok = True
            for q in range(n_ins):
                if ins_lane[q] == cand and abs(ins_pos[q] - pos) < veh_len + 1.0:
                    ok = False
                    break
            if not ok:
                continue
            kl = _seek(order, seg_lo, seg_hi, s_pos, cand, pos)
            if kl >= 0:
                if kl < seg_hi[cand]:
                    j = order[kl]
                    g_new = s_pos[j] - veh_len - pos
                    if g_new < MERGE_ACCEPT_GAP:
                        continue
                    a_self = _cf(cah, pa, pb, pc, pd, pT, ps0, vd, v, g_new,
                                 True, s_v[j], s_a[j])
                    if a_self < limit:
                        continue
                if kl - 1 >= seg_lo[cand]:
                    j = order[kl - 1]
                    g_f = pos - veh_len - s_pos[j]
                    if g_f < MERGE_ACCEPT_GAP:
                        continue
                    fc = veh_cls[j]
                    fvd = min(cls_ceiling[fc], link_cap[link])
                    a_f = _cf(cls_cah[fc] == 1, cls_a[fc], cls_b[fc],
                              cls_cool[fc], cls_delta[fc], cls_T[fc],
                              cls_s0[fc], fvd, s_v[j], g_f, True, v, s_a[i])
                    if a_f < limit:
                        continue
            lc_to[i] = cand
            ins_lane[n_ins] = cand
            ins_pos[n_ins] = pos
            n_ins += 1

        # ---- phase 2: apply lane changes ----------------------------------
        for k in range(n_sorted):
            i = order[k]
            if lc_to[i] >= 0:
                s_lane[i] = lc_to[i]
                s_cool[i] = LC_COOLDOWN

        # ---- phase 2: kinematics, transitions, exits, detectors ----------
        t1 = t0 + (cur[CUR_STEP] + 1) * dt
        n_act_now = int(cur[CUR_NACT])
        for k in range(n_act_now):
            i = act[k]
            if s_phase[i] != 1 or s_entry[i] >= t:
                continue  # exited, or spawned this step (moves next step)
            a = new_a[i]
            v0 = s_v[i]
            v1 = v0 + a * dt
            if v1 < 0.0:
                # vehicle stops inside the step: ballistic distance to rest
                dx = 0.5 * v0 * v0 / (-a) if a < -1e-12 else 0.0
                v1 = 0.0
            else:
                dx = 0.5 * (v0 + v1) * dt
            s_v[i] = v1
            s_a[i] = a
            if s_startup[i] > 0.0:
                s_startup[i] = max(0.0, s_startup[i] - dt)
            if s_cool[i] > 0.0:
                s_cool[i] = max(0.0, s_cool[i] - dt)

            lane = s_lane[i]
            link = lane_link[lane]
            li = lane - link_lane0[link]
            pos = s_pos[i]
            npos = pos + dx
            vmid = max(0.5 * (v0 + v1), 0.01)
            if li < link_full[link]:
                for d in range(link_det0[link], link_detn[link]):
                    if pos < det_pos[d] <= npos:
                        nd = cur[CUR_NDE]
                        if nd < de_det.shape[0]:
                            de_det[nd] = d
                            de_t[nd] = t1
                            de_v[nd] = vmid
                            cur[CUR_NDE] = nd + 1
            while npos >= lane_hi[lane] - 1e-9:
                rs = s_rs[i]
                if rs_last[rs] == 1:
                    s_exit[i] = t1
                    s_phase[i] = 2
                    cur[CUR_EXITED] += 1
                    break
                tl = rs_target[rs, li]
                if tl < 0 or wall_on[i] == 1:
                    npos = lane_hi[lane] - 0.05
                    s_v[i] = 0.0
                    break
                overshoot = npos - lane_hi[lane]
                npos = lane_lo[tl] + overshoot
                s_rs[i] = rs + 1
                s_lane[i] = tl
                s_armed[i] = 0
                lane = tl
                link = lane_link[lane]
                li = lane - link_lane0[link]
                if li < link_full[link]:
                    for d in range(link_det0[link], link_detn[link]):
                        if lane_lo[lane] < det_pos[d] <= npos:
                            nd = cur[CUR_NDE]
                            if nd < de_det.shape[0]:
                                de_det[nd] = d
                                de_t[nd] = t1
                                de_v[nd] = vmid
                                cur[CUR_NDE] = nd + 1
            s_pos[i] = npos

        # compact the active list
        n_keep = 0
        for k in range(n_act_now):
            i = act[k]
            if s_phase[i] == 1:
                act[n_keep] = i
                n_keep += 1
        cur[CUR_NACT] = n_keep

        # ---- trajectory sampling at 1 Hz ----------------------------------
        if traj_on == 1 and cur[CUR_STEP] % 10 == 0:
            cap = tr_vid.shape[0]
            for k in range(n_keep):
                i = act[k]
                nt = cur[CUR_NTR]
                if nt >= cap:
                    cur[CUR_TROVF] += 1
                    break
                tr_vid[nt] = i
                tr_t[nt] = t
                tr_x[nt] = rs_cum[s_rs[i]] + s_pos[i]
                tr_v[nt] = s_v[i]
                tr_conf[nt] = veh_conf[i]
                cur[CUR_NTR] = nt + 1

        cur[CUR_STEP] += 1
