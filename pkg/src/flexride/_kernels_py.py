"""Pure-Python scheduling kernels.

These are the reference implementations of the two hot inner loops: the
insertion-candidate scan over one vehicle schedule and the exact search for
the cheapest intra-cluster route. `flexride._speedups` contains a compiled
twin with identical semantics; `flexride.kernels` picks one at import time.

All arithmetic is integer seconds, so both backends produce bit-identical
results.
"""

from __future__ import annotations

INF = 2**60


def _snap(t: int, sess_open, sess_close) -> int:
    """Earliest time >= t that lies inside a session, INF if none is left."""
    for i in range(len(sess_open)):
        if t <= sess_close[i]:
            return t if t >= sess_open[i] else sess_open[i]
    return INF


def scan_ride_insertions(
    nodes, e, l, B, load_after, snap, partner, limit,
    matrix, sess_open, sess_close,
    pn, dn, pe, pl, de, dl, rlimit, psnap, dsnap,
    qcap, old_drive, drive_limit, p_lo,
):
    """Enumerate feasible (pickup, delivery) insertion positions for one ride.

    Stop arrays describe the current schedule including depot sentinels.
    `partner[j]` is the in-schedule pickup index for delivery stops (-1
    otherwise) and `limit[j]` the corresponding ride limit. Position `p` means
    the pickup is inserted before the current stop `p`; `q >= p` means the
    delivery is inserted before the current stop `q` (with `q == p` the
    delivery directly follows the pickup). Existing stops are only ever pushed
    later (new_time = max(old_time, arrival)), so frozen prefixes stay intact.

    Returns a list of (p, q, drive_delta, pickup_time, delivery_time).
    """
    K = len(nodes)
    nodes = list(nodes)
    e = list(e)
    l = list(l)
    B = list(B)
    load_after = list(load_after)
    snap = list(snap)
    partner = list(partner)
    limit = list(limit)
    sess_open = list(sess_open)
    sess_close = list(sess_close)

    results = []
    scratch = [0] * K  # shifted times for stops >= p, valid per the scan order

    for p in range(p_lo, K):
        if B[p - 1] > pl:
            break  # even zero travel cannot reach the pickup window anymore
        arr_p = B[p - 1] + int(matrix[nodes[p - 1], pn])
        bp = arr_p if arr_p > pe else pe
        if psnap:
            bp = _snap(bp, sess_open, sess_close)
        if bp > pl:
            continue
        if load_after[p - 1] + 1 > qcap:
            continue

        pick_in = int(matrix[nodes[p - 1], pn])
        carry_node = pn
        carry_time = bp
        for q in range(p, K):
            # Try the delivery right before original stop q.
            arr_d = carry_time + int(matrix[carry_node, dn])
            bd = arr_d if arr_d > de else de
            if dsnap:
                bd = _snap(bd, sess_open, sess_close)
            if bd <= dl and bd - bp <= rlimit:
                if q == p:
                    delta = (pick_in + int(matrix[pn, dn]) + int(matrix[dn, nodes[q]])
                             - int(matrix[nodes[p - 1], nodes[q]]))
                else:
                    delta = (pick_in + int(matrix[pn, nodes[p]])
                             - int(matrix[nodes[p - 1], nodes[p]])
                             + int(matrix[nodes[q - 1], dn]) + int(matrix[dn, nodes[q]])
                             - int(matrix[nodes[q - 1], nodes[q]]))
                if old_drive + delta <= drive_limit:
                    ok = True
                    prev_node = dn
                    prev_time = bd
                    j = q
                    while j < K:
                        x = prev_time + int(matrix[prev_node, nodes[j]])
                        nb = B[j] if B[j] >= x else x
                        if snap[j] and nb > B[j]:
                            nb = _snap(nb, sess_open, sess_close)
                        if nb > l[j] or nb >= INF:
                            ok = False
                            break
                        if partner[j] >= 0:
                            pidx = partner[j]
                            pt = B[pidx] if pidx < p else scratch[pidx]
                            if nb - pt > limit[j]:
                                ok = False
                                break
                        scratch[j] = nb
                        if nb == B[j]:
                            break  # shift absorbed; the rest is unchanged
                        prev_node = nodes[j]
                        prev_time = nb
                        j += 1
                    if ok:
                        results.append((p, q, delta, bp, bd))

            # Carry the picked-up passenger past original stop q.
            if q == K - 1:
                break
            x = carry_time + int(matrix[carry_node, nodes[q]])
            nb = B[q] if B[q] >= x else x
            if snap[q] and nb > B[q]:
                nb = _snap(nb, sess_open, sess_close)
            if nb > l[q] or nb >= INF:
                break
            if load_after[q] + 1 > qcap:
                break
            if partner[q] >= 0:
                pidx = partner[q]
                pt = B[pidx] if pidx < p else scratch[pidx]
                if nb - pt > limit[q]:
                    break
            scratch[q] = nb
            carry_node = nodes[q]
            carry_time = nb
            if carry_time > dl:
                break  # the delivery window is out of reach from here on
    return results


def search_cluster_route(pick_nodes, drop_nodes, limits, matrix):
    """Exact minimum-duration route over a cluster's pickup/delivery nodes.

    Depth-first search over all precedence-feasible visit orders with cost and
    ride-time pruning. Slots 0..k-1 are pickups, k..2k-1 the matching drops.
    The route may start at any pickup (the leading arc is free) and service
    starts at time 0. Among equal-cost optima the lexicographically smallest
    node sequence wins because candidates are tried in ascending node order.

    Returns (slots, times, cost) or None when no order satisfies the ride
    limits.
    """
    k = len(pick_nodes)
    pick_nodes = [int(x) for x in pick_nodes]
    drop_nodes = [int(x) for x in drop_nodes]
    limits = [int(x) for x in limits]
    if k == 0:
        return [], [], 0

    slot_nodes = pick_nodes + drop_nodes
    best = [INF, None, None]
    seq = [0] * (2 * k)
    times = [0] * (2 * k)
    pick_time = [0] * k
    picked = [False] * k
    dropped = [False] * k

    order = sorted(range(2 * k), key=lambda s: (slot_nodes[s], s))

    def extend(cur_node: int, cost: int, depth: int) -> None:
        if cost >= best[0]:
            return
        for r in range(k):
            if picked[r] and not dropped[r]:
                if cost + int(matrix[cur_node, drop_nodes[r]]) - pick_time[r] > limits[r]:
                    return  # this passenger can no longer make it home in time
        if depth == 2 * k:
            best[0] = cost
            best[1] = seq[:]
            best[2] = times[:]
            return
        for s in order:
            r = s % k
            if s < k:
                if picked[r]:
                    continue
                step = 0 if depth == 0 else int(matrix[cur_node, slot_nodes[s]])
                t = cost + step
                picked[r] = True
                pick_time[r] = t
                seq[depth] = s
                times[depth] = t
                extend(slot_nodes[s], t, depth + 1)
                picked[r] = False
            else:
                if not picked[r] or dropped[r]:
                    continue
                t = cost + int(matrix[cur_node, slot_nodes[s]])
                if t - pick_time[r] > limits[r]:
                    continue
                dropped[r] = True
                seq[depth] = s
                times[depth] = t
                extend(slot_nodes[s], t, depth + 1)
                dropped[r] = False

    extend(0, 0, 0)
    if best[1] is None:
        return None
    return best[1], best[2], best[0]
