"""Compiled inner loops.

Every function here mirrors a pure-Python counterpart (``schedule.evaluate``,
the tabu neighborhood) and performs floating point operations in the same
order, so results agree bit for bit. No fastmath: feasibility decisions hinge
on exact comparisons against due times.
"""

import numpy as np
from numba import njit

# Insertion checks against latest-arrival profiles keep this margin so that a
# move accepted here is also feasible under forward simulation.
FEAS_EPS = 1e-7


@njit(cache=True)
def route_eval(route, m, dist, ready, due, service):
    t = 0.0
    prev = 0
    total = 0.0
    viol = 0
    for k in range(m):
        v = route[k]
        leg = dist[prev, v]
        total += leg
        t += leg
        if t > due[v]:
            viol += 1
        if t < ready[v]:
            t = ready[v]
        t += service[v]
        prev = v
    leg = dist[prev, 0]
    if t + leg > due[0]:
        viol += 1
    if m == 0:
        return viol, 0.0
    return viol, total + leg


@njit(cache=True)
def anneal(route, dist, ready, due, service, t0, cooling, sweeps, moves, lam, seed):
    """Simulated annealing over permutations with swap and 2-opt moves.

    Minimises cost + lam * violations. Returns the best permutation seen.
    """
    np.random.seed(seed)
    m = route.shape[0]
    cur = route.copy()
    best = route.copy()
    if m < 2:
        return best
    viol, cost = route_eval(cur, m, dist, ready, due, service)
    f = cost + lam * viol
    fbest = f
    temp = t0
    for _ in range(sweeps):
        for _ in range(moves):
            i = np.random.randint(0, m)
            j = np.random.randint(0, m - 1)
            if j >= i:
                j += 1
            else:
                i, j = j, i
            swap = np.random.random() < 0.5
            if swap:
                cur[i], cur[j] = cur[j], cur[i]
            else:
                a, b = i, j
                while a < b:
                    cur[a], cur[b] = cur[b], cur[a]
                    a += 1
                    b -= 1
            viol, cost = route_eval(cur, m, dist, ready, due, service)
            fn = cost + lam * viol
            delta = fn - f
            if delta <= 0.0 or (temp > 0.0 and np.random.random() < np.exp(-delta / temp)):
                f = fn
                if f < fbest:
                    fbest = f
                    best[:] = cur
            else:
                if swap:
                    cur[i], cur[j] = cur[j], cur[i]
                else:
                    a, b = i, j
                    while a < b:
                        cur[a], cur[b] = cur[b], cur[a]
                        a += 1
                        b -= 1
        temp *= cooling
    return best


@njit(cache=True)
def profile(route, m, dist, ready, due, service, dep, lat):
    """Departure times and latest feasible arrivals along 0, route..., 0.

    ``dep[k]`` is the departure time from path position k; ``lat[k]`` the
    latest arrival at k that keeps the rest of the path on time (-inf when
    nothing does). Returns True when every prefix stop is on time.
    """
    t = 0.0
    prev = 0
    ok = True
    dep[0] = 0.0
    for k in range(m):
        v = route[k]
        t += dist[prev, v]
        if t > due[v]:
            ok = False
        if t < ready[v]:
            t = ready[v]
        t += service[v]
        dep[k + 1] = t
        prev = v
    lat[m + 1] = due[0]
    nxt = 0
    for k in range(m, 0, -1):
        v = route[k - 1]
        bound = lat[k + 1] - dist[v, nxt] - service[v]
        if ready[v] > bound:
            lat[k] = -np.inf
        else:
            lat[k] = min(due[v], bound)
        nxt = v
    return ok


@njit(cache=True)
def _best_insert(u, path, pdep, plat, pok, plen, dist, ready, due, service):
    """Cheapest feasible slot for u in a path of ``plen`` nodes (depot at both ends)."""
    best = np.inf
    best_q = -1
    for q in range(plen - 1):
        if not pok[q]:
            break
        x = path[q]
        y = path[q + 1]
        arr = pdep[q] + dist[x, u]
        if arr > due[u]:
            continue
        d = arr if arr > ready[u] else ready[u]
        d += service[u]
        if d + dist[u, y] > plat[q + 1] - FEAS_EPS:
            continue
        ins = dist[x, u] + dist[u, y] - dist[x, y]
        if ins < best:
            best = ins
            best_q = q
    return best, best_q


@njit(cache=True)
def neighborhood(routes, lens, dep, lat, load, dist, ready, due, service, demand,
                 capacity, route_of, pos_of, tabu_reloc, tabu_pair, it, cur_total,
                 best_total):
    """Best admissible relocate/exchange move for the current solution.

    Returns (kind, u, b, qa, v, qb, delta). kind 0: no admissible move.
    kind 1: relocate u into route b at index qa. kind 2: exchange u and v,
    v entering route(u) minus u at index qa and u entering route(v) minus v
    at index qb. Ties keep the first move in enumeration order.
    """
    n = dist.shape[0]
    R = routes.shape[0]
    cap = routes.shape[1]
    path = np.empty(cap + 2, np.int64)
    pdep = np.empty(cap + 2)
    plat = np.empty(cap + 2)
    pok = np.empty(cap + 2, np.bool_)

    rem = np.zeros(n)
    for u in range(1, n):
        a = route_of[u]
        if a < 0:
            continue
        p = pos_of[u]
        prev = routes[a, p - 1] if p > 0 else 0
        nxt = routes[a, p + 1] if p + 1 < lens[a] else 0
        rem[u] = dist[prev, nxt] - dist[prev, u] - dist[u, nxt]

    # relocate: u into route b at its cheapest slot
    k_best = 0
    best_delta = np.inf
    r_u = -1
    r_b = -1
    r_q = -1
    x_v = -1
    x_qa = -1
    x_qb = -1
    for u in range(1, n):
        a = route_of[u]
        if a < 0:
            continue
        for b in range(R):
            if b == a or lens[b] == 0:
                continue
            if load[b] + demand[u] > capacity:
                continue
            m = lens[b]
            path[0] = 0
            for k in range(m):
                path[k + 1] = routes[b, k]
                pok[k] = True
            path[m + 1] = 0
            pok[m] = True
            ins, q = _best_insert(u, path, dep[b], lat[b], pok, m + 2, dist, ready, due, service)
            if q < 0:
                continue
            delta = rem[u] + ins
            if tabu_reloc[u, b] > it and not (cur_total + delta < best_total - 1e-9):
                continue
            if delta < best_delta:
                best_delta = delta
                k_best = 1
                r_u = u
                r_b = b
                r_q = q

    # exchange: ins_x[u, v] = cheapest slot for v in route(u) with u removed
    ins_x = np.full((n, n), np.inf)
    pos_x = np.full((n, n), -1, np.int64)
    for a in range(R):
        m = lens[a]
        if m == 0:
            continue
        for p in range(m):
            u = routes[a, p]
            # path of A without u
            path[0] = 0
            w = 1
            for k in range(m):
                if k != p:
                    path[w] = routes[a, k]
                    w += 1
            path[w] = 0
            plen = w + 1
            t = 0.0
            ok = True
            pdep[0] = 0.0
            pok[0] = True
            for k in range(1, plen - 1):
                v = path[k]
                t += dist[path[k - 1], v]
                if t > due[v]:
                    ok = False
                if t < ready[v]:
                    t = ready[v]
                t += service[v]
                pdep[k] = t
                pok[k] = ok
            plat[plen - 1] = due[0]
            for k in range(plen - 2, 0, -1):
                v = path[k]
                bound = plat[k + 1] - dist[v, path[k + 1]] - service[v]
                if ready[v] > bound:
                    plat[k] = -np.inf
                else:
                    plat[k] = min(due[v], bound)
            for v in range(1, n):
                b = route_of[v]
                if b < 0 or b == a:
                    continue
                if load[a] - demand[u] + demand[v] > capacity:
                    continue
                ins, q = _best_insert(v, path, pdep, plat, pok, plen, dist, ready, due, service)
                if q >= 0:
                    ins_x[u, v] = ins
                    pos_x[u, v] = q

    for u in range(1, n):
        a = route_of[u]
        if a < 0:
            continue
        for v in range(u + 1, n):
            b = route_of[v]
            if b < 0 or b == a:
                continue
            if pos_x[u, v] < 0 or pos_x[v, u] < 0:
                continue
            delta = rem[u] + ins_x[u, v] + rem[v] + ins_x[v, u]
            tabu = tabu_pair[u, v] > it or tabu_reloc[u, b] > it or tabu_reloc[v, a] > it
            if tabu and not (cur_total + delta < best_total - 1e-9):
                continue
            if delta < best_delta:
                best_delta = delta
                k_best = 2
                r_u = u
                x_v = v
                x_qa = pos_x[u, v]
                x_qb = pos_x[v, u]

    if k_best == 1:
        return 1, r_u, r_b, r_q, -1, -1, best_delta
    if k_best == 2:
        return 2, r_u, -1, x_qa, x_v, x_qb, best_delta
    return 0, -1, -1, -1, -1, -1, 0.0
