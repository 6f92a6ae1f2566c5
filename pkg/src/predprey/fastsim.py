"""Compiled batch simulator.

Runs many episodes in one call with exactly the semantics of
:func:`predprey.world.run_from` driven by :class:`NetworkController`
predators and :class:`PreyPolicy` prey. Results are bit-identical to the
pure-Python path given the same start states and tie-break draws.
"""
from __future__ import annotations

import math
from typing import Sequence

import numba
import numpy as np

from .network import Network
from .world import EpisodeOutcome, WorldConfig, WorldState

_DX = np.array([0, 0, -1, 1, 0], dtype=np.int64)
_DY = np.array([1, -1, 0, 0, 0], dtype=np.int64)


@numba.njit(cache=True)
def _torus(ax, ay, bx, by, width, height):
    dx = abs(ax - bx)
    dy = abs(ay - by)
    return min(dx, width - dx) + min(dy, height - dy)


@numba.njit(cache=True)
def _offset(src, dst, dim):
    d = (dst - src) % dim
    if 2 * d > dim:
        d -= dim
    return d


@numba.njit(cache=True)
def _simulate(
    width, height, time_limit, n_inputs, policy_outputs,
    net_neurons, net_modules, net_order_off, net_order_len, net_ptr_off, net_in_off,
    order, in_ptr, in_src, in_w,
    teams, start_pred, start_prey, draws, dx_tab, dy_tab,
):
    n_eps, n_pred = teams.shape
    n_prey = start_prey.shape[1]
    captures = np.zeros((n_eps, n_pred, n_prey), dtype=np.int64)
    final_dist = np.zeros((n_eps, n_pred, n_prey), dtype=np.int64)
    steps = np.zeros(n_eps, dtype=np.int64)

    max_neurons = 0
    for k in range(net_neurons.shape[0]):
        if net_neurons[k] > max_neurons:
            max_neurons = net_neurons[k]
    act = np.zeros((n_pred, max_neurons))
    sensors = np.zeros(n_inputs)
    px = np.zeros(n_pred, dtype=np.int64)
    py = np.zeros(n_pred, dtype=np.int64)
    qx = np.zeros(n_prey, dtype=np.int64)
    qy = np.zeros(n_prey, dtype=np.int64)
    alive = np.zeros(n_prey, dtype=np.bool_)
    pred_act = np.zeros(n_pred, dtype=np.int64)
    prey_act = np.zeros(n_prey, dtype=np.int64)
    sort_d = np.zeros(max(n_pred, n_prey), dtype=np.int64)
    sort_i = np.zeros(max(n_pred, n_prey), dtype=np.int64)
    cand = np.zeros(max(n_pred, 4), dtype=np.int64)
    hx = width / 2
    hy = height / 2

    for e in range(n_eps):
        act[:, :] = 0.0
        for i in range(n_pred):
            px[i] = start_pred[e, i, 0]
            py[i] = start_pred[e, i, 1]
        for j in range(n_prey):
            qx[j] = start_prey[e, j, 0]
            qy[j] = start_prey[e, j, 1]
            alive[j] = True
        # step-0 co-location
        for j in range(n_prey):
            for i in range(n_pred):
                if px[i] == qx[j] and py[i] == qy[j]:
                    captures[e, i, j] = 1
                    alive[j] = False
        step = 0
        while step < time_limit:
            any_alive = False
            for j in range(n_prey):
                if alive[j]:
                    any_alive = True
            if not any_alive:
                break

            # predators
            for i in range(n_pred):
                # other predators, nearest first, ties by index
                cnt = 0
                for o in range(n_pred):
                    if o == i:
                        continue
                    d = _torus(px[i], py[i], px[o], py[o], width, height)
                    pos = cnt
                    while pos > 0 and sort_d[pos - 1] > d:
                        sort_d[pos] = sort_d[pos - 1]
                        sort_i[pos] = sort_i[pos - 1]
                        pos -= 1
                    sort_d[pos] = d
                    sort_i[pos] = o
                    cnt += 1
                s = 0
                for r in range(cnt):
                    o = sort_i[r]
                    sensors[s] = _offset(px[i], px[o], width) / hx
                    sensors[s + 1] = _offset(py[i], py[o], height) / hy
                    s += 2
                cnt = 0
                for j in range(n_prey):
                    if not alive[j]:
                        continue
                    d = _torus(px[i], py[i], qx[j], qy[j], width, height)
                    pos = cnt
                    while pos > 0 and sort_d[pos - 1] > d:
                        sort_d[pos] = sort_d[pos - 1]
                        sort_i[pos] = sort_i[pos - 1]
                        pos -= 1
                    sort_d[pos] = d
                    sort_i[pos] = j
                    cnt += 1
                for r in range(cnt):
                    j = sort_i[r]
                    sensors[s] = _offset(px[i], qx[j], width) / hx
                    sensors[s + 1] = _offset(py[i], qy[j], height) / hy
                    s += 2
                for r in range(n_prey - cnt):
                    sensors[s] = 1.0
                    sensors[s + 1] = 1.0
                    s += 2
                sensors[s] = 1.0

                net = teams[e, i]
                a = act[i]
                for k in range(n_inputs):
                    a[k] = sensors[k]
                o_off = net_order_off[net]
                p_off = net_ptr_off[net]
                l_off = net_in_off[net]
                for pos in range(net_order_len[net]):
                    n = order[o_off + pos]
                    tot = 0.0
                    for ed in range(in_ptr[p_off + pos], in_ptr[p_off + pos + 1]):
                        tot += in_w[l_off + ed] * a[in_src[l_off + ed]]
                    a[n] = math.tanh(tot)

                base = n_inputs
                if net_modules[net] > 1:
                    width_m = policy_outputs + 1
                    best_m = 0
                    best_pref = a[base + policy_outputs]
                    for m in range(1, net_modules[net]):
                        pref = a[base + m * width_m + policy_outputs]
                        if pref > best_pref:
                            best_m = m
                            best_pref = pref
                    base = base + best_m * width_m
                best = 0
                for k in range(1, policy_outputs):
                    if a[base + k] > a[base + best]:
                        best = k
                pred_act[i] = best

            # prey, against unmoved predators
            for j in range(n_prey):
                if not alive[j]:
                    continue
                best_d = width + height
                for i in range(n_pred):
                    d = _torus(qx[j], qy[j], px[i], py[i], width, height)
                    if d < best_d:
                        best_d = d
                cnt = 0
                for i in range(n_pred):
                    if _torus(qx[j], qy[j], px[i], py[i], width, height) == best_d:
                        cand[cnt] = i
                        cnt += 1
                pick = int(draws[e, step, j, 0] * cnt)
                if pick > cnt - 1:
                    pick = cnt - 1
                t = cand[pick]
                far = -1
                for mv in range(4):
                    d = _torus((qx[j] + dx_tab[mv]) % width, (qy[j] + dy_tab[mv]) % height,
                               px[t], py[t], width, height)
                    if d > far:
                        far = d
                cnt = 0
                for mv in range(4):
                    d = _torus((qx[j] + dx_tab[mv]) % width, (qy[j] + dy_tab[mv]) % height,
                               px[t], py[t], width, height)
                    if d == far:
                        cand[cnt] = mv
                        cnt += 1
                pick = int(draws[e, step, j, 1] * cnt)
                if pick > cnt - 1:
                    pick = cnt - 1
                prey_act[j] = cand[pick]

            for i in range(n_pred):
                px[i] = (px[i] + dx_tab[pred_act[i]]) % width
                py[i] = (py[i] + dy_tab[pred_act[i]]) % height
            for j in range(n_prey):
                if alive[j]:
                    qx[j] = (qx[j] + dx_tab[prey_act[j]]) % width
                    qy[j] = (qy[j] + dy_tab[prey_act[j]]) % height
            step += 1
            for j in range(n_prey):
                if not alive[j]:
                    continue
                for i in range(n_pred):
                    if px[i] == qx[j] and py[i] == qy[j]:
                        captures[e, i, j] = 1
                        alive[j] = False

        steps[e] = step
        for j in range(n_prey):
            if alive[j]:
                for i in range(n_pred):
                    final_dist[e, i, j] = _torus(px[i], py[i], qx[j], qy[j], width, height)
    return captures, final_dist, steps


class PackedNetworks:
    """Concatenated network arrays addressed by network index."""

    def __init__(self, networks: Sequence[Network]):
        if not networks:
            raise ValueError("no networks to pack")
        n_in = {n.num_inputs for n in networks}
        p_out = {n.policy_outputs for n in networks}
        if len(n_in) != 1 or len(p_out) != 1:
            raise ValueError("networks disagree on input or policy-output count")
        self.num_inputs = n_in.pop()
        self.policy_outputs = p_out.pop()
        parts = [n.packed() for n in networks]
        self.neurons = np.array([n.num_neurons for n in networks], dtype=np.int64)
        self.modules = np.array([n.num_modules for n in networks], dtype=np.int64)
        self.order_len = np.array([len(p[0]) for p in parts], dtype=np.int64)
        self.order_off = np.concatenate([[0], np.cumsum(self.order_len)[:-1]]).astype(np.int64)
        ptr_len = np.array([len(p[1]) for p in parts], dtype=np.int64)
        self.ptr_off = np.concatenate([[0], np.cumsum(ptr_len)[:-1]]).astype(np.int64)
        in_len = np.array([len(p[2]) for p in parts], dtype=np.int64)
        self.in_off = np.concatenate([[0], np.cumsum(in_len)[:-1]]).astype(np.int64)
        self.order = np.concatenate([p[0] for p in parts]).astype(np.int64)
        self.in_ptr = np.concatenate([p[1] for p in parts]).astype(np.int64)
        self.in_src = np.concatenate([p[2] for p in parts]).astype(np.int64)
        self.in_w = np.concatenate([p[3] for p in parts]).astype(np.float64)


def simulate_batch(
    packed: PackedNetworks,
    teams: np.ndarray,
    starts: Sequence[WorldState],
    draws: np.ndarray,
    cfg: WorldConfig,
) -> list[EpisodeOutcome]:
    """Run ``len(teams)`` episodes; ``teams[e, i]`` indexes into ``packed``.

    ``draws`` has shape (episodes, time_limit, num_prey, 2).
    """
    teams = np.ascontiguousarray(teams, dtype=np.int64)
    if teams.ndim != 2 or teams.shape[1] != cfg.num_predators:
        raise ValueError("teams must have one column per predator")
    if packed.num_inputs != 2 * (cfg.num_predators - 1) + 2 * cfg.num_prey + 1:
        raise ValueError("network input count does not match the world's sensor count")
    # step-0 captures are re-derived inside the kernel from the start cells
    start_pred = np.array(
        [[[p.x, p.y] for p in s.predator_positions] for s in starts], dtype=np.int64
    ).reshape(len(starts), cfg.num_predators, 2)
    start_prey = np.array(
        [[[p.x, p.y] for p in s.prey_positions] for s in starts], dtype=np.int64
    ).reshape(len(starts), cfg.num_prey, 2)
    caps, dist, steps = _simulate(
        cfg.width, cfg.height, cfg.time_limit, packed.num_inputs, packed.policy_outputs,
        packed.neurons, packed.modules, packed.order_off, packed.order_len, packed.ptr_off,
        packed.in_off, packed.order, packed.in_ptr, packed.in_src, packed.in_w,
        teams, start_pred, start_prey, np.ascontiguousarray(draws, dtype=np.float64), _DX, _DY,
    )
    return [EpisodeOutcome(caps[e], dist[e], int(steps[e])) for e in range(len(starts))]
