"""Exhaustive liveness-window measurement for the move-atomic protocols.

Starts from every clock/LC combination once the size variables are correct
(a superset of what is reachable after two pulses), skips one clock wrap and
reports the smallest window that always holds a LOOK and a MOVE for every
robot.  Global pulses are covered for k <= 5, local pulses for k <= 3; with
local pulses the update order is the offset order, and enumerating labelled
graphs with the identity order covers every order.

    python scripts/liveness_window_oracle.py
"""

import itertools
import math
import sys
from pathlib import Path

import networkx as nx

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

import oracles  # noqa: E402


def _max_n(k, edges):
    nb = oracles.closed(k, edges)
    return [max(len(nb[j]) for j in nb[i]) for i in range(k)]


def global_window(k: int, edges) -> tuple[int, int]:
    mx = _max_n(k, edges)
    m = max(mx)
    skip = m + 1
    horizon = skip + 2 * math.lcm(*[x + 1 for x in mx]) + 4 * (m + 1)
    worst = 0
    for clocks in itertools.product(*(range(x + 1) for x in mx)):
        for lcs in itertools.product((False, True), repeat=k):
            looks, moves = oracles.alg2_events(k, edges, clocks, lcs, horizon)
            for hits in looks + moves:
                worst = max(worst, oracles.covering_window(hits, skip, horizon))
    return m, worst


def local_window(k: int, edges) -> tuple[int, int]:
    mx = _max_n(k, edges)
    m = max(mx)
    skip = 3 * m + 3
    horizon = skip + 2 * math.lcm(*[3 * x + 3 for x in mx]) + 4 * (3 * m + 3)
    worst = 0
    for clocks in itertools.product(*(range(3 * x + 3) for x in mx)):
        for lcs in itertools.product((False, True), repeat=k):
            looks, moves = oracles.alg3_events(k, edges, range(k), clocks, lcs, horizon)
            for hits in looks + moves:
                worst = max(worst, oracles.covering_window(hits, skip, horizon))
    return m, worst


def graphs(k_max: int):
    for g in nx.graph_atlas_g()[1:]:
        if g.number_of_nodes() > k_max:
            break
        yield g.number_of_nodes(), list(g.edges())


def main() -> None:
    rows = {}
    for k, edges in graphs(5):
        m, w = global_window(k, edges)
        key = ("global", k, m)
        rows[key] = max(rows.get(key, 0), w)
    for k in (1, 2, 3):
        for edges in oracles.all_labelled_graphs(k):
            m, w = local_window(k, edges)
            key = ("local", k, m)
            rows[key] = max(rows.get(key, 0), w)
    for (mode, k, m), w in sorted(rows.items()):
        wrap = m + 1 if mode == "global" else 3 * m + 3
        print(f"{mode:6} k={k} max|N[i]|={m}  window={w:3d}  one wrap={wrap:3d}  two wraps={2 * wrap:3d}")


if __name__ == "__main__":
    main()
