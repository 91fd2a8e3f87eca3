"""Independent brute-force oracles used only by the tests.

These share no code with the library's solvers: the transportation optimum is
found by enumerating basic feasible solutions (spanning trees of the bipartite
supply/demand graph), and 1-d / permutation cases have closed forms.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def _tree_flows(n: int, m: int, edges: list[tuple[int, int]], a, b):
    """Solve the flows on a spanning tree by peeling leaves; None if not a tree."""
    total = n + m
    adjacency = {node: [] for node in range(total)}
    for k, (i, j) in enumerate(edges):
        adjacency[i].append((n + j, k))
        adjacency[n + j].append((i, k))
    demand = np.concatenate([np.asarray(a, dtype=float), np.asarray(b, dtype=float)])
    degree = {node: len(neighbors) for node, neighbors in adjacency.items()}
    if any(d == 0 for d in degree.values()):
        return None
    flows = np.zeros(len(edges))
    used = [False] * len(edges)
    leaves = [node for node, d in degree.items() if d == 1]
    remaining = total
    while leaves:
        node = leaves.pop()
        if degree[node] != 1:
            continue
        edge = next((k for other, k in adjacency[node] if not used[k]), None)
        if edge is None:
            break
        other = edges[edge][1] + n if node < n else edges[edge][0]
        flows[edge] = demand[node]
        demand[other] -= demand[node]
        demand[node] = 0.0
        used[edge] = True
        degree[node] -= 1
        degree[other] -= 1
        remaining -= 1
        if degree[other] == 1:
            leaves.append(other)
    if remaining != 1 or abs(demand.sum()) > 1e-9:
        return None
    return flows


def brute_force_ot_cost(costs, a, b) -> float:
    """Minimum transportation cost by enumerating spanning-tree vertices."""
    costs = np.asarray(costs, dtype=float)
    n, m = costs.shape
    all_edges = [(i, j) for i in range(n) for j in range(m)]
    best = math.inf
    for edges in itertools.combinations(all_edges, n + m - 1):
        flows = _tree_flows(n, m, list(edges), a, b)
        if flows is None or flows.min() < -1e-12:
            continue
        cost = sum(f * costs[i, j] for f, (i, j) in zip(flows, edges))
        best = min(best, cost)
    return best


def best_permutation_cost(costs) -> float:
    """Optimal assignment cost over all permutations (n <= 8), mass 1/n each."""
    costs = np.asarray(costs, dtype=float)
    n = costs.shape[0]
    best = math.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, sum(costs[i, perm[i]] for i in range(n)) / n)
    return best


def sorted_matching_w1(x, y, exponent: int = 1) -> float:
    """1-d W_p^p for equal-size uniform samples: match in sorted order."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    return float(np.mean(np.abs(x - y) ** exponent))
