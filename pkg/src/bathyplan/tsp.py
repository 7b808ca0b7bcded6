"""Set-TSP routing over cluster representative nodes.

The tour is open (an AUV dive need not return to its start) and must
visit exactly one node from every group. Optimization is simulated
annealing over two moves: 2-opt segment reversal of the group order, and
swapping a group's chosen node for another member. A final hill-climb
pass makes the incumbent a local optimum, so the result is never worse
than the greedy construction.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .paths import Path


@dataclass
class SetTspInstance:
    """Nodes tagged by cluster id; groups partition node indices by id."""

    nodes: np.ndarray  # (n, 2) easting, northing
    cluster_ids: np.ndarray  # (n,)
    start: tuple[float, float] | None = None

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.cluster_ids = np.asarray(self.cluster_ids, dtype=int)
        if len(self.nodes) != len(self.cluster_ids):
            raise ValueError("nodes and cluster_ids length mismatch")
        if len(self.nodes) == 0:
            raise ValueError("empty instance")
        if not np.all(np.isfinite(self.nodes)):
            raise ValueError("node coordinates must be finite")
        self.groups = {}
        for i, cid in enumerate(self.cluster_ids):
            self.groups.setdefault(int(cid), []).append(i)

    @property
    def group_ids(self) -> list[int]:
        return sorted(self.groups)


def _tour_length(coords: np.ndarray, start) -> float:
    if start is not None:
        coords = np.vstack([np.asarray(start, dtype=float), coords])
    if len(coords) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(coords, axis=0), axis=1)))


def _length_of(instance: SetTspInstance, order: list[int], choice: dict[int, int]) -> float:
    coords = instance.nodes[[choice[g] for g in order]]
    return _tour_length(coords, instance.start)


def _greedy_tour(instance: SetTspInstance) -> tuple[list[int], dict[int, int]]:
    """Nearest-neighbor construction; with no fixed start, try every node
    as the opening choice and keep the shortest result."""
    gids = instance.group_ids

    def build(first_group, first_node):
        order = [first_group]
        choice = {first_group: first_node}
        cur = instance.nodes[first_node]
        remaining = [g for g in gids if g != first_group]
        while remaining:
            best = None
            for g in remaining:
                for i in instance.groups[g]:
                    dist = float(np.linalg.norm(instance.nodes[i] - cur))
                    if best is None or dist < best[0]:
                        best = (dist, g, i)
            _, g, i = best
            order.append(g)
            choice[g] = i
            cur = instance.nodes[i]
            remaining.remove(g)
        return order, choice

    candidates = []
    if instance.start is not None:
        start = np.asarray(instance.start, dtype=float)
        best = None
        for g in gids:
            for i in instance.groups[g]:
                dist = float(np.linalg.norm(instance.nodes[i] - start))
                if best is None or dist < best[0]:
                    best = (dist, g, i)
        candidates.append(build(best[1], best[2]))
    else:
        for g in gids:
            for i in instance.groups[g]:
                candidates.append(build(g, i))
    return min(candidates, key=lambda oc: _length_of(instance, *oc))


def _hill_climb(instance: SetTspInstance, order, choice, length):
    """Repeated first-improvement 2-opt + node swaps until a local optimum."""
    improved = True
    while improved:
        improved = False
        for i in range(len(order) - 1):
            for j in range(i + 1, len(order)):
                cand = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
                cl = _length_of(instance, cand, choice)
                if cl < length - 1e-12:
                    order, length = cand, cl
                    improved = True
        for g in instance.group_ids:
            for i in instance.groups[g]:
                if i == choice[g]:
                    continue
                cand = dict(choice)
                cand[g] = i
                cl = _length_of(instance, order, cand)
                if cl < length - 1e-12:
                    choice, length = cand, cl
                    improved = True
    return order, choice, length


def solve_set_tsp(instance: SetTspInstance, seed: int = 0, sweeps: int = 600,
                  time_budget: float | None = None) -> Path:
    """Anneal an open tour visiting one node per group.

    Runs a fixed number of sweeps for determinism; passing time_budget
    (seconds) switches to a wall-clock cap instead. The initial
    temperature is the mean pairwise node distance, cooled by 0.995 per
    sweep.
    """
    rng = np.random.default_rng(seed)
    order, choice = _greedy_tour(instance)
    length = _length_of(instance, order, choice)
    best = (length, list(order), dict(choice))

    n_groups = len(order)
    if n_groups > 1:
        diffs = instance.nodes[:, None, :] - instance.nodes[None, :, :]
        pair = np.linalg.norm(diffs, axis=-1)
        temp = float(pair.sum() / max(1, len(instance.nodes) * (len(instance.nodes) - 1)))
        temp = max(temp, 1e-9)
        moves_per_sweep = max(20, 4 * n_groups)
        deadline = None if time_budget is None else time.monotonic() + time_budget
        sweep = 0
        while (sweep < sweeps) if deadline is None else (time.monotonic() < deadline):
            for _ in range(moves_per_sweep):
                if rng.random() < 0.5 and n_groups >= 2:
                    i, j = sorted(rng.choice(n_groups, size=2, replace=False))
                    cand_order = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
                    cand_choice = choice
                else:
                    g = order[rng.integers(n_groups)]
                    members = instance.groups[g]
                    if len(members) < 2:
                        continue
                    cand_choice = dict(choice)
                    cand_choice[g] = members[rng.integers(len(members))]
                    cand_order = order
                cl = _length_of(instance, cand_order, cand_choice)
                delta = cl - length
                if delta <= 0 or rng.random() < np.exp(-delta / temp):
                    order, choice, length = list(cand_order), dict(cand_choice), cl
                    if length < best[0]:
                        best = (length, list(order), dict(choice))
            temp *= 0.995
            sweep += 1

        order, choice, length = _hill_climb(instance, best[1], best[2], best[0])
    coords = instance.nodes[[choice[g] for g in order]]
    if instance.start is not None:
        coords = np.vstack([np.asarray(instance.start, dtype=float), coords])
    return Path(coords)


def enforce_budget(path: Path, cluster_order: list[int], budget: float
                   ) -> tuple[Path, list[int]]:
    """Greedily drop visits until the tour fits the distance budget.

    Each round removes the waypoint whose removal saves the most length.
    Returns the trimmed path and the cluster ids that were dropped.
    cluster_order[i] labels waypoint i (use -1 for a fixed start that must
    survive trimming).
    """
    wps = [np.asarray(w, dtype=float) for w in path.waypoints]
    labels = list(cluster_order)
    if len(wps) != len(labels):
        raise ValueError("cluster_order must label every waypoint")
    dropped: list[int] = []

    def total(points):
        if len(points) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(np.asarray(points), axis=0), axis=1)))

    while total(wps) > budget and any(c != -1 for c in labels):
        savings = []
        for i, cid in enumerate(labels):
            if cid == -1:
                continue
            without = wps[:i] + wps[i + 1:]
            savings.append((total(wps) - total(without), i))
        savings.sort(key=lambda s: (-s[0], s[1]))
        _, idx = savings[0]
        dropped.append(labels[idx])
        del wps[idx], labels[idx]
    return Path(np.asarray(wps)), dropped
