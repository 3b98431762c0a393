"""Exact s-t maximum flow (Dinic's algorithm) with float capacities.

Sized for the per-class subproblems of the selection solver: tens of nodes,
hundreds of arcs. Augmenting along a path subtracts the exact bottleneck, so
the bottleneck arc's residual becomes exactly zero; residuals that fall within
float dust of zero after repeated augmentations are snapped to zero to keep
the final residual reachability (which defines the returned partition) clean.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Dinic"]


class Dinic:
    def __init__(self, n: int):
        self.n = n
        self.to: list[int] = []
        self.cap: list[float] = []
        self.adj: list[list[int]] = [[] for _ in range(n)]

    def add_edge(self, u: int, v: int, capacity: float) -> int:
        """Add arc u->v with the given capacity; returns its edge id.

        Edge ids come in pairs: id^1 is the reverse arc (capacity 0).
        """
        if capacity < 0 or not np.isfinite(capacity):
            raise ValueError(f"capacity must be finite and nonnegative, got {capacity}")
        eid = len(self.to)
        self.adj[u].append(eid)
        self.to.append(v)
        self.cap.append(float(capacity))
        self.adj[v].append(eid + 1)
        self.to.append(u)
        self.cap.append(0.0)
        return eid

    def _bfs(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        queue = [s]
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for e in self.adj[u]:
                v = self.to[e]
                if self.cap[e] > 0.0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[t] >= 0 else None

    def _dfs(self, u: int, t: int, f: float, level: list[int], it: list[int]) -> float:
        if u == t:
            return f
        while it[u] < len(self.adj[u]):
            e = self.adj[u][it[u]]
            v = self.to[e]
            if self.cap[e] > 0.0 and level[v] == level[u] + 1:
                d = self._dfs(v, t, min(f, self.cap[e]), level, it)
                if d > 0.0:
                    self.cap[e] -= d
                    self.cap[e ^ 1] += d
                    if self.cap[e] <= 1e-12 * d:  # snap float dust
                        self.cap[e] = 0.0
                    return d
            it[u] += 1
        return 0.0

    def max_flow(self, s: int, t: int) -> float:
        total = 0.0
        while True:
            level = self._bfs(s, t)
            if level is None:
                return total
            it = [0] * self.n
            while True:
                pushed = self._dfs(s, t, float("inf"), level, it)
                if pushed <= 0.0:
                    break
                total += pushed

    def side_reaching_sink(self, t: int) -> np.ndarray:
        """Boolean array: node can reach t in the residual graph.

        After max_flow this is the sink side of the minimum cut whose sink set
        is smallest (it is contained in the sink set of every minimum cut).
        """
        reach = np.zeros(self.n, dtype=bool)
        reach[t] = True
        queue = [t]
        head = 0
        while head < len(queue):
            v = queue[head]
            head += 1
            for e in self.adj[v]:
                u = self.to[e]
                # residual arc u->v is the reverse pair of edge e (v->u)
                if self.cap[e ^ 1] > 0.0 and not reach[u]:
                    reach[u] = True
                    queue.append(u)
        return reach
