"""Exact selection-energy minimization via s-t min-cut, a brute-force oracle,
and the lambda-sweep driver.

The energy is pairwise-submodular for lam <= 0 (the only joint cost,
lam * w_ij at alpha_i = alpha_j = 1, is nonpositive), so it reduces to a
minimum cut with nonnegative arc capacities. The reduction per face class:

  * fold lam * w_ij into the unary of the higher endpoint j
    (the standard decomposition charges B+C-A-D = -lam*w at (0, 1), and
    D-C = lam*w as a label-1 unary on j);
  * arc i->j with capacity -lam * w_ij charges the (alpha_i=0, alpha_j=1)
    configuration;
  * modified unary u' >= 0 becomes arc s->k (charged when alpha_k = 1),
    u' < 0 becomes arc k->t with capacity -u' plus a constant offset u'.

Minimum cut value + offset = minimum energy. Since no pairwise term crosses
classes, classes are solved independently and concatenated.

Tie-break: the returned mask is the canonical minimal optimum (fewest faces
selected, which for the cut is the unique smallest sink side; the brute-force
oracle additionally orders equal-count co-optima lexicographically, preferring
alpha_i = 0 at the lowest index).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import FormatError
from .maxflow import Dinic
from .selgraph import SelectionGraph, SelectionMask, _check_lambda, energy, pairwise_reward

__all__ = [
    "SweepEntry",
    "SweepResult",
    "default_lambda_grid",
    "minimize",
    "brute_force_minimize",
    "lambda_sweep",
    "solve_class_cut",
    "save_mask",
    "load_mask",
    "write_sweep_csv",
]

BRUTE_FORCE_CLASS_LIMIT = 20


@dataclass
class SweepEntry:
    lam: float
    selected_count: int
    optimal_energy: float
    pairwise_reward: float


@dataclass
class SweepResult:
    entries: list[SweepEntry]

    def lambdas(self) -> list[float]:
        return [e.lam for e in self.entries]

    def counts(self) -> list[int]:
        return [e.selected_count for e in self.entries]

    def validate(self) -> None:
        """Assert the provable parametric invariants; a violation is a bug."""
        prev = None
        for e in self.entries:
            if e.optimal_energy > 0.0:
                raise AssertionError(f"optimal energy {e.optimal_energy} > 0 at lambda {e.lam}")
            if prev is not None:
                if e.lam <= prev.lam:
                    raise AssertionError("sweep entries must be sorted by lambda ascending")
                if e.pairwise_reward > prev.pairwise_reward:
                    raise AssertionError(
                        f"pairwise reward increased: {prev.pairwise_reward} -> "
                        f"{e.pairwise_reward} at lambda {e.lam}"
                    )
                if e.optimal_energy < prev.optimal_energy:
                    raise AssertionError(
                        f"optimal energy decreased: {prev.optimal_energy} -> "
                        f"{e.optimal_energy} at lambda {e.lam}"
                    )
            prev = e


def default_lambda_grid() -> list[float]:
    """Powers of two from -8192 up to -1, then 0."""
    return [-float(2**k) for k in range(13, -1, -1)] + [0.0]


def _class_edges(graph: SelectionGraph) -> dict[int, list[tuple[int, int, float]]]:
    """Edges grouped by class label, endpoints unchanged (global ids)."""
    grouped: dict[int, list[tuple[int, int, float]]] = {
        int(c): [] for c in range(1, graph.n_classes + 1)
    }
    for i, j, w in zip(graph.edge_i, graph.edge_j, graph.edge_w):
        grouped[int(graph.labels[i])].append((int(i), int(j), float(w)))
    return grouped


def solve_class_cut(
    unaries: np.ndarray, edges: list[tuple[int, int, float]], lam: float
) -> tuple[np.ndarray, float, float]:
    """Exactly minimize one class's energy via min-cut.

    ``edges`` use local face indices (a, b, w) with a < b. Returns
    ``(alpha, cut_value, offset)`` where alpha is the canonical minimal
    optimal labeling, cut_value is recomputed from the original capacities
    across the returned partition, and cut_value + offset equals the class
    energy of alpha.
    """
    n = len(unaries)
    u_mod = np.asarray(unaries, dtype=np.float64).copy()
    for a, b, w in edges:
        u_mod[b] += lam * w

    s, t = n, n + 1
    net = Dinic(n + 2)
    original: list[tuple[int, int, int, float]] = []  # (edge id, u, v, capacity)
    offset = 0.0
    for k in range(n):
        if u_mod[k] > 0.0:
            eid = net.add_edge(s, k, u_mod[k])
            original.append((eid, s, k, u_mod[k]))
        elif u_mod[k] < 0.0:
            eid = net.add_edge(k, t, -u_mod[k])
            original.append((eid, k, t, -u_mod[k]))
            offset += u_mod[k]
    for a, b, w in edges:
        c = -lam * w
        if c > 0.0:
            eid = net.add_edge(a, b, c)
            original.append((eid, a, b, c))

    net.max_flow(s, t)
    reach = net.side_reaching_sink(t)
    alpha = reach[:n].astype(np.int8)

    cut_value = 0.0
    for _, u, v, c in original:
        if not reach[u] and reach[v]:
            cut_value += c
    return alpha, cut_value, offset


def minimize(graph: SelectionGraph, lam: float) -> tuple[SelectionMask, float]:
    """Global minimum of the selection energy at ``lam`` (exact).

    Solves each class independently (valid: no pairwise term crosses classes)
    and concatenates. Deterministic; returns the canonical minimal optimum.
    """
    _check_lambda(lam)
    graph.validate()
    alpha = np.zeros(graph.n_faces, dtype=np.int8)
    grouped = _class_edges(graph)
    for c in range(1, graph.n_classes + 1):
        ids = graph.class_faces(c)
        if len(ids) == 0:
            continue
        local = {int(g): k for k, g in enumerate(ids)}
        edges = [(local[a], local[b], w) for a, b, w in grouped[c]]
        a_local, _, _ = solve_class_cut(graph.unary[ids], edges, lam)
        alpha[ids] = a_local
    mask = SelectionMask(alpha)
    return mask, energy(graph, mask, lam)


def _brute_force_class(
    unaries: np.ndarray, edges: list[tuple[int, int, float]], lam: float
) -> np.ndarray:
    n = len(unaries)
    best_e = 0.0
    best_count = 0
    best_bits = (0,) * n  # empty labeling is always feasible with energy 0
    for assignment in itertools.product((0, 1), repeat=n):
        e = 0.0
        for k in range(n):
            if assignment[k]:
                e += unaries[k]
        for a, b, w in edges:
            if assignment[a] and assignment[b]:
                e += lam * w
        count = sum(assignment)
        if e < best_e or (
            e == best_e and (count, assignment) < (best_count, best_bits)
        ):
            best_e, best_count, best_bits = e, count, assignment
    return np.array(best_bits, dtype=np.int8)


def brute_force_minimize(graph: SelectionGraph, lam: float) -> tuple[SelectionMask, float]:
    """Reference semantics for :func:`minimize` by per-class enumeration.

    Requires every class to have at most BRUTE_FORCE_CLASS_LIMIT faces.
    """
    _check_lambda(lam)
    graph.validate()
    alpha = np.zeros(graph.n_faces, dtype=np.int8)
    grouped = _class_edges(graph)
    for c in range(1, graph.n_classes + 1):
        ids = graph.class_faces(c)
        if len(ids) == 0:
            continue
        if len(ids) > BRUTE_FORCE_CLASS_LIMIT:
            raise ValueError(
                f"class {c} has {len(ids)} faces; brute force is limited to "
                f"{BRUTE_FORCE_CLASS_LIMIT} per class"
            )
        local = {int(g): k for k, g in enumerate(ids)}
        edges = [(local[a], local[b], w) for a, b, w in grouped[c]]
        alpha[ids] = _brute_force_class(graph.unary[ids], edges, lam)
    mask = SelectionMask(alpha)
    return mask, energy(graph, mask, lam)


def lambda_sweep(graph: SelectionGraph, lambdas: list[float] | None = None) -> SweepResult:
    """Run :func:`minimize` over a lambda grid (default: pow2 -8192..-1, 0)."""
    grid = default_lambda_grid() if lambdas is None else sorted(float(v) for v in lambdas)
    for lam in grid:
        _check_lambda(lam)
    entries = []
    for lam in grid:
        mask, e = minimize(graph, lam)
        entries.append(
            SweepEntry(
                lam=lam,
                selected_count=mask.selected_count,
                optimal_energy=e,
                pairwise_reward=pairwise_reward(graph, mask),
            )
        )
    result = SweepResult(entries)
    result.validate()
    return result


# ---------------------------------------------------------------------------
# file formats

def save_mask(path: str | Path, mask: SelectionMask, lam: float) -> None:
    lines = [f"SKDMASK1 {len(mask)} {float(lam)!r}"]
    for i, a in enumerate(mask.alpha):
        lines.append(f"{i},{int(a)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_mask(path: str | Path) -> tuple[SelectionMask, float]:
    raw = Path(path).read_text(encoding="ascii").split("\n")
    while raw and raw[-1] == "":
        raw.pop()
    if not raw:
        raise FormatError("empty mask file", line=1)
    header = raw[0].split()
    if len(header) != 3 or header[0] != "SKDMASK1":
        raise FormatError("malformed header (expected 'SKDMASK1 n lambda')", line=1)
    try:
        n = int(header[1])
        lam = float(header[2])
    except ValueError:
        raise FormatError("malformed header fields", line=1) from None
    if len(raw) != 1 + n:
        raise FormatError(f"expected {n} mask rows, found {len(raw) - 1}", line=len(raw))
    alpha = np.zeros(n, dtype=np.int8)
    for k in range(n):
        lineno = k + 2
        fields = raw[lineno - 1].split(",")
        if len(fields) != 2:
            raise FormatError("expected 'id,alpha'", line=lineno)
        if fields[0] != str(k):
            raise FormatError(f"ids must be dense ascending; got {fields[0]!r}", line=lineno)
        if fields[1] not in ("0", "1"):
            raise FormatError(f"alpha must be 0 or 1, got {fields[1]!r}", line=lineno)
        alpha[k] = int(fields[1])
    return SelectionMask(alpha), lam


def write_sweep_csv(result: SweepResult, path: str | Path) -> None:
    lines = ["lambda,count,energy,pairwise_reward"]
    for e in result.entries:
        lines.append(
            f"{e.lam!r},{e.selected_count},{e.optimal_energy!r},{e.pairwise_reward!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
