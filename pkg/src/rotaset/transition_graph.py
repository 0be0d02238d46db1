"""Cell-transition graphs and pseudo-rotation polygons.

The torus is cut into N x N cells with centres c_u. An edge (u, v, w) with
w in Z^2 says that the lifted centre c_v + w is reachable from c_u by one
application of the lift followed by a jump shorter than the threshold:

* ``inner``: |F(c_u) - (c_v + w)| < delta. Every path is a genuine
  delta-pseudo-orbit through cell centres.
* ``outer``: threshold delta + r_h + omega(r_h), r_h = h sqrt(2)/2. Every
  delta-pseudo-orbit of F visits a sequence of cells that is a path.

Cycle mean displacement vectors are the rotation vectors realised by
periodic paths; the pseudo-rotation polygon is their convex hull, recovered
exactly through maximum-cycle-mean support queries in integer directions.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels, config
from .geometry import (ConvexRationalPolygon, RationalVec2, convex_hull,
                       primitive_integer_direction)
from .torus_maps import LiftMap, PseudoOrbit, _float_hull_diameter, canonicalize

MODES = ("inner", "outer")
DEFAULT_DIRECTION_BUDGET = 4096
_INT64_SAFE = 2 ** 62


class NoCycleError(ValueError):
    pass


@dataclass(eq=False)
class DisplacementGraph:
    n_nodes: int
    indptr: np.ndarray
    dst: np.ndarray
    wx: np.ndarray
    wy: np.ndarray
    grid: int | None = None
    delta: float | None = None
    mode: str | None = None
    threshold: float | None = None
    lift_offset: tuple[int, int] = (0, 0)
    lift: LiftMap | None = field(default=None, repr=False)
    _scc: np.ndarray | None = field(default=None, repr=False)
    _aux: dict | None = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n_nodes: int, edges: Iterable[tuple[int, int, Sequence[int]]]) -> "DisplacementGraph":
        """Graph from explicit (u, v, (wx, wy)) triples."""
        edges = sorted(((int(u), int(v), int(w[0]), int(w[1])) for u, v, w in edges))
        for u, v, _, _ in edges:
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise ValueError("edge endpoint out of range")
        src = np.array([e[0] for e in edges], dtype=np.int64)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(n_nodes=n_nodes, indptr=indptr,
                   dst=np.array([e[1] for e in edges], dtype=np.int32),
                   wx=np.array([e[2] for e in edges], dtype=np.int64),
                   wy=np.array([e[3] for e in edges], dtype=np.int64))

    @property
    def n_edges(self) -> int:
        return int(len(self.dst))

    @property
    def grid_step(self) -> float | None:
        return None if self.grid is None else 1.0 / self.grid

    def src(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_nodes), np.diff(self.indptr))

    def edges(self) -> list[tuple[int, int, tuple[int, int]]]:
        s = self.src()
        return [(int(s[e]), int(self.dst[e]), (int(self.wx[e]), int(self.wy[e]))) for e in range(self.n_edges)]

    def edge_set(self) -> set[tuple[int, int, int, int]]:
        s = self.src()
        return set(zip(s.tolist(), self.dst.tolist(), self.wx.tolist(), self.wy.tolist()))

    @property
    def scc_index(self) -> np.ndarray:
        if self._scc is None:
            # Parallel edges must be merged (the strong-component routine
            # mislabels matrices with duplicate entries); merging sorts in
            # place, hence the copies.
            A = csr_matrix((np.ones(self.n_edges), self.dst.copy(), self.indptr.copy()),
                           shape=(self.n_nodes,) * 2)
            A.sum_duplicates()
            _, self._scc = connected_components(A, directed=True, connection="strong")
        return self._scc

    def find_edge(self, u: int, v: int) -> int:
        lo, hi = self.indptr[u], self.indptr[u + 1]
        hits = np.nonzero(self.dst[lo:hi] == v)[0]
        if len(hits) == 0:
            raise ValueError(f"no edge {u} -> {v}")
        if len(hits) > 1:
            raise ValueError(f"several edges {u} -> {v}; pass edge indices instead")
        return int(lo + hits[0])

    def cell_center(self, u) -> np.ndarray:
        u = np.asarray(u)
        h = 1.0 / self.grid
        return np.stack([(u % self.grid + 0.5) * h, (u // self.grid + 0.5) * h], axis=-1)

    def export_edges(self, path: str | Path) -> None:
        """Binary edge list: u:u32, v:u32, wx:i8, wy:i8 (little endian)."""
        if self.n_edges and max(np.abs(self.wx).max(), np.abs(self.wy).max()) > 127:
            raise ValueError("edge label does not fit in int8")
        rec = np.empty(self.n_edges, dtype=[("u", "<u4"), ("v", "<u4"), ("wx", "i1"), ("wy", "i1")])
        rec["u"], rec["v"], rec["wx"], rec["wy"] = self.src(), self.dst, self.wx, self.wy
        rec.tofile(str(path))

    @classmethod
    def import_edges(cls, path: str | Path, n_nodes: int) -> "DisplacementGraph":
        rec = np.fromfile(str(path), dtype=[("u", "<u4"), ("v", "<u4"), ("wx", "i1"), ("wy", "i1")])
        return cls.from_edges(n_nodes, ((r["u"], r["v"], (r["wx"], r["wy"])) for r in rec))


def outer_slack(L: LiftMap, N: int) -> float:
    r = math.sqrt(2) / (2 * N)
    return r + L.omega(r)


def build_graph(L: LiftMap, h: float, delta: float, mode: str = "inner") -> DisplacementGraph:
    """Transition graph of ``L`` on the grid of step ``h`` (h = 1/N)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    N = int(round(1.0 / h))
    if N < 1 or abs(N * h - 1.0) > 1e-9:
        raise ValueError("grid step must be 1/N for an integer N")
    if h > delta:
        raise ValueError("grid too coarse")
    Lc, offset = canonicalize(L)
    R = delta if mode == "inner" else delta + outer_slack(L, N)
    s = (np.arange(N) + 0.5) / N
    X, Yc = np.meshgrid(s, s)
    centers = np.stack([X.ravel(), Yc.ravel()], axis=1)
    disp = Lc.phi(centers)
    if not np.all(np.isfinite(disp)):
        raise ValueError("lift produced non-finite values")
    images = np.ascontiguousarray(centers + disp)
    indptr, dst, wx, wy = _kernels.build_edges(images, N, R, config.get_norm() == "sup")

    osc_bound = _float_hull_diameter(disp) + 2 * L.phi_modulus(math.sqrt(2) / (2 * N))
    bound = math.ceil(osc_bound + R) + 2
    if len(wx) and max(np.abs(wx).max(), np.abs(wy).max()) > bound:
        raise ValueError("edge-label overflow: displacement field is not of degree one")
    return DisplacementGraph(n_nodes=N * N, indptr=indptr, dst=dst, wx=wx, wy=wy, grid=N,
                             delta=float(delta), mode=mode, threshold=R, lift_offset=offset, lift=L)


# ---------------------------------------------------------------------------
# maximum cycle mean


@dataclass(frozen=True)
class CycleResult:
    value: Fraction | float
    nodes: tuple[int, ...]
    edges: tuple[int, ...]
    exact: bool


def _exact_direction(theta) -> tuple[tuple[int, int], Fraction]:
    """Integer direction d and factor c with theta = c * d."""
    t = RationalVec2.of(theta)
    if t.x == 0 and t.y == 0:
        raise ValueError("zero direction")
    d = primitive_integer_direction(t)
    c = t.x / d[0] if d[0] else t.y / d[1]
    return d, c


def _cycle_from_policy(G: DisplacementGraph, pi: np.ndarray, start: int) -> tuple[list[int], list[int]]:
    seen = {}
    u, order = start, []
    while u not in seen:
        seen[u] = len(order)
        order.append(u)
        u = int(G.dst[pi[u]])
    nodes = order[seen[u]:]
    return nodes, [int(pi[n]) for n in nodes]


def _policy_data(G: DisplacementGraph) -> dict:
    """Arrays reused by every policy-iteration query on ``G``."""
    if G._aux is None:
        if np.any(np.diff(G.indptr) == 0):
            raise ValueError("every node needs an out-edge for policy iteration")
        src = G.src().astype(np.int64)
        rptr, rev, rsrc = _kernels.reverse_index(G.indptr, G.dst)
        aux = {"rptr": rptr, "rev": rev, "rsrc": rsrc, "scale": 1, "policies": {}}
        if G.grid is not None:
            # Centre-to-centre jumps scaled by N: cycle sums equal N times the
            # label sums, and the greedy policy is then close to optimal.
            N = G.grid
            dst = G.dst.astype(np.int64)
            aux["jx"] = (dst % N + N * G.wx - src % N).astype(np.int32)
            aux["jy"] = (dst // N + N * G.wy - src // N).astype(np.int32)
            aux["scale"] = N
            # Policy iteration on the fan rims first; its optimal policy is a
            # warm start that the full graph then only has to confirm.
            keep = _kernels.rim_mask(G.indptr, aux["jx"], aux["jy"])
            if keep.sum() * 2 < len(keep):
                sel = np.nonzero(keep)[0]
                ip = np.zeros(G.n_nodes + 1, dtype=np.int64)
                np.add.at(ip, src[sel] + 1, 1)
                ip = np.cumsum(ip)
                rd = G.dst[sel]
                aux["rim"] = (sel, ip, rd) + _kernels.reverse_index(ip, rd) + (aux["jx"][sel], aux["jy"][sel])
        else:
            aux["jx"], aux["jy"] = G.wx, G.wy
        G._aux = aux
    return G._aux


def _nearest_policy(policies: dict, d: tuple[int, int]):
    if not policies:
        return None
    ang = math.atan2(d[1], d[0])
    key = min(policies, key=lambda k: abs(math.remainder(math.atan2(k[1], k[0]) - ang, 2 * math.pi)))
    return policies[key].copy()


def _howard(G: DisplacementGraph, d: tuple[int, int]):
    aux = _policy_data(G)
    w = _kernels.direction_weights(aux["jx"], aux["jy"], d[0], d[1])
    scale = aux["scale"]
    wmax = int(np.abs(w).max()) if len(w) else 0
    V = G.n_nodes
    exact = (wmax + 1) * (V + 1) ** 2 < _INT64_SAFE
    if exact and "rim" in aux:
        sel, ip, rd, rr, rv, rs, rjx, rjy = aux["rim"]
        wr = _kernels.direction_weights(rjx, rjy, d[0], d[1])
        # the optimal rim policy of the nearest queried direction is usually
        # a few improvements away from the new optimum
        pr = _nearest_policy(aux["policies"], d)
        if pr is None:
            pr = _kernels.greedy_policy(ip, wr)
        _kernels.howard_exact(ip, rd, wr, pr, 100000, rr, rv, rs, True)
        aux["policies"][d] = pr
        pi = sel[pr]
    else:
        pi = _kernels.greedy_policy(G.indptr, w)
    if exact:
        num, den, X, it, ok = _kernels.howard_exact(G.indptr, G.dst, w, pi, 100000,
                                                    aux["rptr"], aux["rev"], aux["rsrc"], True)
        if not ok:
            raise RuntimeError("policy iteration did not converge")
        # every node of the winning cycle carries the same reduced fraction
        lam = num / den
        cand = np.nonzero(lam >= lam.max() - 1e-9 * max(1.0, abs(lam.max())))[0]
        pairs, first = np.unique(np.stack([num[cand], den[cand]], axis=1), axis=0, return_index=True)
        k = max(range(len(pairs)), key=lambda i: Fraction(int(pairs[i, 0]), int(pairs[i, 1])))
        best = int(cand[first[k]])
        nodes, edges = _cycle_from_policy(G, pi, int(best))
        return Fraction(int(num[best]), int(den[best]) * scale), nodes, edges, True
    lam, X, it, ok = _kernels.howard_float(G.indptr, G.dst, w.astype(float), pi, 100000, 1e-12 * wmax)
    nodes, edges = _cycle_from_policy(G, pi, int(np.argmax(lam)))
    raw = G.wx * d[0] + G.wy * d[1]
    value = Fraction(int(sum(int(raw[e]) for e in edges)), len(edges))
    return value, nodes, edges, False


def _karp_scc(nodes: list[int], adj: dict[int, list[tuple[int, int, int]]]):
    """Karp's maximum cycle mean on one strongly connected component.

    ``adj[u]`` lists (v, weight, edge_id) inside the component. Returns
    (mean as Fraction, cycle edge ids).
    """
    n = len(nodes)
    idx = {u: i for i, u in enumerate(nodes)}
    NEG = None
    D = [[NEG] * n for _ in range(n + 1)]
    D[0][0] = 0
    for k in range(1, n + 1):
        prev, cur = D[k - 1], D[k]
        for u in nodes:
            du = prev[idx[u]]
            if du is NEG:
                continue
            for v, wt, _ in adj[u]:
                val = du + wt
                j = idx[v]
                if cur[j] is NEG or val > cur[j]:
                    cur[j] = val
    best = None
    for j in range(n):
        if D[n][j] is NEG:
            continue
        worst = None
        for k in range(n):
            if D[k][j] is NEG:
                continue
            q = Fraction(D[n][j] - D[k][j], n - k)
            if worst is None or q < worst:
                worst = q
        if worst is not None and (best is None or worst > best):
            best = worst
    # A cycle attaining the mean lies in the subgraph of tight edges for the
    # longest-path potentials of the integer weights den*w - num.
    P, Q = best.numerator, best.denominator
    pot = {u: 0 for u in nodes}
    for _ in range(n):
        changed = False
        for u in nodes:
            for v, wt, _ in adj[u]:
                val = pot[u] + Q * wt - P
                if val > pot[v]:
                    pot[v] = val
                    changed = True
        if not changed:
            break
    tight = {u: [(v, e) for v, wt, e in adj[u] if pot[u] + Q * wt - P == pot[v]] for u in nodes}
    cycle = _find_cycle(nodes, tight)
    return best, cycle


def _find_cycle(nodes: list[int], succ: dict[int, list[tuple[int, int]]]) -> list[int]:
    color = {u: 0 for u in nodes}
    for root in nodes:
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        path_nodes, path_edges = [root], []
        color[root] = 1
        while stack:
            u, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                color[u] = 2
                path_nodes.pop()
                if path_edges:
                    path_edges.pop()
                continue
            v, e = nxt
            if color[v] == 1:
                i = path_nodes.index(v)
                return path_edges[i:] + [e]
            if color[v] == 0:
                color[v] = 1
                stack.append((v, iter(succ[v])))
                path_nodes.append(v)
                path_edges.append(e)
    raise RuntimeError("tight subgraph has no cycle")


def _karp(G: DisplacementGraph, d_weights: Sequence[int]):
    comp = G.scc_index
    src = G.src()
    adj: dict[int, list[tuple[int, int, int]]] = {}
    members: dict[int, list[int]] = {}
    for u in range(G.n_nodes):
        members.setdefault(int(comp[u]), []).append(u)
        adj[u] = []
    for e in range(G.n_edges):
        u, v = int(src[e]), int(G.dst[e])
        if comp[u] == comp[v]:
            adj[u].append((v, d_weights[e], e))
    best = None
    for c, nodes in members.items():
        if not any(adj[u] for u in nodes):
            continue
        val, cyc = _karp_scc(nodes, adj)
        if best is None or val > best[0]:
            best = (val, cyc)
    if best is None:
        raise NoCycleError("no cycles: empty pseudo-rotation set at this resolution")
    val, cyc = best
    return val, [int(src[e]) for e in cyc], cyc


def max_mean_cycle(G: DisplacementGraph, theta, method: str = "auto") -> CycleResult:
    """Maximum over cycles of the mean of <w, theta>, with an attaining cycle.

    ``theta`` may be given as floats, ints or Fractions; floats are taken at
    their exact binary value. ``method`` is ``karp`` (exact, per strongly
    connected component, for small graphs), ``howard`` (policy iteration,
    exact when the integer weights fit in int64) or ``auto``.
    """
    if G.n_edges == 0:
        raise NoCycleError("no cycles: empty pseudo-rotation set at this resolution")
    d, c = _exact_direction(theta)
    if method == "auto":
        method = "karp" if G.n_nodes * G.n_edges <= 20000 else "howard"
    if method == "karp":
        w = [int(a) * d[0] + int(b) * d[1] for a, b in zip(G.wx.tolist(), G.wy.tolist())]
        val, nodes, edges = _karp(G, w)
        return CycleResult(val * c, tuple(nodes), tuple(edges), True)
    if method != "howard":
        raise ValueError("method must be 'karp', 'howard' or 'auto'")
    if np.any(np.diff(G.indptr) == 0):
        # Policy iteration needs out-edges everywhere; nodes without them lie
        # on no cycle and can be dropped.
        return _howard_pruned(G, d, c)
    val, nodes, edges, exact = _howard(G, d)
    return CycleResult(val * c, tuple(nodes), tuple(edges), exact)


def _howard_pruned(G, d, c):
    comp = G.scc_index
    src = G.src()
    sel = np.nonzero(comp[src] == comp[G.dst])[0]
    keep = np.zeros(G.n_nodes, dtype=bool)
    keep[src[sel]] = True
    if not keep.any():
        raise NoCycleError("no cycles: empty pseudo-rotation set at this resolution")
    old = np.nonzero(keep)[0]
    new_id = -np.ones(G.n_nodes, dtype=np.int64)
    new_id[old] = np.arange(len(old))
    # sel is in CSR order and new_id is monotone, so H keeps the edge order
    indptr = np.zeros(len(old) + 1, dtype=np.int64)
    np.add.at(indptr, new_id[src[sel]] + 1, 1)
    H = DisplacementGraph(n_nodes=len(old), indptr=np.cumsum(indptr),
                          dst=new_id[G.dst[sel]].astype(np.int32), wx=G.wx[sel], wy=G.wy[sel])
    val, nodes, edges, exact = _howard(H, d)
    return CycleResult(val * c, tuple(int(old[n]) for n in nodes),
                       tuple(int(sel[e]) for e in edges), exact)


def cycle_mean_vector(G: DisplacementGraph, cycle: Sequence[int], edges: Sequence[int] | None = None) -> RationalVec2:
    """Exact mean label of a closed path given by its nodes (or edge ids)."""
    if edges is None:
        cycle = [int(u) for u in cycle]
        if not cycle:
            raise ValueError("empty cycle")
        edges = [G.find_edge(cycle[i], cycle[(i + 1) % len(cycle)]) for i in range(len(cycle))]
    else:
        src = G.src()
        for i, e in enumerate(edges):
            if G.dst[e] != src[edges[(i + 1) % len(edges)]]:
                raise ValueError("path is not closed")
    sx = sum(int(G.wx[e]) for e in edges)
    sy = sum(int(G.wy[e]) for e in edges)
    n = len(edges)
    return RationalVec2(Fraction(sx, n), Fraction(sy, n))


# ---------------------------------------------------------------------------
# hull refinement


@dataclass
class PseudoRotationSet:
    polygon: ConvexRationalPolygon
    certified: bool
    cycles: dict[RationalVec2, tuple[int, ...]]
    queries: int
    mode: str | None
    delta: float | None
    grid: int | None
    lift_offset: tuple[int, int]

    def to_json(self) -> dict:
        d = self.polygon.to_json()
        d.update({"mode": self.mode, "delta": self.delta, "grid": self.grid,
                  "certified": self.certified, "lift_offset": list(self.lift_offset),
                  "support_queries": self.queries})
        return d


def pseudo_rotation_set(G: DisplacementGraph, budget: int = DEFAULT_DIRECTION_BUDGET,
                        method: str = "auto") -> PseudoRotationSet:
    """Exact hull of cycle mean vectors by support-oracle refinement.

    Starting from the four axis directions, every edge normal of the current
    hull is queried; a query either certifies the edge (support equals the
    edge's value) or returns a cycle mean strictly outside, which is added.
    The polygon is reported for the lift the graph was built from (cycle
    means plus the canonical integer offset).
    """
    if G.n_edges == 0:
        raise NoCycleError("no cycles: empty pseudo-rotation set at this resolution")
    if method == "auto":
        method = "karp" if G.n_nodes * G.n_edges <= 20000 else "howard"
    found: dict[RationalVec2, tuple[int, ...]] = {}
    cache: dict[tuple[int, int], Fraction] = {}
    state = {"inexact": False}

    def query(d: tuple[int, int]) -> Fraction:
        if d in cache:
            return cache[d]
        r = max_mean_cycle(G, d, method=method)
        val, edges = r.value, r.edges
        if not r.exact:
            state["inexact"] = True
        mean = cycle_mean_vector(G, (), edges=edges)
        found.setdefault(mean, tuple(edges))
        cache[d] = Fraction(val)
        return cache[d]

    for d in ((1, 0), (0, 1), (-1, 0), (0, -1)):
        query(d)
    certified = False
    while len(cache) < budget:
        P = convex_hull(found)
        checks = _certificate_checks(P)
        progress = False
        for d, target in checks:
            if len(cache) >= budget:
                break
            if query(d) != target:
                progress = True
                break
        if not progress and all(d in cache and cache[d] == t for d, t in checks):
            certified = True
            break
    P = convex_hull(found)
    cycles = {v: found[v] for v in P.vertices}
    off = RationalVec2(*G.lift_offset)
    shifted = P.translate(off) if G.lift_offset != (0, 0) else P
    cycles = {v + off: c for v, c in cycles.items()}
    return PseudoRotationSet(shifted, certified and not state["inexact"], cycles,
                             len(cache), G.mode, G.delta, G.grid, G.lift_offset)


def _certificate_checks(P: ConvexRationalPolygon) -> list[tuple[tuple[int, int], Fraction]]:
    vs = P.vertices
    if len(vs) == 1:
        p = vs[0]
        return [((1, 0), p.x), ((0, 1), p.y), ((-1, 0), -p.x), ((0, -1), -p.y)]
    if len(vs) == 2:
        a, b = vs
        e = primitive_integer_direction(b - a)
        n = (e[1], -e[0])
        out = []
        for d, pt in ((n, a), ((-n[0], -n[1]), a), (e, b), ((-e[0], -e[1]), a)):
            out.append((d, pt.dot(RationalVec2(*d))))
        return out
    out = []
    for a, b in P.edges():
        e = primitive_integer_direction(b - a)
        n = (e[1], -e[0])
        out.append((n, a.dot(RationalVec2(*n))))
    return out


def pseudo_rotation_polygon(G: DisplacementGraph, **kw) -> ConvexRationalPolygon:
    return pseudo_rotation_set(G, **kw).polygon


def certificate_orbit(G: DisplacementGraph, edges: Sequence[int], repeats: int = 1) -> PseudoOrbit:
    """Lifted centre sequence following a closed path, for the lift ``G.lift``.

    On an inner graph it is a delta-pseudo-orbit of that lift.
    """
    if G.grid is None:
        raise ValueError("graph has no grid geometry")
    src = G.src()
    edges = list(edges) * repeats
    pts = [G.cell_center(int(src[edges[0]]))]
    shift = np.zeros(2)
    off = np.asarray(G.lift_offset, dtype=float)
    for e in edges:
        shift = shift + np.array([G.wx[e], G.wy[e]], dtype=float) + off
        pts.append(G.cell_center(int(G.dst[e])) + shift)
    return PseudoOrbit(np.array(pts), float(G.delta))
