"""Classifier-independent disjunct identification.

Each class is turned into a k-nearest-neighbour graph over its own points and
breadth-first search groups the points into disjuncts. Two traversals exist:

* ``directed`` follows out-edges only, starting each new disjunct at the
  lowest unvisited index and never re-entering a visited point. Results
  depend on the start order, which is fixed here for determinism.
* ``symmetric`` treats u ~ v if either lists the other, so disjuncts are the
  connected components of the undirected graph and are order-independent.

Sweeping k from 1 to floor(sqrt(N)) gives the kappa-delta curve whose knee
fixes the partition.
"""

from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import Dataset
from .errors import ParameterError

NEIGHBOR_MODES = ("within", "global")
TRAVERSALS = ("directed", "symmetric")


@dataclass(frozen=True)
class DisjunctPartition:
    per_class: list  # per_class[c] is a list of sorted index arrays
    kappa: int
    neighbor_mode: str = "within"
    traversal: str = "directed"

    @property
    def delta_total(self) -> int:
        return sum(len(parts) for parts in self.per_class)

    @property
    def deltas(self) -> list:
        return [len(parts) for parts in self.per_class]

    def assignment(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(class id, disjunct id within class, disjunct size) for every point index."""
        cls = np.full(n, -1, dtype=np.int64)
        did = np.full(n, -1, dtype=np.int64)
        size = np.zeros(n, dtype=np.int64)
        for c, parts in enumerate(self.per_class):
            for i, members in enumerate(parts):
                cls[members] = c
                did[members] = i
                size[members] = members.size
        return cls, did, size

    def to_triples(self) -> list[tuple[int, int, int]]:
        return [(c, i, int(p)) for c, parts in enumerate(self.per_class)
                for i, members in enumerate(parts) for p in members]

    def to_text(self) -> str:
        lines = [f"# disjuncts kappa={self.kappa} neighbors={self.neighbor_mode} "
                 f"traversal={self.traversal}",
                 "class,disjunct,index"]
        lines += [f"{c},{i},{p}" for c, i, p in self.to_triples()]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class KappaDeltaCurve:
    points: list  # (kappa, delta) pairs, kappa increasing
    knee: int
    partitions: dict = field(default_factory=dict, repr=False)

    def to_text(self) -> str:
        return "".join(f"{k} {d}\n" for k, d in self.points)

    @property
    def knee_partition(self) -> DisjunctPartition:
        return self.partitions[self.knee]


def _neighbor_order(X: np.ndarray, members: np.ndarray, mode: str) -> np.ndarray:
    """For every class member, candidate neighbours (global indices) nearest first.

    Within mode ranks the other class members. Global mode ranks every point of
    the dataset; callers drop out-of-class entries after truncation.
    """
    pool = members if mode == "within" else np.arange(X.shape[0])
    dist = cdist(X[members], X[pool])
    rows = np.arange(members.size)
    self_col = np.searchsorted(pool, members)
    dist[rows, self_col] = np.inf
    # stable sort over ascending indices: equal distances resolve to the lowest index
    order = np.argsort(dist, axis=1, kind="stable")[:, :-1]
    return pool[order]


def _components(members: np.ndarray, neighbor_lists: list, directed: bool) -> list:
    """Breadth-first search from each unvisited member in increasing index order."""
    adj: dict[int, list] = {int(u): [int(v) for v in nbrs] for u, nbrs in zip(members, neighbor_lists)}
    if not directed:
        for u, nbrs in list(adj.items()):
            for v in nbrs:
                if u not in adj[v]:
                    adj[v].append(u)
    seen: set = set()
    comps = []
    for start in members:
        start = int(start)
        if start in seen:
            continue
        seen.add(start)
        comp = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.append(v)
                    queue.append(v)
        comps.append(np.array(sorted(comp), dtype=np.int64))
    return comps


class _ClassGraphs:
    """Neighbour rankings per class, computed once and truncated per kappa."""

    def __init__(self, ds: Dataset, mode: str, traversal: str):
        if mode not in NEIGHBOR_MODES:
            raise ParameterError(f"neighbor mode must be one of {NEIGHBOR_MODES}, got {mode!r}")
        if traversal not in TRAVERSALS:
            raise ParameterError(f"traversal must be one of {TRAVERSALS}, got {traversal!r}")
        self.mode = mode
        self.traversal = traversal
        self.members = []
        self.orders = []
        for c in range(ds.n_classes):
            m = np.flatnonzero(ds.labels == c)
            self.members.append(m)
            if m.size == 0:
                warnings.warn(f"class {c} is empty and is skipped", stacklevel=3)
                self.orders.append(None)
            else:
                self.orders.append(_neighbor_order(ds.features, m, mode))

    def partition(self, kappa: int) -> DisjunctPartition:
        if int(kappa) != kappa or kappa < 1:
            raise ParameterError(f"kappa must be a positive integer, got {kappa}")
        per_class = []
        for m, order in zip(self.members, self.orders):
            if order is None:
                per_class.append([])
                continue
            kc = min(kappa, m.size)
            if self.mode == "within":
                # a point is never its own neighbour
                lists = list(order[:, :min(kc, m.size - 1)])
            else:
                in_class = np.isin(order[:, :kc], m)
                lists = [row[keep] for row, keep in zip(order[:, :kc], in_class)]
            per_class.append(_components(m, lists, self.traversal == "directed"))
        return DisjunctPartition(per_class, int(kappa), self.mode, self.traversal)


def find_disjuncts(X: Dataset, kappa: int, neighbor_mode: str = "within",
                   traversal: str = "directed") -> DisjunctPartition:
    return _ClassGraphs(X, neighbor_mode, traversal).partition(kappa)


def knee_point(curve) -> int:
    """Curve point farthest from the chord joining its ends, after min-max scaling both axes."""
    pts = [(int(k), float(d)) for k, d in curve]
    if len(pts) < 2:
        return pts[0][0] if pts else 1
    k = np.array([p[0] for p in pts], dtype=np.float64)
    d = np.array([p[1] for p in pts], dtype=np.float64)

    def scale(v):
        span = v.max() - v.min()
        return (v - v.min()) / span if span > 0 else np.zeros_like(v)

    kn, dn = scale(k), scale(d)
    dx, dy = kn[-1] - kn[0], dn[-1] - dn[0]
    length = math.hypot(dx, dy)
    if length == 0:
        return pts[0][0]
    dist = np.abs(dx * (dn - dn[0]) - dy * (kn - kn[0])) / length
    best = dist.max()
    if best <= 1e-12:
        return pts[0][0]
    return pts[int(np.flatnonzero(dist >= best - 1e-12)[0])][0]


def kappa_delta_curve(X: Dataset, neighbor_mode: str = "within",
                      traversal: str = "directed") -> KappaDeltaCurve:
    if X.n < 2:
        raise ParameterError("need at least two points")
    graphs = _ClassGraphs(X, neighbor_mode, traversal)
    parts = {k: graphs.partition(k) for k in range(1, math.isqrt(X.n) + 1)}
    points = [(k, p.delta_total) for k, p in parts.items()]
    return KappaDeltaCurve(points, knee_point(points), parts)
