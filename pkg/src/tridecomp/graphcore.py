"""Graphs as bitset rows, sparse integer vectors over edges and triangles,
boundary maps, and the basic checks used throughout the pipeline."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

Edge = Tuple[int, int]
Triple = Tuple[int, int, int]


def edge_key(u: int, v: int) -> Edge:
    if u == v:
        raise ValueError(f"self-loop at {u}")
    return (u, v) if u < v else (v, u)


def tri_key(x: int, y: int, z: int) -> Triple:
    t = tuple(sorted((x, y, z)))
    if t[0] == t[1] or t[1] == t[2]:
        raise ValueError(f"degenerate triangle {t}")
    return t  # type: ignore[return-value]


def tri_edges(t: Sequence[int]) -> Tuple[Edge, Edge, Edge]:
    x, y, z = t
    return edge_key(x, y), edge_key(x, z), edge_key(y, z)


def iter_bits(x: int) -> Iterator[int]:
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


class Graph:
    """Simple undirected graph on ``range(n)``; ``adj[v]`` is a bitset int."""

    __slots__ = ("n", "adj")

    def __init__(self, n: int, edges: Iterable[Edge] = ()):
        self.n = n
        self.adj = [0] * n
        for u, v in edges:
            self.add_edge(u, v)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        g = cls(n)
        full = (1 << n) - 1
        g.adj = [full ^ (1 << v) for v in range(n)]
        return g

    @classmethod
    def gnp(cls, n: int, p: float, rng: random.Random) -> "Graph":
        g = cls(n)
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < p:
                    g.adj[u] |= 1 << v
                    g.adj[v] |= 1 << u
        return g

    def copy(self) -> "Graph":
        g = Graph(self.n)
        g.adj = list(self.adj)
        return g

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise ValueError(f"self-loop at {u}")
        self.adj[u] |= 1 << v
        self.adj[v] |= 1 << u

    def remove_edge(self, u: int, v: int) -> None:
        self.adj[u] &= ~(1 << v)
        self.adj[v] &= ~(1 << u)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def degree(self, v: int) -> int:
        return self.adj[v].bit_count()

    def degrees(self) -> List[int]:
        return [r.bit_count() for r in self.adj]

    def neighbors(self, v: int) -> List[int]:
        return list(iter_bits(self.adj[v]))

    def num_edges(self) -> int:
        return sum(r.bit_count() for r in self.adj) // 2

    __len__ = num_edges

    def edges(self) -> Iterator[Edge]:
        """Edges in lexicographic order of their canonical keys."""
        for u in range(self.n):
            for v in iter_bits(self.adj[u] >> (u + 1)):
                yield (u, u + 1 + v)

    def edge_set(self) -> Set[Edge]:
        return set(self.edges())

    def is_subgraph_of(self, other: "Graph") -> bool:
        return self.n == other.n and all(a & ~b == 0 for a, b in zip(self.adj, other.adj))

    def difference(self, other: "Graph") -> "Graph":
        g = Graph(self.n)
        g.adj = [a & ~b for a, b in zip(self.adj, other.adj)]
        return g

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self.adj == other.adj

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.num_edges()})"


class SparseVec:
    """Integer vector indexed by k-subsets of the vertex set (k = ``order``).

    Keys are sorted tuples.  Order 3 is a triangle vector, order 2 an
    integer-weighted graph, order 1 a vertex vector, order 0 a scalar.
    """

    order = -1

    def __init__(self, n: int, weights: Optional[Dict[Tuple[int, ...], int]] = None):
        self.n = n
        self.w: Dict[Tuple[int, ...], int] = {}
        if weights:
            for k, val in weights.items():
                self.add(k, val)

    def _key(self, k: Sequence[int]) -> Tuple[int, ...]:
        key = tuple(sorted(k))
        if len(key) != self.order or len(set(key)) != self.order:
            raise ValueError(f"bad key {k} for order {self.order}")
        return key

    def _new(self) -> "SparseVec":
        return type(self)(self.n)

    def add(self, k: Sequence[int], val: int = 1) -> None:
        key = self._key(k)
        nv = self.w.get(key, 0) + val
        if nv:
            self.w[key] = nv
        else:
            self.w.pop(key, None)

    def __getitem__(self, k: Sequence[int]) -> int:
        return self.w.get(tuple(sorted(k)), 0)

    def items(self):
        return self.w.items()

    def keys(self):
        return self.w.keys()

    def __len__(self) -> int:
        return len(self.w)

    def is_zero(self) -> bool:
        return not self.w

    def copy(self) -> "SparseVec":
        out = self._new()
        out.w = dict(self.w)
        return out

    def __add__(self, other: "SparseVec") -> "SparseVec":
        out = self.copy()
        for k, v in other.items():
            out.add(k, v)
        return out

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        out = self.copy()
        for k, v in other.items():
            out.add(k, -v)
        return out

    def __neg__(self) -> "SparseVec":
        return self.scale(-1)

    def scale(self, alpha: int) -> "SparseVec":
        out = self._new()
        if alpha:
            out.w = {k: alpha * v for k, v in self.w.items()}
        return out

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SparseVec) and self.order == other.order and self.w == other.w

    def positive(self) -> "SparseVec":
        out = self._new()
        out.w = {k: v for k, v in self.w.items() if v > 0}
        return out

    def negative(self) -> "SparseVec":
        out = self._new()
        out.w = {k: -v for k, v in self.w.items() if v < 0}
        return out

    def total(self) -> int:
        return sum(self.w.values())

    def abs_total(self) -> int:
        return sum(abs(v) for v in self.w.values())

    def support(self) -> Set[Tuple[int, ...]]:
        return set(self.w)

    def signed_elements(self) -> List[Tuple[Tuple[int, ...], int]]:
        """Each key repeated |weight| times with its sign, in key order."""
        out = []
        for k in sorted(self.w):
            v = self.w[k]
            s = 1 if v > 0 else -1
            out.extend([(k, s)] * abs(v))
        return out

    def to_json(self) -> List[List[int]]:
        return [list(k) + [v] for k, v in sorted(self.w.items())]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, support={len(self.w)})"


class ScalarVec(SparseVec):
    order = 0


class VertexVec(SparseVec):
    order = 1


class IntGraph(SparseVec):
    order = 2

    @classmethod
    def from_graph(cls, g: Graph) -> "IntGraph":
        out = cls(g.n)
        out.w = {e: 1 for e in g.edges()}
        return out

    def vertex_weight(self, v: int, absolute: bool = True) -> int:
        return sum(abs(w) if absolute else w for k, w in self.w.items() if v in k)

    def vertex_weights(self, absolute: bool = True) -> List[int]:
        out = [0] * self.n
        for (u, v), w in self.w.items():
            x = abs(w) if absolute else w
            out[u] += x
            out[v] += x
        return out

    def to_graph(self) -> Graph:
        """Support as a simple graph; weights must be 0/1."""
        if any(v != 1 for v in self.w.values()):
            raise ValueError("IntGraph is not a 0/1 vector")
        return Graph(self.n, self.w.keys())


class TriangleVec(SparseVec):
    order = 3

    @classmethod
    def from_triangles(cls, n: int, tris: Iterable[Sequence[int]], sign: int = 1) -> "TriangleVec":
        out = cls(n)
        for t in tris:
            out.add(t, sign)
        return out


_ORDER_CLASSES = {0: ScalarVec, 1: VertexVec, 2: IntGraph, 3: TriangleVec}


def boundary(j: int, v: Union[SparseVec, Graph]) -> SparseVec:
    """(d_j v)_f = sum of v_e over e containing f, for |f| = j."""
    if isinstance(v, Graph):
        v = IntGraph.from_graph(v)
    if not 0 <= j <= v.order:
        raise ValueError(f"boundary order {j} out of range for order {v.order}")
    out = _ORDER_CLASSES[j](v.n)
    acc: Dict[Tuple[int, ...], int] = {}
    for k, val in v.items():
        for f in combinations(k, j):
            acc[f] = acc.get(f, 0) + val
    out.w = {f: val for f, val in acc.items() if val}
    return out


# ---------------------------------------------------------------- matchings


def matching_edges(triangles: Iterable[Sequence[int]]) -> Set[Edge]:
    """Edge union of a set of triangles; raises if two triangles share an edge."""
    seen: Set[Edge] = set()
    for t in triangles:
        for e in tri_edges(t):
            if e in seen:
                raise ValueError(f"triangles share edge {e}")
            seen.add(e)
    return seen


def is_matching(triangles: Iterable[Sequence[int]]) -> bool:
    try:
        matching_edges(triangles)
    except ValueError:
        return False
    return True


def verify_decomposition(g: Graph, triangles: Iterable[Sequence[int]]) -> bool:
    """True iff the triangles partition the edge set of g."""
    covered = 0
    seen: Set[Edge] = set()
    for t in triangles:
        for e in tri_edges(t):
            if e in seen or not g.has_edge(*e):
                return False
            seen.add(e)
            covered += 1
    return covered == g.num_edges()


# ---------------------------------------------------------------- checks


def density(g: Graph) -> Fraction:
    if g.n < 2:
        raise ValueError("density needs at least two vertices")
    return Fraction(g.num_edges(), g.n * (g.n - 1) // 2)


def is_tridivisible(g: Union[Graph, IntGraph]) -> bool:
    if isinstance(g, Graph):
        return g.num_edges() % 3 == 0 and all(d % 2 == 0 for d in g.degrees())
    return g.total() % 3 == 0 and all(w % 2 == 0 for w in g.vertex_weights(absolute=False))


def is_bounded(j: Union[Graph, IntGraph], c: float) -> bool:
    """Every vertex meets fewer than c*n edges, counted with multiplicity."""
    if isinstance(j, Graph):
        return all(d < c * j.n for d in j.degrees())
    return all(w < c * j.n for w in j.vertex_weights())


def max_degree_ratio(j: Union[Graph, IntGraph]) -> float:
    """Smallest c such that j is (c + tiny)-bounded: max weighted degree / n."""
    ws = j.degrees() if isinstance(j, Graph) else j.vertex_weights()
    return max(ws, default=0) / j.n if j.n else 0.0


@dataclass
class TypicalityReport:
    deviation: float  # smallest c with |common nbhd| = (1 +- |S| c) * prediction
    raw_deviation: float  # largest |observed/prediction - 1|, no |S| scaling
    worst_set: Tuple[Tuple[int, ...], Tuple[int, ...]]  # (S*, S minus S*)
    sampled: bool
    sets_checked: int
    h: int
    degenerate: bool = False


def _common(adj_a: List[int], adj_b: List[int], star: Sequence[int], rest: Sequence[int], full: int) -> int:
    acc = full
    for x in star:
        acc &= adj_a[x]
    for x in rest:
        acc &= adj_b[x]
    return acc.bit_count()


def _nested_sets(n: int, h: int, exhaustive: bool, samples: int, rng: random.Random, with_star: bool):
    if exhaustive:
        for k in range(1, h + 1):
            for s in combinations(range(n), k):
                if with_star:
                    for ks in range(k + 1):
                        for star in combinations(s, ks):
                            yield star, tuple(x for x in s if x not in star)
                else:
                    yield (), s
    else:
        for _ in range(samples):
            k = rng.randint(1, h)
            s = rng.sample(range(n), k)
            ks = rng.randint(0, k) if with_star else 0
            yield tuple(s[:ks]), tuple(s[ks:])


def pair_typicality_deviation(
    g: Graph,
    gstar: Graph,
    h: int,
    samples: int = 10_000,
    rng: Optional[random.Random] = None,
    exhaustive: Optional[bool] = None,
) -> TypicalityReport:
    """Worst deviation of |cap_{S*} G*(x) cap cap_{S - S*} G(x)| from
    d(G*)^|S*| d(G)^|S - S*| n over nested pairs S* within S, |S| <= h.

    Exhaustive for h <= 2 unless told otherwise; sampled (a lower bound on
    the true worst case) above that.
    """
    if not gstar.is_subgraph_of(g):
        raise ValueError("Gstar is not contained in G")
    return _typicality(g, gstar, h, samples, rng, exhaustive, with_star=True)


def typicality_deviation(
    g: Graph,
    h: int,
    samples: int = 10_000,
    rng: Optional[random.Random] = None,
    exhaustive: Optional[bool] = None,
) -> TypicalityReport:
    return _typicality(g, g, h, samples, rng, exhaustive, with_star=False)


def _typicality(g, gstar, h, samples, rng, exhaustive, with_star) -> TypicalityReport:
    if h < 1:
        raise ValueError("h must be at least 1")
    n = g.n
    d = float(density(g))
    ds = float(density(gstar))
    if exhaustive is None:
        exhaustive = h <= 2
    rng = rng or random.Random(0)
    full = (1 << n) - 1
    worst, worst_raw, worst_set = 0.0, 0.0, ((), ())
    checked = 0
    degenerate = False
    for star, rest in _nested_sets(n, h, exhaustive, samples, rng, with_star):
        pred = ds ** len(star) * d ** len(rest) * n
        if pred == 0:
            degenerate = True
            continue
        obs = _common(gstar.adj, g.adj, star, rest, full)
        raw = abs(obs / pred - 1)
        checked += 1
        dev = raw / (len(star) + len(rest))
        worst_raw = max(worst_raw, raw)
        if dev > worst:
            worst, worst_set = dev, (star, rest)
    if degenerate and checked == 0:
        worst = worst_raw = math.nan
    return TypicalityReport(worst, worst_raw, worst_set, not exhaustive, checked, h, degenerate)


# ---------------------------------------------------------------- file format


def read_graph(path: str) -> Graph:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty graph file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: header must be 'n m'")
    n, m = int(head[0]), int(head[1])
    g = Graph(n)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: bad edge line {ln!r}")
        u, v = int(parts[0]), int(parts[1])
        if not (0 <= u < v < n):
            raise ValueError(f"{path}: edge {u} {v} must satisfy 0 <= u < v < n")
        g.add_edge(u, v)
    if g.num_edges() != m:
        raise ValueError(f"{path}: header says {m} edges, found {g.num_edges()}")
    return g


def write_graph(g: Graph, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.num_edges()}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


# ---------------------------------------------------------------- seeding / errors


def derive_seed(seed: int, *labels) -> int:
    """Counter-based child seed: a 64-bit hash of the parent seed and labels."""
    import hashlib

    text = repr((int(seed),) + tuple(labels)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "big")


class StageAbort(RuntimeError):
    """A randomised stage ran out of attempts; ``context`` says where."""

    def __init__(self, stage: str, message: str, context: Optional[dict] = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.context = context or {}
