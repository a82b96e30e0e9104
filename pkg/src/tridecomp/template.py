"""The random algebraic template.

Vertices get distinct nonzero labels in F_{2^a}; the template T is the set
of triangles of G whose labels XOR to zero, and G* is the union of their
edges.  Any edge has at most one template triangle on it because the
third label is forced.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from . import gf2lin
from .graphcore import (
    Graph,
    Triple,
    TypicalityReport,
    density,
    iter_bits,
    pair_typicality_deviation,
    tri_key,
)


class ConfigurationError(ValueError):
    pass


def window_exponent(n: int) -> int:
    """The a with 2^(a-2) < n <= 2^(a-1)."""
    if n < 8:
        raise ConfigurationError("paper mode needs n >= 8")
    return (n - 1).bit_length() + 1


@dataclass
class Template:
    a: int
    pi: List[int]
    T: Set[Triple]
    gstar: Graph
    mode: str = "paper"
    inv: List[int] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if not self.inv:
            self.inv = _inverse(self.pi, self.a)

    @property
    def n(self) -> int:
        return len(self.pi)

    @property
    def gamma(self) -> float:
        return self.n / 2**self.a

    @classmethod
    def from_triangles(cls, pi: Sequence[int], a: int, triangles, mode: str = "custom") -> "Template":
        pi = list(pi)
        inv = _inverse(pi, a)
        T: Set[Triple] = set()
        gstar = Graph(len(pi))
        for t in triangles:
            x, y, z = tri_key(*t)
            if pi[x] ^ pi[y] ^ pi[z]:
                raise ValueError(f"triangle {t} does not have zero label sum")
            T.add((x, y, z))
            for u, v in ((x, y), (x, z), (y, z)):
                if gstar.has_edge(u, v):
                    raise ValueError(f"template triangles share edge {(u, v)}")
                gstar.add_edge(u, v)
        return cls(a, pi, T, gstar, mode, inv)

    def vertex_of(self, label: int) -> int:
        """Vertex carrying ``label``, or -1."""
        return self.inv[label] if 0 < label < len(self.inv) else -1

    def third_point(self, u: int, v: int) -> int:
        return self.inv[self.pi[u] ^ self.pi[v]]

    def is_template_triangle(self, t: Sequence[int]) -> bool:
        return tri_key(*t) in self.T

    def to_json(self) -> Dict:
        return {
            "a": self.a,
            "gamma": self.gamma,
            "mode": self.mode,
            "pi": self.pi,
            "T": [list(t) for t in sorted(self.T)],
        }

    @classmethod
    def from_json(cls, data: Dict) -> "Template":
        return cls.from_triangles(data["pi"], data["a"], data["T"], data.get("mode", "custom"))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def _inverse(pi: Sequence[int], a: int) -> List[int]:
    inv = [-1] * (1 << a)
    for v, lab in enumerate(pi):
        if not 0 < lab < (1 << a):
            raise ValueError(f"label {lab} of vertex {v} outside F_2^{a} minus 0")
        if inv[lab] != -1:
            raise ValueError(f"label {lab} used twice")
        inv[lab] = v
    return inv


def build_template(g: Graph, mode: str, rng: random.Random, a: Optional[int] = None) -> Template:
    """Random injection into F_{2^a} minus 0, template T and G* = union of T.

    ``mode`` is ``paper`` (2^(a-2) < n <= 2^(a-1)), ``dense`` (n = 2^a - 1,
    labels biject onto the nonzero elements) or ``fixed`` (given a with 2^a > n).
    """
    n = g.n
    if mode == "paper":
        a = window_exponent(n)
    elif mode == "dense":
        a = (n + 1).bit_length() - 1
        if n < 3 or (1 << a) != n + 1:
            raise ConfigurationError(f"dense mode needs n = 2^a - 1, got n = {n}")
    elif mode == "fixed":
        if a is None or (1 << a) <= n:
            raise ConfigurationError(f"fixed mode needs 2^a > n, got a = {a}, n = {n}")
    else:
        raise ConfigurationError(f"unknown template mode {mode!r}")
    pi = rng.sample(range(1, 1 << a), n)
    inv = _inverse(pi, a)
    T: Set[Triple] = set()
    gstar = Graph(n)
    adj = g.adj
    for u, v in g.edges():
        w = inv[pi[u] ^ pi[v]]
        if w > v and adj[u] >> w & 1 and adj[v] >> w & 1:
            T.add((u, v, w))
            gstar.add_edge(u, v)
            gstar.add_edge(u, w)
            gstar.add_edge(v, w)
    return Template(a, pi, T, gstar, mode, inv)


@dataclass
class TemplateStats:
    density_star: float
    predicted: float  # gamma * d(G)^3
    rel_error: float
    in_window: bool
    pair_typicality: Optional[TypicalityReport]


def template_stats(
    g: Graph,
    tpl: Template,
    h: int = 0,
    samples: int = 10_000,
    rng: Optional[random.Random] = None,
) -> TemplateStats:
    """Compare d(G*) with gamma d(G)^3; optionally measure (G, G*) typicality."""
    d = float(density(g))
    ds = float(density(tpl.gstar))
    pred = tpl.gamma * d**3
    rel = abs(ds / pred - 1) if pred else math.inf
    window = 2 ** (tpl.a - 2) < g.n <= 2 ** (tpl.a - 1)
    pt = pair_typicality_deviation(g, tpl.gstar, h, samples, rng) if h else None
    return TemplateStats(ds, pred, rel, window, pt)


# ---------------------------------------------------------------- counting


@dataclass
class ShuffleCount:
    count: float  # exact count, or estimate scaled from the sample
    exact: bool
    examined: int
    accepted: int
    prediction: float  # d(G)^180 gamma^18 2^(2a)


def count_shuffles(
    tpl: Template,
    z: Sequence[int],
    budget: int = 1 << 16,
    rng: Optional[random.Random] = None,
    g_density: Optional[float] = None,
) -> ShuffleCount:
    """Count pairs (t1, t2) giving a shuffle in G* through the octahedral triangle z."""
    from .completion import is_octahedral, shuffle_for

    if is_octahedral(z, tpl) is None:
        raise ValueError(f"{tuple(z)} is not octahedral")
    q = 1 << tpl.a
    zl = [tpl.pi[v] for v in z]
    d = 1.0 if g_density is None else g_density
    pred = d**180 * tpl.gamma**18 * q * q
    if q * q <= budget:
        pairs = ((t1, t2) for t1 in range(q) for t2 in range(q))
        total, exact = q * q, True
    else:
        rng = rng or random.Random(0)
        pairs = ((rng.randrange(q), rng.randrange(q)) for _ in range(budget))
        total, exact = budget, False
    acc = sum(shuffle_for(tpl, zl, t1, t2) is not None for t1, t2 in pairs)
    est = acc if exact else acc * (q * q) / total
    return ShuffleCount(est, exact, total, acc, pred)


@dataclass
class LinearExtension:
    """A graph H on range(k) with a linear form c_v + sum_{i in S_v} y_i per vertex.

    ``forms[v] = (c_v, mask_v)`` with mask_v an F_2 vector over the g unknowns.
    """

    num_vertices: int
    edges: List[Tuple[int, int]]
    forms: List[Tuple[int, int]]
    g: int

    @property
    def base(self) -> List[int]:
        return [v for v, (_, m) in enumerate(self.forms) if m == 0]

    def validate(self) -> None:
        if len(self.forms) != self.num_vertices:
            raise ValueError("one form per vertex required")
        if len(set(self.forms)) != len(self.forms):
            raise ValueError("linear forms must be distinct")
        # incidence matrix rows are the masks; full column rank means the masks span F_2^g
        if self.g < 1 or gf2lin.rank([m for _, m in self.forms]) != self.g:
            raise ValueError("incidence matrix of the forms is not of full column rank")


@dataclass
class ExtensionCount:
    count: float
    exact: bool
    examined: int
    accepted: int
    prediction: float


def count_linear_extensions(
    tpl: Template,
    ext: LinearExtension,
    budget: int = 1 << 16,
    rng: Optional[random.Random] = None,
    g_density: Optional[float] = None,
) -> ExtensionCount:
    """Number of y in F_{2^a}^g for which v -> L_v(y) embeds H into G*."""
    ext.validate()
    q = 1 << tpl.a
    space = q**ext.g
    base = set(ext.base)
    d = 1.0 if g_density is None else g_density
    outer_edges = sum(1 for u, v in ext.edges if not (u in base and v in base))
    pred = d**outer_edges * tpl.gamma ** (ext.num_vertices - len(base)) * space

    def ok(ys: Sequence[int]) -> bool:
        verts = []
        for c, m in ext.forms:
            lab = c
            for i in iter_bits(m):
                lab ^= ys[i]
            v = tpl.vertex_of(lab)
            if v < 0:
                return False
            verts.append(v)
        if len(set(verts)) != len(verts):
            return False
        return all(tpl.gstar.has_edge(verts[u], verts[v]) for u, v in ext.edges)

    if space <= budget:
        acc = 0
        for code in range(space):
            ys = [(code >> (tpl.a * i)) & (q - 1) for i in range(ext.g)]
            acc += ok(ys)
        return ExtensionCount(acc, True, space, acc, pred)
    rng = rng or random.Random(0)
    acc = sum(ok([rng.randrange(q) for _ in range(ext.g)]) for _ in range(budget))
    return ExtensionCount(acc * space / budget, False, budget, acc, pred)
