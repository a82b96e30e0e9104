"""Octahedral triangles, the completion-side elimination and shuffles.

A triangle z is octahedral when its labels have nonzero sum and the six
points z_i, z_j + z_k span a K_{2,2,2} inside G*.  A shuffle is the
complete tripartite graph on three cosets t_i + span(x); it has one
triangle decomposition inside the template and a translated one that
contains a chosen octahedral triangle, which lets us swap that triangle
into the final decomposition.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from . import gf2lin
from .graphcore import (
    Edge,
    Graph,
    IntGraph,
    StageAbort,
    Triple,
    TriangleVec,
    boundary,
    derive_seed,
    edge_key,
    matching_edges,
    max_degree_ratio,
    tri_edges,
    tri_key,
)
from .hole import Octahedron, _EdgePool, _pick
from .template import Template


# ---------------------------------------------------------------- octahedral triangles


def octahedron_labels(zl: Sequence[int]) -> Tuple[Tuple[int, int], ...]:
    z1, z2, z3 = zl
    return ((z1, z2 ^ z3), (z2, z1 ^ z3), (z3, z1 ^ z2))


def is_octahedral(z: Sequence[int], tpl: Template, graph: Optional[Graph] = None) -> Optional[Octahedron]:
    """The associated octahedron of z (parts {z_i, z_j + z_k}) if it lies in ``graph``.

    ``graph`` defaults to G*, since the octahedron ends up inside a shuffle.
    """
    g = tpl.gstar if graph is None else graph
    zl = [tpl.pi[v] for v in z]
    if zl[0] ^ zl[1] ^ zl[2] == 0:
        return None
    parts = []
    for p, q in octahedron_labels(zl):
        vp, vq = tpl.vertex_of(p), tpl.vertex_of(q)
        if vp < 0 or vq < 0:
            return None
        parts.append((vp, vq))
    oc = Octahedron(tuple(parts))  # type: ignore[arg-type]
    if all(g.has_edge(u, v) for u, v in oc.edges()):
        return oc
    return None


@dataclass
class LinearBoundedness:
    bounded: bool
    max_degree_ratio: float
    max_line_edges: int
    line_cap: float

    @property
    def ok(self) -> bool:
        return self.bounded and self.max_line_edges < self.line_cap


def linear_boundedness(J: Graph, c: float, tpl: Template) -> LinearBoundedness:
    """c-boundedness plus fewer than c 2^a edges on every line.

    The line of an edge uv is its label difference pi(u) + pi(v).
    """
    lines = Counter(tpl.pi[u] ^ tpl.pi[v] for u, v in J.edges())
    ratio = max_degree_ratio(J)
    return LinearBoundedness(ratio < c, ratio, max(lines.values(), default=0), c * 2**tpl.a)


@dataclass
class PlaneReport:
    max_per_plane: int
    cap: float

    @property
    def ok(self) -> bool:
        return self.max_per_plane <= self.cap


def basic_plane_counts(triangles: Iterable[Triple], tpl: Template) -> Counter:
    """Count triangles per basic plane b.z = v for the 7 nonzero b in F_2^3."""
    counts: Counter = Counter()
    for t in triangles:
        zl = [tpl.pi[v] for v in t]
        for b in range(1, 8):
            v = 0
            for i in range(3):
                if b >> i & 1:
                    v ^= zl[i]
            counts[(b, v)] += 1
    return counts


# ---------------------------------------------------------------- elimination


@dataclass
class CompletionResult:
    M1: List[Triple]
    M2: List[Triple]
    octahedra: Dict[Triple, Octahedron]
    delta: Graph
    gamma: Graph
    gamma_prime: Graph
    psi: TriangleVec
    phase1_steps: int = 0
    phase2_steps: int = 0
    samples: int = 0
    far_and_leave: int = 0
    attempts: int = 1
    p2: Optional[LinearBoundedness] = None
    p3: Optional[PlaneReport] = None


class _Reservations:
    """Edges already committed: configuration edges W and reserved octahedra."""

    def __init__(self, n: int):
        self.W = Graph(n)
        self.delta = Graph(n)

    def octahedra_fit(self, octs: Sequence[Tuple[Triple, Octahedron]], new_edges: Set[Edge]) -> bool:
        seen: Set[Edge] = set()
        for t, oc in octs:
            own = set(tri_edges(t))
            es = oc.edges()
            for e in es:
                if e in seen:
                    return False
                if e in own:
                    continue
                if e in new_edges or self.W.has_edge(*e) or self.delta.has_edge(*e):
                    return False
            seen.update(es)
        return True


def _x_of(code: int) -> Tuple[int, int, int]:
    return (code >> 2 & 1, code >> 1 & 1, code & 1)


def eliminate_for_completion(
    Mc: Sequence[Triple],
    Mi: Sequence[Triple],
    Mo: Sequence[Triple],
    L: Graph,
    tpl: Template,
    rng: random.Random,
    budget: int = 10_000,
    c4: Optional[float] = None,
) -> CompletionResult:
    """Turn Phi = Mc + Mi - Mo (boundary L) into Psi = M1 - M2 with
    (L, union M2) partitioning union M1 and every M2 triangle octahedral
    with pairwise edge-disjoint octahedra."""
    n = tpl.n
    gstar = tpl.gstar
    phi = TriangleVec.from_triangles(n, Mc) + TriangleVec.from_triangles(n, Mi)
    phi = phi - TriangleVec.from_triangles(n, Mo)
    Lvec = IntGraph.from_graph(L)
    if boundary(2, phi) != Lvec:
        raise AssertionError("boundary of Mc + Mi - Mo is not L")
    old = set(boundary(2, phi.positive()).keys()) | set(boundary(2, phi.negative()).keys())
    pool = _EdgePool(gstar, old)
    res = _Reservations(n)
    octa: Dict[Triple, Octahedron] = {}
    work = phi.copy()
    samples = 0

    gamma, gamma_prime = Graph(n), Graph(n)

    def commit(om: Octahedron, sign: int, new_edges: Set[Edge], negs, phase_graph: Graph) -> None:
        nonlocal work
        ov = om.vector(n)
        if not boundary(2, ov).is_zero():
            raise AssertionError("octahedron boundary is not zero")
        work = work - ov.scale(sign)
        for u, v in new_edges:
            pool.block(u, v)
            res.W.add_edge(u, v)
            phase_graph.add_edge(u, v)
        for t, oc in negs:
            octa[t] = oc
            for u, v in oc.edges():
                pool.block(u, v)
                res.delta.add_edge(u, v)

    # phase I
    elements = phi.signed_elements()
    for step, (f, s) in enumerate(elements):
        a, b, c = f
        A = pool.adj[b] & pool.adj[c]
        B = pool.adj[a] & pool.adj[c]
        C = pool.adj[a] & pool.adj[b]
        for v in f:
            A &= ~(1 << v)
            B &= ~(1 << v)
            C &= ~(1 << v)
        done = False
        if A and B and C:
            for _ in range(budget):
                samples += 1
                a2, b2, c2 = _pick(rng, A), _pick(rng, B), _pick(rng, C)
                if len({a2, b2, c2}) < 3 or not (pool.ok(a2, b2) and pool.ok(a2, c2) and pool.ok(b2, c2)):
                    continue
                om = Octahedron(((a, a2), (b, b2), (c, c2)))
                if any(tpl.is_template_triangle(om.triangle(_x_of(k))) for k in range(1, 8)):
                    continue
                far = [_x_of(k) for k in range(1, 8) if sum(_x_of(k)) >= 2]
                octs = []
                for x in far:
                    t = om.triangle(x)
                    oc = is_octahedral(t, tpl)
                    if oc is None:
                        break
                    octs.append((x, t, oc))
                else:
                    # weight of f_x after subtracting s * Omega is -s (-1)^|x|
                    negs = [(t, oc) for x, t, oc in octs if -s * (-1) ** sum(x) < 0]
                    new = {edge_key(u, v) for u, v in (
                        (a2, b), (a2, c), (b2, a), (b2, c), (c2, a), (c2, b), (a2, b2), (a2, c2), (b2, c2))}
                    if res.octahedra_fit(negs, new):
                        commit(om, s, new, negs, gamma)
                        done = True
                        break
        if not done:
            raise StageAbort("completion", "no valid configuration", {"phase": 1, "step": step, "triangle": f})

    for t in work.keys():
        k_old = sum(e in old for e in tri_edges(t))
        k_new = sum(res.W.has_edge(*e) for e in tri_edges(t))
        if (k_old, k_new) not in ((0, 3), (1, 2)):
            raise AssertionError(f"unexpected triangle {t} after phase I")

    # phase II: pair the non-far triangles on original edges outside L
    on_edge: Dict[Edge, Dict[int, List[Triple]]] = {}
    far_and_leave = 0
    for t in sorted(work.keys()):
        w = work[t]
        es = [e for e in tri_edges(t) if e in old]
        if not es:
            far_and_leave += any(L.has_edge(*e) for e in tri_edges(t))
            continue
        e = es[0]
        if L.has_edge(*e):
            continue
        on_edge.setdefault(e, {1: [], -1: []})[1 if w > 0 else -1].extend([t] * abs(w))
    pairs = []
    for e in sorted(on_edge):
        pos, neg = on_edge[e][1], on_edge[e][-1]
        if len(pos) != len(neg):
            raise AssertionError(f"unbalanced signs on edge {e}")
        pairs.extend((e, fp, fn) for fp, fn in zip(pos, neg))

    for step, (e, fp, fn) in enumerate(pairs):
        a, b = e
        c1 = next(v for v in fp if v not in e)
        c2 = next(v for v in fn if v not in e)
        A = pool.adj[b] & pool.adj[c1] & pool.adj[c2]
        B = pool.adj[a] & pool.adj[c1] & pool.adj[c2]
        for v in (a, b, c1, c2):
            A &= ~(1 << v)
            B &= ~(1 << v)
        done = False
        if A and B:
            for _ in range(budget):
                samples += 1
                a2, b2 = _pick(rng, A), _pick(rng, B)
                if a2 == b2 or not pool.ok(a2, b2):
                    continue
                om = Octahedron(((a, a2), (b, b2), (c1, c2)))
                others = [_x_of(k) for k in range(2, 8)]
                octs = []
                for x in others:
                    t = om.triangle(x)
                    oc = is_octahedral(t, tpl)
                    if oc is None:
                        break
                    octs.append((x, t, oc))
                else:
                    negs = [(t, oc) for x, t, oc in octs if -((-1) ** sum(x)) < 0]
                    new = {edge_key(u, v) for u, v in (
                        (a2, b), (a2, c1), (a2, c2), (b2, a), (b2, c1), (b2, c2), (a2, b2))}
                    if res.octahedra_fit(negs, new):
                        commit(om, 1, new, negs, gamma_prime)
                        done = True
                        break
        if not done:
            raise StageAbort("completion", "no valid pairing configuration", {"phase": 2, "step": step, "edge": e})

    psi = work
    if boundary(2, psi) != Lvec:
        raise AssertionError("boundary not conserved")
    if any(abs(w) != 1 for _, w in psi.items()):
        raise AssertionError("Psi has weights outside {0, +-1}")
    M1 = sorted(psi.positive().keys())
    M2 = sorted(psi.negative().keys())
    if matching_edges(M2) != res.W.edge_set():
        raise AssertionError("union of M2 differs from the new edges")
    if matching_edges(M1) != res.W.edge_set() | L.edge_set():
        raise AssertionError("union of M1 differs from L plus the new edges")
    if set(M2) != set(octa):
        raise AssertionError("reserved octahedra do not match M2")
    check_p1(M2, octa, tpl)
    out = CompletionResult(
        M1, M2, octa, res.delta, gamma, gamma_prime, psi,
        phase1_steps=len(elements), phase2_steps=len(pairs), samples=samples, far_and_leave=far_and_leave,
    )
    if c4 is not None:
        out.p2 = linear_boundedness(res.delta, c4, tpl)
        planes = basic_plane_counts(M2, tpl)
        out.p3 = PlaneReport(max(planes.values(), default=0), c4 * 2**tpl.a)
    return out


def check_p1(M2: Sequence[Triple], octa: Dict[Triple, Octahedron], tpl: Template) -> None:
    """Every M2 triangle octahedral, with pairwise edge-disjoint octahedra."""
    seen: Set[Edge] = set()
    for t in M2:
        oc = octa[t]
        if is_octahedral(t, tpl) is None or set(tri_edges(t)) - set(oc.edges()):
            raise AssertionError(f"{t} is not octahedral")
        es = set(oc.edges())
        if es & seen:
            raise AssertionError("associated octahedra overlap")
        seen |= es


def completion_stage(
    Mc: Sequence[Triple],
    Mi: Sequence[Triple],
    Mo: Sequence[Triple],
    L: Graph,
    tpl: Template,
    seed: int,
    budget: int = 10_000,
    max_retries: int = 20,
    c4: Optional[float] = None,
) -> CompletionResult:
    last: Optional[StageAbort] = None
    for attempt in range(max_retries):
        rng = random.Random(derive_seed(seed, "completion", attempt))
        try:
            out = eliminate_for_completion(Mc, Mi, Mo, L, tpl, rng, budget, c4)
        except StageAbort as exc:
            last = exc
            continue
        out.attempts = attempt + 1
        return out
    raise StageAbort("completion", f"all {max_retries} attempts aborted", dict(last.context) if last else {})


# ---------------------------------------------------------------- shuffles


@dataclass(frozen=True)
class Shuffle:
    z: Tuple[int, int, int]  # target triangle, z[i] sits in part i
    x: Tuple[int, int, int]
    t: Tuple[int, int]
    part_labels: Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]
    parts: Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]

    @property
    def t3(self) -> int:
        return self.t[0] ^ self.t[1]

    def edges(self) -> List[Edge]:
        out = []
        for i in range(3):
            for j in range(i + 1, 3):
                out.extend(edge_key(u, v) for u in self.parts[i] for v in self.parts[j])
        return out

    def graph(self, n: int) -> Graph:
        return Graph(n, self.edges())


def shuffle_for(tpl: Template, zl: Sequence[int], t1: int, t2: int) -> Optional[Shuffle]:
    """The xt-shuffle with x_i = z_i + t_i if it is a valid shuffle inside G*."""
    ts = (t1, t2, t1 ^ t2)
    x = tuple(zl[i] ^ ts[i] for i in range(3))
    if not gf2lin.is_independent([x[0], x[1], x[2], t1, t2]):
        return None
    sp = gf2lin.span(x)
    labels = tuple(tuple(ts[i] ^ y for y in sp) for i in range(3))
    parts = []
    masks = []
    for lab in labels:
        vs = tuple(tpl.vertex_of(v) for v in lab)
        if min(vs) < 0:
            return None
        parts.append(vs)
        m = 0
        for v in vs:
            m |= 1 << v
        masks.append(m)
    adj = tpl.gstar.adj
    for i in range(3):
        other = masks[(i + 1) % 3] | masks[(i + 2) % 3]
        if any(adj[u] & other != other for u in parts[i]):
            return None
    z = tuple(tpl.vertex_of(v) for v in zl)
    return Shuffle(z, x, (t1, t2), labels, tuple(parts))  # type: ignore[arg-type]


def find_shuffle(
    z: Sequence[int],
    tpl: Template,
    used: Graph,
    delta: Graph,
    budget: int = 10_000,
    rng: Optional[random.Random] = None,
) -> Tuple[Shuffle, int]:
    """Sample t uniformly until the shuffle through z lies in G* and its edges
    outside the associated octahedron avoid ``used`` and ``delta``.

    Returns the shuffle and the number of candidates drawn.
    """
    oc = is_octahedral(z, tpl)
    if oc is None:
        raise ValueError(f"{tuple(z)} is not octahedral")
    own = set(oc.edges())
    rng = rng or random.Random(0)
    zl = [tpl.pi[v] for v in z]
    q = 1 << tpl.a
    for k in range(1, budget + 1):
        sh = shuffle_for(tpl, zl, rng.randrange(q), rng.randrange(q))
        if sh is None:
            continue
        if all(e in own or not (used.has_edge(*e) or delta.has_edge(*e)) for e in sh.edges()):
            return sh, k
    raise StageAbort("shuffle", f"no shuffle for {tuple(z)} within {budget} samples", {"z": list(z)})


def shuffle_decompositions(sh: Shuffle, tpl: Template) -> Tuple[List[Triple], List[Triple]]:
    """(M3xt, M4xt): zero-sum triples across the parts, and their translate by x."""
    shift = sh.x[0] ^ sh.x[1] ^ sh.x[2]
    third = set(sh.part_labels[2])
    m3, m4 = [], []
    for y1 in sh.part_labels[0]:
        for y2 in sh.part_labels[1]:
            for off, out in ((0, m3), (shift, m4)):
                y3 = y1 ^ y2 ^ off
                if y3 not in third:
                    raise AssertionError("shuffle part structure broken")
                out.append(tri_key(tpl.vertex_of(y1), tpl.vertex_of(y2), tpl.vertex_of(y3)))
    return m3, m4


@dataclass
class ShuffleResult:
    M3: List[Triple]
    M4: List[Triple]
    shuffles: List[Shuffle] = field(default_factory=list)
    samples: List[int] = field(default_factory=list)
    attempts: int = 1


def run_shuffle_algorithm(
    M2: Sequence[Triple],
    tpl: Template,
    octahedra: Dict[Triple, Octahedron],
    rng: random.Random,
    budget: int = 10_000,
) -> ShuffleResult:
    """One edge-disjoint shuffle per triangle of M2, chosen greedily."""
    check_p1(M2, octahedra, tpl)
    n = tpl.n
    delta = Graph(n)
    for t in M2:
        for u, v in octahedra[t].edges():
            delta.add_edge(u, v)
    used = Graph(n)
    M3: List[Triple] = []
    M4: List[Triple] = []
    out = ShuffleResult(M3, M4)
    for z in M2:
        sh, k = find_shuffle(z, tpl, used, delta, budget, rng)
        for u, v in sh.edges():
            used.add_edge(u, v)
        m3, m4 = shuffle_decompositions(sh, tpl)
        M3.extend(m3)
        M4.extend(m4)
        out.shuffles.append(sh)
        out.samples.append(k)
    e3, e4 = matching_edges(M3), matching_edges(M4)
    if e3 != e4:
        raise AssertionError("shuffle decompositions cover different edges")
    if not set(M3) <= tpl.T:
        raise AssertionError("M3 leaves the template")
    if not set(M2) <= set(M4):
        raise AssertionError("M2 is not contained in M4")
    return out


def shuffle_stage(
    M2: Sequence[Triple],
    tpl: Template,
    octahedra: Dict[Triple, Octahedron],
    seed: int,
    budget: int = 10_000,
    max_retries: int = 20,
) -> ShuffleResult:
    last: Optional[StageAbort] = None
    for attempt in range(max_retries):
        rng = random.Random(derive_seed(seed, "shuffle", attempt))
        try:
            out = run_shuffle_algorithm(M2, tpl, octahedra, rng, budget)
        except StageAbort as exc:
            last = exc
            continue
        out.attempts = attempt + 1
        return out
    raise StageAbort("shuffle", f"all {max_retries} attempts aborted", dict(last.context) if last else {})


# ---------------------------------------------------------------- exclusion systems

# unknowns t1, t2, x1, x2, x3 as bits 0..4; t3 = t1 + t2
_T = (0b00001, 0b00010, 0b00011)
_X = (0b00100, 0b01000, 0b10000)


def _b_mask(b: int) -> int:
    m = 0
    for i in range(3):
        if b >> i & 1:
            m ^= _X[i]
    return m


def exclusion_system(
    zl: Sequence[int], j: int, k: int, bj: int, bk: int, vj: int, vk: int, a: int
) -> gf2lin.AffineSystem:
    """t_j + b_j.x = v_j, t_k + b_k.x = v_k, t_i + x_i = z_i (i = 1, 2, 3).

    Indices are 0-based; b is a 3-bit mask with bit i selecting x_{i+1}.
    """
    sys = gf2lin.AffineSystem(5, a)
    for i in range(3):
        sys.add_row(_T[i] ^ _X[i], zl[i])
    sys.add_row(_T[j] ^ _b_mask(bj), vj)
    sys.add_row(_T[k] ^ _b_mask(bk), vk)
    return sys


def is_octahedron_label(b: int, j: int) -> bool:
    return b in (1 << j, 7 ^ (1 << j))


def exclusion_cases(zl: Sequence[int], j: int, k: int, bj: int, bk: int, vj: int, vk: int) -> List[str]:
    """Which of the redundancy cases hold for this labelled shuffle edge."""
    z1, z2, z3 = zl
    zsum = z1 ^ z2 ^ z3
    cases = []
    for p, vp, bp in ((k, vk, bk), (j, vj, bj)):
        if bp == 1 << p and vp == zl[p]:
            cases.append("i")
        if bp == 7 ^ (1 << p) and vp == zsum ^ zl[p]:
            cases.append("ii")
    if bj ^ bk == (1 << j) ^ (1 << k) and vj ^ vk == zl[j] ^ zl[k]:
        cases.append("iii")
    i = 3 - j - k
    if bj ^ bk == 1 << i and vj ^ vk == zl[i]:
        cases.append("iv")
    return cases


@dataclass
class ExclusionAudit:
    a: int
    systems: int
    counts: Counter
    mismatches: List[Tuple[int, int, int, int, int, int]]
    brute_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.mismatches and set(self.counts) <= {0, 1, 1 << self.a}


def audit_exclusion_cases(
    zl: Sequence[int], a: int, brute_force: bool = False, values: Optional[Sequence[int]] = None
) -> ExclusionAudit:
    """Solve every exclusion system for target labels ``zl`` and compare the
    solution count with the case analysis: 2^a exactly when a case applies,
    otherwise 0 or 1.  Label pairs that are both octahedron labels are the
    octahedron's own edges and are skipped.  With ``brute_force`` every
    count is also recomputed by enumeration."""
    if not gf2lin.is_independent(list(zl)) or max(zl) >> a:
        raise ValueError("target labels must be independent elements of F_2^a")
    vals = list(range(1 << a)) if values is None else list(values)
    counts: Counter = Counter()
    bad = []
    brute = 0
    for j, k in ((0, 1), (0, 2), (1, 2)):
        for bj in range(1, 8):
            for bk in range(1, 8):
                if is_octahedron_label(bj, j) and is_octahedron_label(bk, k):
                    continue
                for vj in vals:
                    for vk in vals:
                        sys = exclusion_system(zl, j, k, bj, bk, vj, vk, a)
                        cnt = gf2lin.solve_affine_system(sys).count
                        counts[cnt] += 1
                        predicted_full = bool(exclusion_cases(zl, j, k, bj, bk, vj, vk))
                        if (cnt == 1 << a) != predicted_full or cnt not in (0, 1, 1 << a):
                            bad.append((j, k, bj, bk, vj, vk))
                        if brute_force:
                            brute += 1
                            if gf2lin.brute_force_count(sys) != cnt:
                                bad.append((j, k, bj, bk, vj, vk))
    return ExclusionAudit(a, sum(counts.values()), counts, bad, brute)
