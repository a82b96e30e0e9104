"""Integral relaxation of the spill and octahedral elimination.

The spill S is first written as the boundary of an integer triangle
vector (random triangles, vertex-pair corrections, then alternating
walks split into coned four-cycles).  Signed octahedra are then used to
push every triangle into G* until all weights are 0 or +-1, giving the
outer and inner matchings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

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
    is_tridivisible,
    iter_bits,
    tri_edges,
    tri_key,
)

FourCycle = Tuple[int, Tuple[int, int, int, int]]  # sign, (a, b, c, d) = ab - bc + cd - da


# ---------------------------------------------------------------- octahedra


@dataclass(frozen=True)
class Octahedron:
    """K_{2,2,2} with parts ``parts[j] = (v_j0, v_j1)``.

    Triangle f_x = {parts[j][x_j]} carries sign (-1)^(x_0 + x_1 + x_2).
    """

    parts: Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]]

    def triangle(self, x: Sequence[int]) -> Triple:
        return tri_key(*(self.parts[j][x[j]] for j in range(3)))

    def signed_triangles(self) -> List[Tuple[Triple, int]]:
        out = []
        for code in range(8):
            x = (code >> 2 & 1, code >> 1 & 1, code & 1)
            out.append((self.triangle(x), -1 if sum(x) % 2 else 1))
        return out

    def vector(self, n: int, sign: int = 1) -> TriangleVec:
        v = TriangleVec(n)
        for t, s in self.signed_triangles():
            v.add(t, sign * s)
        return v

    def edges(self) -> List[Edge]:
        out = []
        for j in range(3):
            for k in range(j + 1, 3):
                for u in self.parts[j]:
                    for w in self.parts[k]:
                        out.append(edge_key(u, w))
        return out

    @property
    def vertices(self) -> Tuple[int, ...]:
        return tuple(v for p in self.parts for v in p)


# ---------------------------------------------------------------- walks


@dataclass(frozen=True)
class SignedWalk:
    """Closed walk w_0 .. w_{2m-1}; edge w_k w_{k+1} has sign first_sign * (-1)^k."""

    vertices: Tuple[int, ...]
    first_sign: int

    @property
    def m(self) -> int:
        return len(self.vertices) // 2

    def edge_vector(self, n: int) -> IntGraph:
        out = IntGraph(n)
        w = self.vertices
        for k in range(len(w)):
            out.add((w[k], w[(k + 1) % len(w)]), self.first_sign * (-1) ** k)
        return out


def cycle_vector(n: int, cycles: Sequence[FourCycle]) -> IntGraph:
    out = IntGraph(n)
    for s, (a, b, c, d) in cycles:
        out.add((a, b), s)
        out.add((b, c), -s)
        out.add((c, d), s)
        out.add((d, a), -s)
    return out


def extract_signed_walks(J: IntGraph) -> List[SignedWalk]:
    """Split J (zero vertex sums) into closed alternating walks, greedily.

    Start at the smallest vertex with unused elements, always move along the
    smallest available neighbour of the required sign, and close the walk on
    the first return to the start along an edge of sign opposite to the
    first edge.
    """
    if any(boundary(1, J).w.values()):
        raise ValueError("J has nonzero vertex sums")
    nb: Dict[int, Dict[int, Dict[int, int]]] = {}
    for (u, v), w in J.items():
        s = 1 if w > 0 else -1
        for x, y in ((u, v), (v, u)):
            nb.setdefault(x, {1: {}, -1: {}})[s][y] = abs(w)

    def take(x: int, y: int, s: int) -> None:
        for p, q in ((x, y), (y, x)):
            d = nb[p][s]
            d[q] -= 1
            if not d[q]:
                del d[q]

    walks = []
    while True:
        starts = [v for v in sorted(nb) if nb[v][1] or nb[v][-1]]
        if not starts:
            break
        v0 = starts[0]
        sigma = 1 if nb[v0][1] else -1
        seq = [v0]
        cur, s = v0, sigma
        while True:
            nxt = min(nb[cur][s])
            take(cur, nxt, s)
            if nxt == v0 and s == -sigma:
                break
            seq.append(nxt)
            cur, s = nxt, -s
        walks.append(SignedWalk(tuple(seq), sigma))
    return walks


def _cycle_ok(c: Tuple[int, int, int, int]) -> bool:
    return len(set(c)) == 4


def _is_zero_cycle(c: Tuple[int, int, int, int]) -> bool:
    a, b, cc, d = c
    return (a == cc or b == d) and a != b and b != cc and cc != d and d != a


def _ladder_chain(walk: SignedWalk) -> Optional[List[FourCycle]]:
    """Chain of m - 1 four-cycles from the ladder identity, with the
    replacement for positions where the two sides meet; None if the
    replacement's preconditions fail."""
    w, sigma, m = walk.vertices, walk.first_sign, walk.m
    y = [None] + [w[i] for i in range(1, m + 1)]
    x = [None, w[0]] + [w[2 * m + 1 - i] for i in range(2, m + 1)]
    cyc: Dict[int, Tuple[int, int, int, int]] = {i: (x[i], x[i + 1], y[i + 1], y[i]) for i in range(1, m)}
    sign = {i: sigma * (-1) ** i for i in range(1, m)}
    out: List[FourCycle] = []
    replaced: Set[int] = set()
    for i in range(1, m + 1):
        if x[i] != y[i]:
            continue
        if not (1 < i < m and x[i - 1] != y[i - 1] and x[i + 1] != y[i + 1] and x[i + 1] != y[i - 1]):
            return None
        cyc[i - 1] = (x[i - 1], x[i], x[i + 1], y[i - 1])
        cyc[i] = (x[i + 1], y[i - 1], y[i], y[i + 1])
        replaced |= {i - 1, i}
    for i in range(1, m):
        c = cyc[i]
        if _cycle_ok(c):
            out.append((sign[i], c))
        elif not _is_zero_cycle(c):
            return None
    return out


def _peel_chords(walk: SignedWalk) -> List[FourCycle]:
    """Fallback: repeatedly cut off three consecutive edges with a chord."""
    w = list(walk.vertices)
    sigma = walk.first_sign
    out: List[FourCycle] = []
    while len(w) > 4:
        L = len(w)
        j = next((j for j in range(L) if w[j] != w[(j + 3) % L]), None)
        if j is None:
            return out  # period-3 walk: its edge vector is zero
        s = sigma * (-1) ** j
        c = (w[j], w[(j + 1) % L], w[(j + 2) % L], w[(j + 3) % L])
        if _cycle_ok(c):
            out.append((s, c))
        # drop w_{j+1}, w_{j+2}; the chord w_j w_{j+3} keeps sign s
        drop = {(j + 1) % L, (j + 2) % L}
        w = [w[k] for k in range(L) if k not in drop]
        start = j - sum(1 for k in drop if k < j)
        w = w[start:] + w[:start]
        sigma = s
    c = (w[0], w[1], w[2], w[3])
    if _cycle_ok(c):
        out.append((sigma, c))
    return out


def walk_to_four_cycles(walk: SignedWalk) -> List[FourCycle]:
    """Signed four-cycles in K_n whose signed sum is the walk's edge vector."""
    if len(walk.vertices) < 4 or len(walk.vertices) % 2:
        raise ValueError("walk must be closed with even length >= 4")
    chain = _ladder_chain(walk)
    return chain if chain is not None else _peel_chords(walk)


# ---------------------------------------------------------------- relaxation


@dataclass
class Relaxation:
    phi: TriangleVec
    phi0: TriangleVec
    phi1: TriangleVec
    phi2: TriangleVec
    walks: List[SignedWalk]
    cycles: List[FourCycle]


def relax(S: IntGraph, rng: random.Random) -> Relaxation:
    n = S.n
    if not is_tridivisible(S):
        raise ValueError("S is not tridivisible")
    if S.is_zero():
        z = TriangleVec(n)
        return Relaxation(z, z.copy(), z.copy(), z.copy(), [], [])
    if n < 5:
        raise ValueError("need at least 5 vertices")
    # step 0: |S|/3 random triangles fix the total weight
    k = S.total() // 3
    phi0 = TriangleVec(n)
    for _ in range(abs(k)):
        phi0.add(rng.sample(range(n), 3), 1 if k > 0 else -1)
    J0 = S - boundary(2, phi0)
    # step 1: pair surplus and deficit vertices through random edges ab
    Jstar = boundary(1, J0)
    plus = [x for (x,), w in sorted(Jstar.items()) if w > 0 for _ in range(w // 2)]
    minus = [x for (x,), w in sorted(Jstar.items()) if w < 0 for _ in range(-w // 2)]
    phi1 = TriangleVec(n)
    for xp, xm in zip(plus, minus):
        while True:
            a, b = rng.sample(range(n), 2)
            if a not in (xp, xm) and b not in (xp, xm):
                break
        phi1.add((xp, a, b), 1)
        phi1.add((xm, a, b), -1)
    J1 = J0 - boundary(2, phi1)
    # step 2: alternating walks -> four-cycles -> cones from random apexes
    walks = extract_signed_walks(J1)
    cycles = [c for w in walks for c in walk_to_four_cycles(w)]
    phi2 = TriangleVec(n)
    for s, (a, b, c, d) in cycles:
        while True:
            x = rng.randrange(n)
            if x not in (a, b, c, d):
                break
        phi2.add((x, a, b), s)
        phi2.add((x, b, c), -s)
        phi2.add((x, c, d), s)
        phi2.add((x, d, a), -s)
    phi = phi0 + phi1 + phi2
    return Relaxation(phi, phi0, phi1, phi2, walks, cycles)


def integral_relaxation(S: IntGraph, n: int, rng: random.Random) -> TriangleVec:
    """Integer triangle vector Phi on K_n with boundary exactly S."""
    if S.n != n:
        raise ValueError("S lives on a different vertex set")
    phi = relax(S, rng).phi
    if boundary(2, phi) != S:
        raise AssertionError("relaxation boundary mismatch")
    return phi


# ---------------------------------------------------------------- elimination


@dataclass
class HoleResult:
    Mo: List[Triple]
    Mi: List[Triple]
    psi: TriangleVec
    gamma: Graph  # new edges of the first phase
    gamma_prime: Graph  # new edges of the second phase
    phase1_steps: int = 0
    phase2_steps: int = 0
    samples: int = 0
    attempts: int = 1


def _pick(rng: random.Random, bits: int) -> int:
    return rng.choice(list(iter_bits(bits)))


class _EdgePool:
    """Bitset view of the G* edges still free for new configuration edges."""

    def __init__(self, gstar: Graph, blocked: Set[Edge]):
        self.adj = list(gstar.adj)
        for u, v in blocked:
            self.block(u, v)

    def block(self, u: int, v: int) -> None:
        self.adj[u] &= ~(1 << v)
        self.adj[v] &= ~(1 << u)

    def ok(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)


def octahedral_eliminate_hole(
    phi: TriangleVec,
    gstar: Graph,
    rng: random.Random,
    budget: int = 10_000,
) -> HoleResult:
    """Replace Phi by Psi with the same boundary, weights in {0, +-1},
    support in K_3(G*); return Mo = Psi^+ and Mi = Psi^-."""
    n = phi.n
    S = boundary(2, phi)
    old = set(boundary(2, phi.positive()).keys())
    pool = _EdgePool(gstar, old)
    work = phi.copy()
    gamma, gamma2 = Graph(n), Graph(n)
    samples = 0

    # phase I: every original signed element f gets its own octahedron
    elements = phi.signed_elements()
    for step, (f, s) in enumerate(elements):
        a, b, c = f
        fset = {a, b, c}
        A = pool.adj[b] & pool.adj[c]
        B = pool.adj[a] & pool.adj[c]
        C = pool.adj[a] & pool.adj[b]
        for v in fset:
            A &= ~(1 << v)
            B &= ~(1 << v)
            C &= ~(1 << v)
        found = None
        if A and B and C:
            for _ in range(budget):
                samples += 1
                a2, b2, c2 = _pick(rng, A), _pick(rng, B), _pick(rng, C)
                if len({a2, b2, c2}) == 3 and pool.ok(a2, b2) and pool.ok(a2, c2) and pool.ok(b2, c2):
                    found = (a2, b2, c2)
                    break
        if found is None:
            raise StageAbort("hole", "no octahedral configuration", {"phase": 1, "step": step, "triangle": f})
        a2, b2, c2 = found
        om = Octahedron(((a, a2), (b, b2), (c, c2)))
        ov = om.vector(n)
        if not boundary(2, ov).is_zero():
            raise AssertionError("octahedron boundary is not zero")
        work = work - ov.scale(s)
        for u, v in ((a2, b), (a2, c), (b2, a), (b2, c), (c2, a), (c2, b), (a2, b2), (a2, c2), (b2, c2)):
            pool.block(u, v)
            gamma.add_edge(u, v)

    for t, w in work.items():
        if sum(e in old for e in tri_edges(t)) > 1:
            raise AssertionError(f"{t} contains two original boundary edges")

    # phase II: pair opposite-sign triangles through each original edge
    minus = boundary(2, phi.negative())
    on_edge: Dict[Edge, Dict[int, List[Triple]]] = {}
    for t in sorted(work.keys()):
        w = work[t]
        for e in tri_edges(t):
            if e in old:
                on_edge.setdefault(e, {1: [], -1: []})[1 if w > 0 else -1].extend([t] * abs(w))
    pairs: List[Tuple[Edge, Triple, Triple]] = []
    for e in sorted(minus.keys()):
        need = minus[e]
        lists = on_edge.get(e, {1: [], -1: []})
        if len(lists[-1]) < need or len(lists[1]) < need:
            raise AssertionError(f"edge {e} lacks triangles to pair")
        for k in range(need):
            pairs.append((e, lists[1][k], lists[-1][k]))

    for step, (e, fp, fn) in enumerate(pairs):
        a, b = e
        c1 = next(v for v in fp if v not in e)
        c2 = next(v for v in fn if v not in e)
        fixed = {a, b, c1, c2}
        A = pool.adj[b] & pool.adj[c1] & pool.adj[c2]
        B = pool.adj[a] & pool.adj[c1] & pool.adj[c2]
        for v in fixed:
            A &= ~(1 << v)
            B &= ~(1 << v)
        found = None
        if A and B:
            for _ in range(budget):
                samples += 1
                a2, b2 = _pick(rng, A), _pick(rng, B)
                if a2 != b2 and pool.ok(a2, b2):
                    found = (a2, b2)
                    break
        if found is None:
            raise StageAbort("hole", "no pairing configuration", {"phase": 2, "step": step, "edge": e})
        a2, b2 = found
        om = Octahedron(((a, a2), (b, b2), (c1, c2)))
        work = work - om.vector(n)
        for u, v in ((a2, b), (a2, c1), (a2, c2), (b2, a), (b2, c1), (b2, c2), (a2, b2)):
            pool.block(u, v)
            gamma2.add_edge(u, v)

    psi = work
    if boundary(2, psi) != S:
        raise AssertionError("boundary not conserved")
    if any(abs(w) != 1 for _, w in psi.items()):
        raise AssertionError("Psi has weights outside {0, +-1}")
    for t in psi.keys():
        if not all(gstar.has_edge(*e) for e in tri_edges(t)):
            raise AssertionError(f"{t} is not a triangle of G*")
    new = IntGraph.from_graph(gamma) + IntGraph.from_graph(gamma2)
    if boundary(2, psi.negative()) != new or boundary(2, psi.positive()) != S + new:
        raise AssertionError("new-edge bookkeeping mismatch")
    Mo = sorted(psi.positive().keys())
    Mi = sorted(psi.negative().keys())
    return HoleResult(Mo, Mi, psi, gamma, gamma2, len(elements), len(pairs), samples)


def hole_stage(S: Graph, gstar: Graph, seed: int, budget: int = 10_000, max_retries: int = 20) -> HoleResult:
    """Relaxation plus elimination, restarted with derived seeds on abort."""
    Svec = IntGraph.from_graph(S)
    last: Optional[StageAbort] = None
    for attempt in range(max_retries):
        rng = random.Random(derive_seed(seed, "hole", attempt))
        phi = integral_relaxation(Svec, S.n, rng)
        try:
            res = octahedral_eliminate_hole(phi, gstar, rng, budget)
        except StageAbort as exc:
            last = exc
            continue
        res.attempts = attempt + 1
        return res
    raise StageAbort("hole", f"all {max_retries} attempts aborted", {"last": str(last), **(last.context if last else {})})
