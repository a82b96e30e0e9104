"""Random greedy processes: triangle removal (the nibble) and the leave cover."""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .graphcore import (
    Edge,
    Graph,
    StageAbort,
    Triple,
    density,
    derive_seed,
    edge_key,
    is_bounded,
    iter_bits,
    tri_key,
    typicality_deviation,
)

MAXDEG_REFRESH = 1024


@dataclass
class Checkpoint:
    target_p: float
    step: int
    edges: int
    p: float
    Q: int
    degrees: List[int]
    sampled_te: List[Tuple[Edge, int]]


@dataclass
class Trajectory:
    n: int
    initial_edges: int
    initial_degrees: List[int]
    edges: List[int] = field(default_factory=list)  # index i: edges left after step i
    Q: List[int] = field(default_factory=list)  # index i: triangles left after step i
    choices: List[int] = field(default_factory=list)  # index i-1: triangles available at step i
    checkpoints: List[Checkpoint] = field(default_factory=list)
    aborted: bool = False

    @property
    def steps(self) -> int:
        return len(self.choices)

    @property
    def density(self) -> float:
        return self.initial_edges / (self.n * (self.n - 1) / 2)

    def p(self, i: int) -> float:
        return self.edges[i] / self.initial_edges

    @property
    def log_choice_sum(self) -> float:
        return math.fsum(math.log(c) for c in self.choices)

    def write_csv(self, path: str) -> None:
        marks = {c.step for c in self.checkpoints}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "edges", "p", "Q", "choices", "checkpoint"])
            for i in range(len(self.edges)):
                ch = self.choices[i - 1] if i else ""
                w.writerow([i, self.edges[i], repr(self.p(i)), self.Q[i], ch, int(i in marks)])


@dataclass
class RemovalResult:
    N: List[Triple]
    leave: Graph
    trajectory: Trajectory

    @property
    def aborted(self) -> bool:
        return self.trajectory.aborted


def count_triangles(g: Graph) -> int:
    adj = g.adj
    return sum((adj[u] & adj[v]).bit_count() for u, v in g.edges()) // 3


def run_triangle_removal(
    g: Graph,
    stop_edges: int,
    rng: random.Random,
    checkpoints: Sequence[float] = (),
    track_edges: int = 64,
    stop_max_degree: Optional[float] = None,
) -> RemovalResult:
    """Repeatedly delete a uniformly random triangle until ``stop_edges`` remain.

    A triangle is drawn uniformly by picking a random edge, accepting it with
    probability T_e / B for an upper bound B on all codegrees (the maximum
    degree, refreshed periodically), and then a uniform common neighbour.
    If ``stop_max_degree`` is given the run also stops as soon as every
    vertex of the remaining graph has degree below it.
    """
    m0 = g.num_edges()
    if stop_edges > m0 or (m0 - stop_edges) % 3:
        raise ValueError(f"stop_edges must be <= {m0} and congruent to it mod 3")
    n = g.n
    aux = random.Random(rng.getrandbits(64))  # checkpoint sampling stream
    adj = list(g.adj)
    deg = g.degrees()
    edges: List[Edge] = list(g.edges())
    pos: Dict[Edge, int] = {e: i for i, e in enumerate(edges)}
    Q = count_triangles(g)
    traj = Trajectory(n, m0, list(deg), [m0], [Q], [])
    targets = sorted(checkpoints, reverse=True)
    N: List[Triple] = []

    heavy = 0
    if stop_max_degree is not None:
        heavy = sum(d >= stop_max_degree for d in deg)

    def snapshot(target: float) -> None:
        k = min(track_edges, len(edges))
        sample = aux.sample(edges, k) if k else []
        te = [(e, (adj[e[0]] & adj[e[1]]).bit_count()) for e in sample]
        traj.checkpoints.append(
            Checkpoint(target, len(N), len(edges), len(edges) / m0 if m0 else 0.0, Q, list(deg), te)
        )

    while targets and targets[0] >= 1.0:
        snapshot(targets.pop(0))

    def drop(u: int, v: int) -> None:
        nonlocal heavy
        e = (u, v) if u < v else (v, u)
        i = pos.pop(e)
        last = edges.pop()
        if i < len(edges):
            edges[i] = last
            pos[last] = i
        adj[u] &= ~(1 << v)
        adj[v] &= ~(1 << u)
        for x in (u, v):
            if stop_max_degree is not None and deg[x] >= stop_max_degree > deg[x] - 1:
                heavy -= 1
            deg[x] -= 1

    bound = max(deg, default=0)
    while len(edges) > stop_edges:
        if stop_max_degree is not None and heavy == 0:
            break
        if Q == 0:
            traj.aborted = True
            break
        if len(N) % MAXDEG_REFRESH == 0:
            bound = max(deg)
        while True:
            u, v = edges[rng.randrange(len(edges))]
            common = adj[u] & adj[v]
            te = common.bit_count()
            if te and rng.random() * bound < te:
                break
        if te * 8 >= n:
            while True:
                w = rng.randrange(n)
                if common >> w & 1:
                    break
        else:
            w = rng.choice(list(iter_bits(common)))
        t_uw = (adj[u] & adj[w]).bit_count()
        t_vw = (adj[v] & adj[w]).bit_count()
        traj.choices.append(Q)
        Q -= te + t_uw + t_vw - 2
        drop(u, v)
        drop(u, w)
        drop(v, w)
        N.append(tri_key(u, v, w))
        traj.edges.append(len(edges))
        traj.Q.append(Q)
        while targets and len(edges) <= targets[0] * m0:
            snapshot(targets.pop(0))

    leave = Graph(n)
    leave.adj = adj
    return RemovalResult(N, leave, traj)


# ---------------------------------------------------------------- envelopes


@dataclass
class CheckpointEnvelope:
    target_p: float
    p: float
    step: int
    q_observed: int
    q_predicted: float
    e_q: float
    q_rel_error: float
    te_predicted: float
    e_d: float
    te_max_rel_error: float
    te_mean_rel_error: float
    e_v: float
    deg_max_rel_error: float
    deg_max_abs_error: float
    q_ok: bool
    te_ok: bool
    deg_ok: bool

    @property
    def passed(self) -> bool:
        return self.q_ok and self.te_ok and self.deg_ok

    def within(self, q_tol: float, te_tol: float, deg_tol: float) -> bool:
        """Empirical relative-error tolerances (every sampled edge, every vertex)."""
        return (
            self.q_rel_error <= q_tol
            and self.te_max_rel_error <= te_tol
            and self.deg_max_rel_error <= deg_tol
        )


@dataclass
class EnvelopeReport:
    b: float
    checkpoints: List[CheckpointEnvelope]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checkpoints)

    def within(self, q_tol: float, te_tol: float, deg_tol: float) -> bool:
        return all(c.within(q_tol, te_tol, deg_tol) for c in self.checkpoints)


def check_trajectory(traj: Trajectory, b: float) -> EnvelopeReport:
    """Evaluate the Q, codegree and degree envelopes at every checkpoint with p >= b^(1/4).

    Predictions: Q = |G| D p^3 / 3, T_e = D p^2, deg(v) = p |G(v)|, with
    D = d(G)^2 n and slacks e_q, e_d, e_v.
    """
    n, m0 = traj.n, traj.initial_edges
    d = traj.density
    D = d * d * n
    e_v = 2 * b ** (1 / 3) * d * n
    out = []
    for c in traj.checkpoints:
        p = c.p
        if p < b**0.25 or p <= 0:
            continue
        lg = 1 - 3 * math.log(p)
        e_q = 2 * lg * lg * b * m0 * D
        e_d = 2 * lg * b ** (2 / 3) * D
        q_pred = m0 * D * p**3 / 3
        te_pred = D * p * p
        te_err = [abs(t - te_pred) for _, t in c.sampled_te]
        deg_abs = [abs(dv - p * d0) for dv, d0 in zip(c.degrees, traj.initial_degrees)]
        deg_rel = [
            abs(dv / (p * d0) - 1) for dv, d0 in zip(c.degrees, traj.initial_degrees) if d0
        ]
        out.append(
            CheckpointEnvelope(
                target_p=c.target_p,
                p=p,
                step=c.step,
                q_observed=c.Q,
                q_predicted=q_pred,
                e_q=e_q,
                q_rel_error=abs(c.Q / q_pred - 1),
                te_predicted=te_pred,
                e_d=e_d,
                te_max_rel_error=max(te_err, default=0.0) / te_pred,
                te_mean_rel_error=(
                    abs(sum(t for _, t in c.sampled_te) / len(c.sampled_te) / te_pred - 1)
                    if c.sampled_te
                    else 0.0
                ),
                e_v=e_v,
                deg_max_rel_error=max(deg_rel, default=0.0),
                deg_max_abs_error=max(deg_abs, default=0.0),
                q_ok=abs(c.Q - q_pred) <= e_q,
                te_ok=all(err <= e_d for err in te_err),
                deg_ok=all(err <= e_v for err in deg_abs),
            )
        )
    return EnvelopeReport(b, out)


# ---------------------------------------------------------------- nibble


@dataclass
class NibbleResult:
    N: List[Triple]
    leave: Graph
    attempts: int
    bounded: bool
    bound: float
    typicality: Optional[float] = None
    warnings: List[str] = field(default_factory=list)


def congruent_stop(m: int, target: float) -> int:
    """The largest count <= target (and <= m) reachable from m by removing triangles."""
    t = min(m, int(target))
    return max(t - (t - m) % 3, m % 3)


def nibble_stop_edges(m: int, n: int, b: float, rule: str, exponent: float = 2 - 1e-7) -> int:
    """Target leave size for the two fixed-length stopping rules."""
    if rule == "steps":
        steps = int((1 - b**0.25) * m / 3)
        return m - 3 * steps
    if rule == "power":
        return congruent_stop(m, n**exponent)
    raise ValueError(f"unknown stopping rule {rule!r}")


def nibble(
    g: Graph,
    b: float,
    seed: int,
    max_retries: int = 20,
    rule: str = "bounded",
    exponent: float = 2 - 1e-7,
    check_typicality: bool = True,
) -> NibbleResult:
    """Triangle removal until the leave is b^(1/4)-bounded, with restarts.

    ``rule="bounded"`` stops the first time every leave degree is below
    b^(1/4) n; ``"steps"`` runs (1 - b^(1/4))|G|/3 steps; ``"power"`` stops
    at n^exponent edges.  Each attempt draws a fresh derived seed.
    """
    n, m = g.n, g.num_edges()
    bound = b**0.25
    warnings: List[str] = []
    typ = None
    if m == 0:
        return NibbleResult([], Graph(n), 0, True, bound, None, warnings)
    if check_typicality and n >= 2:
        typ = typicality_deviation(g, 2).deviation
        if not typ <= b:
            warnings.append(f"input is not {b}-typical (deviation {typ:.4g})")
        if float(density(g)) <= b:
            warnings.append("input density does not exceed b")
    best: Optional[RemovalResult] = None
    for attempt in range(max_retries):
        rng = random.Random(derive_seed(seed, "nibble", attempt))
        if rule == "bounded":
            res = run_triangle_removal(g, m % 3, rng, stop_max_degree=bound * n)
        else:
            res = run_triangle_removal(g, nibble_stop_edges(m, n, b, rule, exponent), rng)
        if is_bounded(res.leave, bound):
            return NibbleResult(res.N, res.leave, attempt + 1, True, bound, typ, warnings)
        if best is None or res.leave.num_edges() < best.leave.num_edges():
            best = res
    raise StageAbort(
        "nibble",
        f"leave not {bound:.4g}-bounded after {max_retries} attempts",
        {"best_leave_edges": best.leave.num_edges() if best else None},
    )


# ---------------------------------------------------------------- cover


@dataclass
class CoverResult:
    Mc: List[Triple]
    S: Graph
    attempts: int


def _cover_once(leave: Graph, gstar: Graph, rng: random.Random) -> Tuple[Optional[List[Triple]], int]:
    avail = list(gstar.adj)
    Mc: List[Triple] = []
    for i, (u, v) in enumerate(leave.edges()):
        cand = avail[u] & avail[v]
        if not cand:
            return None, i
        w = rng.choice(list(iter_bits(cand)))
        for x in (u, v):
            avail[x] &= ~(1 << w)
            avail[w] &= ~(1 << x)
        Mc.append(tri_key(u, v, w))
    return Mc, -1


def cover_leave(leave: Graph, gstar: Graph, seed: int, max_retries: int = 20) -> CoverResult:
    """Cover each leave edge (in lexicographic order) by a triangle whose other
    two edges are unused G* edges, chosen uniformly at random."""
    if any(a & b for a, b in zip(leave.adj, gstar.adj)):
        raise ValueError("leave and G* must be edge-disjoint")
    n = leave.n
    if leave.num_edges() == 0:
        return CoverResult([], Graph(n), 0)
    worst = -1
    for attempt in range(max_retries):
        rng = random.Random(derive_seed(seed, "cover", attempt))
        Mc, fail = _cover_once(leave, gstar, rng)
        if Mc is not None:
            S = Graph(n)
            for t in Mc:
                for x, y in ((t[0], t[1]), (t[0], t[2]), (t[1], t[2])):
                    if gstar.has_edge(x, y):
                        S.add_edge(x, y)
            return CoverResult(Mc, S, attempt + 1)
        worst = max(worst, fail)
    raise StageAbort("cover", f"no available triangle after {max_retries} attempts", {"furthest_step": worst})
