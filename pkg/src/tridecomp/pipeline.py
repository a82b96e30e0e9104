"""End-to-end orchestration: template, nibble, cover, hole, completion,
shuffles and final assembly, with per-stage reports and replayable seeds."""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .completion import completion_stage, shuffle_stage
from .graphcore import (
    Graph,
    IntGraph,
    StageAbort,
    Triple,
    density,
    derive_seed,
    matching_edges,
    max_degree_ratio,
    is_tridivisible,
    tri_edges,
    typicality_deviation,
    verify_decomposition,
)
from .greedy import cover_leave, nibble
from .hole import hole_stage
from .template import ConfigurationError, Template, build_template


class DivisibilityError(ValueError):
    pass


class ConsistencyError(AssertionError):
    pass


@dataclass
class PipelineConfig:
    c: float = 1e-12
    mode: str = "paper"  # paper | dense | fixed | punctured
    a: Optional[int] = None
    epsilon: float = 0.0
    max_retries: int = 20
    budget: int = 10_000
    nibble_rule: str = "bounded"
    overrides: Dict[str, float] = field(default_factory=dict)

    def constants(self, d: float) -> Dict[str, float]:
        """c1 .. c5 from c and d(G); entries in ``overrides`` win."""
        k: Dict[str, float] = {"c": self.c}
        k["c1"] = self.overrides.get("c1", (50 * self.c) ** 0.25)
        k["c2"] = self.overrides.get("c2", 1e2 * k["c1"] * d**-6)
        k["c3"] = self.overrides.get("c3", 1e20 * k["c2"] * d**-50)
        k["c4"] = self.overrides.get("c4", 1e20 * k["c3"] * d**-100)
        k["c5"] = self.overrides.get("c5", 1e10 * k["c4"] * d**-180)
        return k


@dataclass
class StageReport:
    stage: str
    status: str
    attempts: int = 0
    measurements: Dict[str, Any] = field(default_factory=dict)


@dataclass
class DecompositionResult:
    status: str
    mode: str
    seed: int
    n: int
    stage_reports: List[StageReport] = field(default_factory=list)
    decomposition: Optional[List[Triple]] = None
    config: Dict[str, Any] = field(default_factory=dict)
    timestamps: Dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def failed_stage(self) -> Optional[str]:
        bad = [r.stage for r in self.stage_reports if r.status != "ok"]
        return bad[0] if bad else None

    def to_json(self, with_timestamps: bool = True) -> Dict[str, Any]:
        out = {
            "status": self.status,
            "mode": self.mode,
            "seed": self.seed,
            "n": self.n,
            "config": self.config,
            "stage_reports": [asdict(r) for r in self.stage_reports],
            "decomposition": [list(t) for t in self.decomposition] if self.decomposition is not None else None,
        }
        if with_timestamps:
            out["timestamps"] = self.timestamps
        return out

    def dumps(self, with_timestamps: bool = True) -> str:
        return json.dumps(self.to_json(with_timestamps), sort_keys=True)


def check_spill_divisibility(
    T: Sequence[Triple], N: Sequence[Triple], Mc: Sequence[Triple], G: Graph, S: Graph
) -> bool:
    """union T + union N + union Mc - G must equal S exactly, and S must be tridivisible."""
    acc = IntGraph(G.n)
    for group in (T, N, Mc):
        for t in group:
            for e in tri_edges(t):
                acc.add(e, 1)
    acc = acc - IntGraph.from_graph(G)
    if acc != IntGraph.from_graph(S):
        raise ConsistencyError("union T + union N + union Mc - G differs from the spill")
    if not is_tridivisible(S):
        raise ConsistencyError("spill is not tridivisible")
    return True


def make_punctured_instance(a: int, epsilon: float, rng: random.Random) -> Tuple[Graph, Template]:
    """K_{2^a - 1} labelled bijectively, with an epsilon fraction of the
    zero-sum triples dropped from the template."""
    if a < 5:
        raise ConfigurationError("punctured instances need a >= 5")
    if not 0 <= epsilon < 0.05:
        raise ConfigurationError("epsilon must lie in [0, 0.05)")
    n = (1 << a) - 1
    g = Graph.complete(n)
    pi = rng.sample(range(1, 1 << a), n)
    inv = {lab: v for v, lab in enumerate(pi)}
    full = []
    for u in range(n):
        for v in range(u + 1, n):
            w = inv[pi[u] ^ pi[v]]
            if w > v:
                full.append((u, v, w))
    k = round(epsilon * len(full))
    drop = set(rng.sample(range(len(full)), k))
    kept = [t for i, t in enumerate(full) if i not in drop]
    return g, Template.from_triangles(pi, a, kept, mode="punctured")


def decompose(
    G: Graph,
    cfg: PipelineConfig,
    seed: int,
    tpl: Optional[Template] = None,
) -> DecompositionResult:
    """Run every stage; on success the result holds a verified decomposition."""
    if not is_tridivisible(G):
        raise DivisibilityError("G is not tridivisible")
    n = G.n
    d = float(density(G))
    k = cfg.constants(d)
    res = DecompositionResult("ok", cfg.mode, seed, n)
    res.config = {
        "c": cfg.c,
        "mode": cfg.mode,
        "a": cfg.a,
        "epsilon": cfg.epsilon,
        "max_retries": cfg.max_retries,
        "budget": cfg.budget,
        "nibble_rule": cfg.nibble_rule,
        "overrides": dict(sorted(cfg.overrides.items())),
        "constants": k,
    }
    clock = time.perf_counter()

    def report(stage: str, attempts: int = 1, **meas: Any) -> None:
        nonlocal clock
        now = time.perf_counter()
        res.timestamps[stage] = round(now - clock, 6)
        clock = now
        res.stage_reports.append(StageReport(stage, "ok", attempts, meas))

    try:
        if tpl is None:
            tpl = build_template(G, cfg.mode, random.Random(derive_seed(seed, "template")), cfg.a)
        ds = float(density(tpl.gstar))
        tmeas: Dict[str, Any] = {
            "a": tpl.a,
            "gamma": tpl.gamma,
            "template_triangles": len(tpl.T),
            "density": d,
            "density_star": ds,
            "predicted_density_star": tpl.gamma * d**3,
        }
        if n <= 600:
            tmeas["typicality_deviation"] = typicality_deviation(G, 2).deviation
        if cfg.mode != "paper":
            tmeas["warning"] = "labels outside the 2^(a-2) < n <= 2^(a-1) window: typicality hypotheses not required"
        report("template", **tmeas)

        H = G.difference(tpl.gstar)
        nb = nibble(H, 50 * cfg.c, derive_seed(seed, "nibble"), cfg.max_retries, cfg.nibble_rule,
                    check_typicality=False)
        L = nb.leave
        report("nibble", nb.attempts, triangles=len(nb.N), input_edges=H.num_edges(),
               leave_edges=L.num_edges(), leave_bound=k["c1"], leave_degree_ratio=max_degree_ratio(L),
               warnings=nb.warnings)

        cv = cover_leave(L, tpl.gstar, derive_seed(seed, "cover"), cfg.max_retries)
        S = cv.S
        check_spill_divisibility(sorted(tpl.T), nb.N, cv.Mc, G, S)
        report("cover", cv.attempts, triangles=len(cv.Mc), spill_edges=S.num_edges(),
               spill_degree_ratio=max_degree_ratio(S), c2=k["c2"], spill_divisibility=True)

        hl = hole_stage(S, tpl.gstar, derive_seed(seed, "hole"), cfg.budget, cfg.max_retries)
        mo_edges = matching_edges(hl.Mo)
        mi_edges = matching_edges(hl.Mi)
        if mo_edges != S.edge_set() | mi_edges or S.edge_set() & mi_edges:
            raise ConsistencyError("(S, union Mi) does not partition union Mo")
        report("hole", hl.attempts if S.num_edges() else 0, outer=len(hl.Mo), inner=len(hl.Mi),
               outer_degree_ratio=max_degree_ratio(Graph(n, mo_edges)), c3=k["c3"],
               boundary_conserved=True)

        cp = completion_stage(cv.Mc, hl.Mi, hl.Mo, L, tpl, derive_seed(seed, "completion"),
                              cfg.budget, cfg.max_retries, k["c4"])
        new_edges = Graph(n, cp.gamma.edges())
        for e in cp.gamma_prime.edges():
            new_edges.add_edge(*e)
        lines = cp.p2
        report("completion", cp.attempts if (cv.Mc or hl.Mo) else 0, m1=len(cp.M1), m2=len(cp.M2),
               P1=True,
               P2_degree_ratio=lines.max_degree_ratio if lines else 0.0,
               P2_max_line=lines.max_line_edges if lines else 0,
               P2_ok=lines.ok if lines else True,
               P3_max_plane=cp.p3.max_per_plane if cp.p3 else 0,
               P3_ok=cp.p3.ok if cp.p3 else True,
               new_edge_degree_ratio=max_degree_ratio(new_edges), c4=k["c4"], c5=k["c5"],
               boundary_conserved=True)

        sh = shuffle_stage(cp.M2, tpl, cp.octahedra, derive_seed(seed, "shuffle"), cfg.budget, cfg.max_retries)
        report("shuffle", sh.attempts if cp.M2 else 0, shuffles=len(sh.shuffles), samples=sum(sh.samples))

        M = set(nb.N) | set(cp.M1) | (set(sh.M4) - set(cp.M2)) | (tpl.T - set(sh.M3))
        if not verify_decomposition(G, M):
            raise ConsistencyError("assembled triangles do not decompose G")
        res.decomposition = sorted(M)
        report("assembly", triangles=len(M), from_template=len(M & tpl.T), verified=True)
    except StageAbort as exc:
        res.status = "abort"
        res.stage_reports.append(StageReport(exc.stage, "abort", cfg.max_retries,
                                             {"error": str(exc), **_jsonable(exc.context)}))
    return res


def _jsonable(d: Dict[str, Any]) -> Dict[str, Any]:
    return json.loads(json.dumps(d, default=lambda o: list(o) if isinstance(o, (tuple, set)) else str(o)))
