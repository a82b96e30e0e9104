"""Steiner triple system counting: exact backtracking oracles, the greedy
removal log-count estimator, design divisibility and closed-form formulas."""

from __future__ import annotations

import csv
import math
import random
import statistics
from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import mpmath

from .graphcore import Graph, derive_seed
from .greedy import congruent_stop, run_triangle_removal

mpmath.mp.prec = 96


def _admissible(n: int) -> bool:
    return n % 6 in (1, 3)


# ---------------------------------------------------------------------------
# exact counting


def _backtrack(n: int, rows: List[int]) -> int:
    """Count completions of a partial system; rows[u] is the bitset of
    vertices v whose edge uv is still uncovered."""
    u = next((i for i in range(n) if rows[i]), -1)
    if u < 0:
        return 1
    low = rows[u] & -rows[u]
    v = low.bit_length() - 1
    cand = rows[u] & rows[v] & ~low
    total = 0
    while cand:
        bit = cand & -cand
        w = bit.bit_length() - 1
        cand ^= bit
        bu, bv, bw = 1 << u, 1 << v, bit
        rows[u] ^= bv | bw
        rows[v] ^= bu | bw
        rows[w] ^= bu | bv
        total += _backtrack(n, rows)
        rows[u] ^= bv | bw
        rows[v] ^= bu | bw
        rows[w] ^= bu | bv
    return total


def _rows_without(n: int, blocks: Iterable[Sequence[int]]) -> Optional[List[int]]:
    full = (1 << n) - 1
    rows = [full ^ (1 << i) for i in range(n)]
    for t in blocks:
        for x, y in combinations(t, 2):
            if not rows[x] >> y & 1:
                return None
            rows[x] ^= 1 << y
            rows[y] ^= 1 << x
    return rows


def _double_factorial_odd(m: int) -> int:
    out = 1
    for k in range(m, 0, -2):
        out *= k
    return out


def brute_force_count_sts(n: int, allow_13: bool = False, symmetry_reduced: Optional[bool] = None) -> int:
    """Exact number of labelled Steiner triple systems on n points.

    Backtracking always extends the least uncovered edge.  With
    ``symmetry_reduced`` the blocks through point 0 are fixed to
    {0,1,2},{0,3,4},... and one further block {1,3,5} is fixed; the count is
    scaled by the number of relabellings, (n-2)!! * (n-5).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n in (0, 1):
        return 1
    if not _admissible(n):
        return 0
    if n >= 13 and not allow_13:
        raise ValueError("n >= 13 takes hours; pass allow_13=True")
    if symmetry_reduced is None:
        symmetry_reduced = n >= 13
    if not symmetry_reduced or n < 7:
        return _backtrack(n, _rows_without(n, []))
    fixed = [(0, 2 * k + 1, 2 * k + 2) for k in range((n - 1) // 2)] + [(1, 3, 5)]
    rows = _rows_without(n, fixed)
    return _double_factorial_odd(n - 2) * (n - 5) * _backtrack(n, rows)


def exact_cover_count_sts(n: int) -> int:
    """Independent oracle: Knuth's Algorithm X over the edge/triple incidence."""
    if n in (0, 1):
        return 1
    if not _admissible(n):
        return 0
    triples = list(combinations(range(n), 3))
    Y: Dict[int, List[Tuple[int, int]]] = {i: list(combinations(t, 2)) for i, t in enumerate(triples)}
    X: Dict[Tuple[int, int], Set[int]] = {e: set() for e in combinations(range(n), 2)}
    for i, cols in Y.items():
        for e in cols:
            X[e].add(i)

    def select(r: int) -> List[Set[int]]:
        removed = []
        for j in Y[r]:
            for i in X[j]:
                for k in Y[i]:
                    if k != j:
                        X[k].remove(i)
            removed.append(X.pop(j))
        return removed

    def deselect(r: int, removed: List[Set[int]]) -> None:
        for j in reversed(Y[r]):
            X[j] = removed.pop()
            for i in X[j]:
                for k in Y[i]:
                    if k != j:
                        X[k].add(i)

    def solve() -> int:
        if not X:
            return 1
        col = min(X, key=lambda c: len(X[c]))
        total = 0
        for r in list(X[col]):
            removed = select(r)
            total += solve()
            deselect(r, removed)
        return total

    return solve()


# ---------------------------------------------------------------------------
# log-count estimator


@dataclass
class TrialRecord:
    trial: int
    steps: int
    L1: mpmath.mpf
    L2: mpmath.mpf
    sum_log_p: mpmath.mpf
    sum_log_p_corrected: mpmath.mpf
    stop_p: float


@dataclass
class CountEstimate:
    n: int
    stop_exponent: float
    trials: int
    records: List[TrialRecord] = field(default_factory=list)
    discarded: int = 0

    @property
    def scale(self) -> mpmath.mpf:
        return mpmath.mpf(self.n) ** 2 / 6

    @property
    def L1(self) -> mpmath.mpf:
        return mpmath.fsum(r.L1 for r in self.records) / len(self.records)

    @property
    def L2(self) -> mpmath.mpf:
        return mpmath.fsum(r.L2 for r in self.records) / len(self.records)

    @property
    def log_sts_lower(self) -> mpmath.mpf:
        return self.L1 - self.L2

    @property
    def wilson_prediction(self) -> mpmath.mpf:
        return self.scale * (mpmath.log(self.n) - 2)

    @property
    def normalized_lower(self) -> float:
        return float(self.log_sts_lower / self.scale)

    @property
    def normalized_sum_log_p(self) -> float:
        """Truncation-corrected sum of log p(i), divided by n^2/6; the continuum value is -1."""
        s = mpmath.fsum(r.sum_log_p_corrected for r in self.records) / len(self.records)
        return float(s / self.scale)

    @property
    def l1_cv(self) -> float:
        vals = [float(r.L1) for r in self.records]
        if len(vals) < 2:
            return 0.0
        return statistics.stdev(vals) / abs(statistics.fmean(vals))

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "trial", "L1", "L2", "lower_bound", "wilson_prediction"])
            wp = mpmath.nstr(self.wilson_prediction, 17)
            for r in self.records:
                w.writerow([self.n, r.trial, mpmath.nstr(r.L1, 17), mpmath.nstr(r.L2, 17),
                            mpmath.nstr(r.L1 - r.L2, 17), wp])

    def to_json(self) -> Dict[str, object]:
        return {
            "n": self.n,
            "stop_exponent": self.stop_exponent,
            "trials": len(self.records),
            "discarded": self.discarded,
            "L1": float(self.L1),
            "L2": float(self.L2),
            "log_sts_lower": float(self.log_sts_lower),
            "wilson_prediction": float(self.wilson_prediction),
            "normalized_lower": self.normalized_lower,
            "normalized_sum_log_p": self.normalized_sum_log_p,
            "l1_cv": self.l1_cv,
        }


def estimate_log_sts(n: int, stop_exponent: float = 1.55, trials: int = 20, seed: int = 0) -> CountEstimate:
    """Run the triangle removal process on K_n down to about n**stop_exponent
    edges and accumulate L1 = sum log choices(i), L2 = sum log(p(i) n^2 / 6)."""
    if not _admissible(n):
        raise ValueError("n must be 1 or 3 mod 6")
    if not 1.5 < stop_exponent < 2:
        raise ValueError("stop_exponent must lie in (1.5, 2)")
    if trials < 1:
        raise ValueError("trials must be positive")
    kn = Graph.complete(n)
    stop = congruent_stop(kn.num_edges(), n**stop_exponent)
    scale = mpmath.mpf(n) ** 2 / 6
    est = CountEstimate(n, stop_exponent, trials)
    for t in range(trials):
        rng = random.Random(derive_seed(seed, "estimate", t))
        res = run_triangle_removal(kn, stop, rng)
        traj = res.trajectory
        if traj.aborted:
            est.discarded += 1
            continue
        m = traj.steps
        L1 = mpmath.fsum(mpmath.log(c) for c in traj.choices)
        logs_p = [mpmath.log(1 - mpmath.mpf(6 * i) / n**2) for i in range(1, m + 1)]
        L2 = mpmath.fsum(lp + mpmath.log(scale) for lp in logs_p)
        s = mpmath.fsum(logs_p)
        ps = 1 - mpmath.mpf(6 * m) / n**2
        corrected = s + scale * (ps * mpmath.log(ps) - ps)
        est.records.append(TrialRecord(t, m, L1, L2, s, corrected, float(ps)))
    if not est.records:
        raise RuntimeError("every trial aborted")
    return est


# ---------------------------------------------------------------------------
# designs


def _check_params(n: int, q: int, r: int, lam: int, strict: bool = True) -> None:
    if r < 1 or lam < 1 or n < 0:
        raise ValueError("need r >= 1, lambda >= 1, n >= 0")
    if q < r or (strict and q == r):
        raise ValueError("need q > r")


def design_divisibility(n: int, q: int, r: int, lam: int) -> bool:
    """C(q-i, r-i) divides lambda * C(n-i, r-i) for every 0 <= i < r."""
    _check_params(n, q, r, lam)
    return all((lam * comb(n - i, r - i)) % comb(q - i, r - i) == 0 for i in range(r))


@dataclass
class DesignFormula:
    value: mpmath.mpf
    degenerate: bool
    note: str = "lower-order o(N) term omitted"


def wilson_design_log_formula(n: int, q: int, r: int, lam: int) -> DesignFormula:
    """log of lambda!^{-C(n,r)} ((lambda/e)^{Q-1} N)^{lambda C(n,r)/Q}, with
    Q = C(q,r) and N = C(n-r, q-r)."""
    _check_params(n, q, r, lam, strict=False)
    if q > r and not design_divisibility(n, q, r, lam):
        raise ValueError("divisibility conditions fail")
    Q = comb(q, r)
    N = comb(n - r, q - r)
    blocks = mpmath.mpf(comb(n, r))
    if N == 0:
        raise ValueError("n too small")
    val = -blocks * mpmath.log(mpmath.factorial(lam)) + mpmath.mpf(lam) / Q * blocks * (
        (Q - 1) * (mpmath.log(lam) - 1) + mpmath.log(N)
    )
    return DesignFormula(val, degenerate=(q == r))


def entropy_integral(A: float, B: float, C: float) -> mpmath.mpf:
    """Closed form of the integral of t^(A-1) log(C t^B) over [0, 1]."""
    if A <= 0 or C <= 0 or B < 0:
        raise ValueError("need A > 0, B >= 0, C > 0")
    A, B, C = mpmath.mpf(A), mpmath.mpf(B), mpmath.mpf(C)
    return mpmath.log(C) / A - B / A**2


def entropy_integral_quad(A: float, B: float, C: float) -> mpmath.mpf:
    """The same integral by tanh-sinh quadrature, subdivided geometrically
    towards 0 where t^(A-1) log t is singular for A < 1."""
    A, B, C = mpmath.mpf(A), mpmath.mpf(B), mpmath.mpf(C)
    points = [0] + [mpmath.mpf(10) ** -k for k in range(40, 0, -4)] + [1]
    return mpmath.quad(lambda t: t ** (A - 1) * (mpmath.log(C) + B * mpmath.log(t)), points, maxdegree=10)
