"""Linear algebra over F_2 on elements of F_{2^a} stored as int bit vectors.

Only the additive structure of the field is used: addition is XOR and
every element is its own negative.  Affine systems have F_2 coefficients
and right-hand sides in F_{2^a}, so they are solved bit-plane by
bit-plane with a single elimination.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterator, List, Sequence, Tuple


def xor_add(u: int, v: int) -> int:
    return u ^ v


def _reduce(basis: List[int], x: int) -> int:
    for b in basis:
        x = min(x, x ^ b)
    return x


def echelon_basis(elems: Sequence[int]) -> List[int]:
    """Return a reduced basis of span(elems), sorted with distinct leading bits."""
    basis: List[int] = []
    for e in elems:
        x = _reduce(basis, e)
        if x:
            basis.append(x)
            basis.sort(reverse=True)
    return basis


def rank(elems: Sequence[int]) -> int:
    return len(echelon_basis(elems))


def is_independent(elems: Sequence[int]) -> bool:
    return rank(elems) == len(elems)


def span(elems: Sequence[int]) -> List[int]:
    """All 2^rank elements of the F_2-span, ascending."""
    out = [0]
    for b in echelon_basis(elems):
        out += [x ^ b for x in out]
    return sorted(out)


def in_span(elems: Sequence[int], x: int) -> bool:
    return _reduce(echelon_basis(elems), x) == 0


@dataclass
class AffineSystem:
    """Rows ``(mask, rhs)`` meaning ``sum_{i in mask} y_i = rhs``.

    Unknowns y_0..y_{g-1} range over F_{2^a}; ``mask`` is an F_2 vector of
    length g packed into an int.  A row written as ``c + sum y_i = v`` is
    stored with ``rhs = c ^ v``.
    """

    num_unknowns: int
    a: int
    rows: List[Tuple[int, int]] = field(default_factory=list)

    def add_row(self, mask: int, rhs: int, const: int = 0) -> None:
        if mask >> self.num_unknowns:
            raise ValueError("coefficient mask wider than number of unknowns")
        self.rows.append((mask, rhs ^ const))


@dataclass
class SolutionSet:
    """Solutions as ``particular + sum_j lambda_j * h_j`` with lambda_j in F_{2^a}."""

    a: int
    num_unknowns: int
    consistent: bool
    particular: Tuple[int, ...]
    homogeneous: List[int]  # kernel basis, each an F_2 vector over the unknowns

    @property
    def count(self) -> int:
        if not self.consistent:
            return 0
        return 1 << (self.a * len(self.homogeneous))

    def __iter__(self) -> Iterator[Tuple[int, ...]]:
        """Enumerate solutions in Gray-code order over the coefficient bits."""
        if not self.consistent:
            return
        g = self.num_unknowns
        k = len(self.homogeneous)
        cur = list(self.particular)
        yield tuple(cur)
        for step in range(1, 1 << (self.a * k)):
            flip = (step & -step).bit_length() - 1
            j, bit = divmod(flip, self.a)
            h = self.homogeneous[j]
            for i in range(g):
                if h >> i & 1:
                    cur[i] ^= 1 << bit
            yield tuple(cur)


def solve_affine_system(sys: AffineSystem) -> SolutionSet:
    g = sys.num_unknowns
    pivots: List[Tuple[int, int, int]] = []  # (pivot column, mask, rhs)
    consistent = True
    for mask, rhs in sys.rows:
        for col, pm, pr in pivots:
            if mask >> col & 1:
                mask ^= pm
                rhs ^= pr
        if mask == 0:
            if rhs:
                consistent = False
            continue
        col = mask.bit_length() - 1
        # keep the pivot rows fully reduced
        pivots = [
            (c, m ^ mask, r ^ rhs) if m >> col & 1 else (c, m, r) for c, m, r in pivots
        ]
        pivots.append((col, mask, rhs))
    if not consistent:
        return SolutionSet(sys.a, g, False, tuple([0] * g), [])
    pivot_cols = {c for c, _, _ in pivots}
    free = [i for i in range(g) if i not in pivot_cols]
    particular = [0] * g
    for c, _, r in pivots:
        particular[c] = r
    kernel = []
    for f in free:
        h = 1 << f
        for c, m, _ in pivots:
            if m >> f & 1:
                h |= 1 << c
        kernel.append(h)
    return SolutionSet(sys.a, g, True, tuple(particular), kernel)


def brute_force_count(sys: AffineSystem) -> int:
    """Count solutions by enumerating all of F_{2^a}^g (small systems only)."""
    g, a = sys.num_unknowns, sys.a
    rows = [([i for i in range(g) if mask >> i & 1], rhs) for mask, rhs in sys.rows]
    total = 0
    for ys in product(range(1 << a), repeat=g):
        for idx, rhs in rows:
            acc = 0
            for i in idx:
                acc ^= ys[i]
            if acc != rhs:
                break
        else:
            total += 1
    return total
