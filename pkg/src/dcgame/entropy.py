"""Joint-entropy tables and Slepian-Wolf (contra-polymatroid) polytope algorithms.

Subsets of sources are bitmasks: bit ``i`` set means source ``i`` (0-based) is in
the set.  The rate region of a terminal is

    { r >= 0 : sum_{i in A} r_i >= H(S) - H(S \\ A)  for every A }

which is the contra-polymatroid of the supermodular function
``g(A) = H(S) - H(A^c)``.  Everything here works for any monotone submodular
rank function given as a full table, not only for entropies.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_SOURCES = 24
DEFAULT_TOL = 1e-9


class SchemaError(ValueError):
    """Malformed input document or table."""


class DomainError(ValueError):
    """Operation called outside its domain (e.g. non-member rate vector)."""


@dataclass(frozen=True)
class EntropyModel:
    """Joint entropy ``H(A)`` in bits for every subset ``A`` of ``num_sources`` sources.

    ``table[mask]`` holds ``H`` of the subset encoded by ``mask``.
    """

    num_sources: int
    table: tuple[float, ...]

    def __post_init__(self):
        n = self.num_sources
        if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_SOURCES:
            raise SchemaError(f"num_sources must be an integer in [1, {MAX_SOURCES}], got {n!r}")
        if len(self.table) != 1 << n:
            raise SchemaError(f"entropy table needs {1 << n} entries, got {len(self.table)}")
        vals = tuple(float(v) for v in self.table)
        if not all(math.isfinite(v) for v in vals):
            raise SchemaError("entropy table contains non-finite values")
        object.__setattr__(self, "table", vals)

    @property
    def full(self) -> int:
        return (1 << self.num_sources) - 1

    @property
    def total(self) -> float:
        """H(S)."""
        return self.table[self.full]

    def __getitem__(self, mask: int) -> float:
        return self.table[mask]

    # -- constructors -------------------------------------------------------

    @classmethod
    def identical(cls, h: float, num_sources: int) -> "EntropyModel":
        """All sources are copies of one source with entropy ``h``."""
        n = 1 << num_sources
        return cls(num_sources, tuple(0.0 if m == 0 else float(h) for m in range(n)))

    @classmethod
    def independent(cls, entropies: Sequence[float]) -> "EntropyModel":
        hs = [float(h) for h in entropies]
        n = len(hs)
        table = [sum(hs[i] for i in range(n) if m >> i & 1) for m in range(1 << n)]
        return cls(n, tuple(table))

    @classmethod
    def from_pairs(cls, num_sources: int, pairs: Iterable[tuple[int, float]]) -> "EntropyModel":
        """Build from explicit ``(mask, entropy)`` pairs; every subset must appear."""
        n = 1 << num_sources
        table: list[float | None] = [None] * n
        for mask, value in pairs:
            mask = int(mask)
            if not 0 <= mask < n:
                raise SchemaError(f"subset mask {mask} out of range for {num_sources} sources")
            table[mask] = float(value)
        if table[0] is None:
            table[0] = 0.0
        missing = [m for m, v in enumerate(table) if v is None]
        if missing:
            raise SchemaError(f"missing entropy entry for subset mask {missing[0]}")
        return cls(num_sources, tuple(table))  # type: ignore[arg-type]

    @classmethod
    def from_distribution(cls, pmf: np.ndarray) -> "EntropyModel":
        """Entropy table of a joint pmf given as an N-dimensional array."""
        pmf = np.asarray(pmf, dtype=float)
        pmf = pmf / pmf.sum()
        n = pmf.ndim
        table = []
        for mask in range(1 << n):
            drop = tuple(i for i in range(n) if not mask >> i & 1)
            marg = pmf.sum(axis=drop) if drop else pmf
            p = marg[marg > 0]
            table.append(float(-(p * np.log2(p)).sum()) if mask else 0.0)
        return cls(n, tuple(table))

    @classmethod
    def parse(cls, value, num_sources: int | None = None) -> "EntropyModel":
        """Parse the textual schema.

        ``value`` is ``"identical(h)"``, ``"independent(h1, ..., hN)"`` or a list of
        ``[mask, entropy]`` pairs.
        """
        if isinstance(value, str):
            m = re.fullmatch(r"\s*(identical|independent)\s*\(([^)]*)\)\s*", value)
            if not m:
                raise SchemaError(f"unrecognised entropy generator {value!r}")
            try:
                args = [float(x) for x in m.group(2).split(",") if x.strip()]
            except ValueError as exc:
                raise SchemaError(f"bad entropy generator arguments in {value!r}") from exc
            if m.group(1) == "identical":
                if len(args) != 1 or num_sources is None:
                    raise SchemaError("identical(h) takes one argument and needs the source count")
                return cls.identical(args[0], num_sources)
            if num_sources is not None and len(args) != num_sources:
                raise SchemaError(f"independent() lists {len(args)} entropies for {num_sources} sources")
            return cls.independent(args)
        if isinstance(value, (list, tuple)):
            if num_sources is None:
                raise SchemaError("explicit entropy table needs the source count")
            try:
                pairs = [(int(a), float(b)) for a, b in value]
            except (TypeError, ValueError) as exc:
                raise SchemaError("entropy pairs must be [mask, value]") from exc
            return cls.from_pairs(num_sources, pairs)
        raise SchemaError(f"unsupported entropy description of type {type(value).__name__}")

    def to_pairs(self) -> list[list]:
        return [[m, v] for m, v in enumerate(self.table)]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    kind: str = ""
    pair: tuple[int, int] | None = None
    violation: float = 0.0

    def describe(self, num_sources: int) -> str:
        if self.ok:
            return "entropy table valid"
        a, b = self.pair
        return (f"{self.kind} violated for A={mask_to_set(a, num_sources)}, "
                f"B={mask_to_set(b, num_sources)} by {self.violation:.6g}")


def mask_to_set(mask: int, num_sources: int, one_based: bool = True) -> set[int]:
    off = 1 if one_based else 0
    return {i + off for i in range(num_sources) if mask >> i & 1}


def members(mask: int, num_sources: int) -> list[int]:
    return [i for i in range(num_sources) if mask >> i & 1]


def validate(model: EntropyModel, tol: float = 1e-12) -> ValidationReport:
    """Check ``H(empty)=0``, nonnegativity, monotonicity and submodularity.

    Returns the first violated ``(A, B)`` pair.  Monotonicity is reported with
    ``A`` a subset of ``B``; submodularity over all pairs ``A < B``.
    """
    H = model.table
    n = 1 << model.num_sources
    if abs(H[0]) > tol:
        return ValidationReport(False, "H(empty)=0", (0, 0), abs(H[0]))
    for a in range(n):
        if H[a] < -tol:
            return ValidationReport(False, "nonnegativity", (a, a), -H[a])
    for b in range(n):
        for i in range(model.num_sources):
            if b >> i & 1:
                a = b & ~(1 << i)
                if H[a] - H[b] > tol:
                    return ValidationReport(False, "monotonicity", (a, b), H[a] - H[b])
    for a in range(n):
        for b in range(a + 1, n):
            excess = H[a | b] + H[a & b] - H[a] - H[b]
            if excess > tol:
                return ValidationReport(False, "submodularity", (a, b), excess)
    return ValidationReport(True)


def conditional_entropy(model: EntropyModel, mask: int) -> float:
    """``H(X_A | X_{A^c}) = H(S) - H(A^c)``."""
    return model.total - model.table[model.full & ~mask]


def lower_bounds(model: EntropyModel) -> np.ndarray:
    """Vector of ``g(A)`` for every mask."""
    H = np.asarray(model.table)
    full = model.full
    comp = full & ~np.arange(1 << model.num_sources)
    return H[full] - H[comp]


def subset_sums(r: Sequence[float]) -> np.ndarray:
    """``sum_{i in A} r_i`` for every mask, built incrementally."""
    r = np.asarray(r, dtype=float)
    sums = np.zeros(1 << len(r))
    for i, ri in enumerate(r):
        step = 1 << i
        sums[step:2 * step] = sums[:step] + ri
    return sums


def _check_len(model: EntropyModel, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (model.num_sources,):
        raise DomainError(f"rate vector must have {model.num_sources} entries, got shape {r.shape}")
    return r


def slacks(model: EntropyModel, r) -> np.ndarray:
    """``sum_A r - g(A)`` for every mask (entry 0 is always 0)."""
    r = _check_len(model, r)
    return subset_sums(r) - lower_bounds(model)


def is_member(model: EntropyModel, r, tol: float = DEFAULT_TOL) -> bool:
    r = _check_len(model, r)
    if not np.all(np.isfinite(r)):
        return False
    if model.total == 0.0:
        return bool(np.all(np.abs(r) <= tol))
    s = slacks(model, r)
    return bool(s[1:].min() >= -tol) if len(s) > 1 else True


def tight_sets(model: EntropyModel, r, tol: float = DEFAULT_TOL) -> list[int]:
    """All nonempty masks whose rate inequality holds with equality (within ``tol``)."""
    if not is_member(model, r, tol):
        raise DomainError("rate vector is not in the Slepian-Wolf region")
    s = slacks(model, r)
    return [m for m in range(1, len(s)) if abs(s[m]) <= tol]


def minimal_tight_set(model: EntropyModel, r, i: int, tol: float = DEFAULT_TOL) -> int:
    """Intersection of all tight sets containing source ``i``.

    Tight sets are closed under intersection, so this is itself tight whenever
    some tight set contains ``i``; with no such set the (vacuous) result is ``S``.
    """
    out = model.full
    for m in tight_sets(model, r, tol):
        if m >> i & 1:
            out &= m
    return out


def participates_in_all_tight(model: EntropyModel, r, i: int, j: int, tol: float = DEFAULT_TOL) -> bool:
    """True iff every tight set containing ``i`` also contains ``j``."""
    if i == j:
        return True
    return bool(minimal_tight_set(model, r, i, tol) >> j & 1)


def greedy_vertex(model: EntropyModel, order: Sequence[int]) -> np.ndarray:
    """Base-polytope vertex for a source ordering: prefix increments of ``H``."""
    r = np.zeros(model.num_sources)
    mask = 0
    prev = 0.0
    for s in order:
        mask |= 1 << s
        cur = model.table[mask]
        r[s] = cur - prev
        prev = cur
    return r


def linear_minimize(model: EntropyModel, weights) -> np.ndarray:
    """Minimise ``weights . r`` over the base of the rate region (Edmonds greedy).

    Sources are taken in ascending weight, ties broken by index.
    """
    w = _check_len(model, weights)
    if not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite")
    if np.any(w < 0):
        raise DomainError("weights must be nonnegative")
    order = sorted(range(model.num_sources), key=lambda s: (w[s], s))
    return greedy_vertex(model, order)


def all_greedy_vertices(model: EntropyModel) -> list[np.ndarray]:
    return [greedy_vertex(model, p) for p in itertools.permutations(range(model.num_sources))]


def reduce_to_base(model: EntropyModel, r, tol: float = 1e-12) -> np.ndarray:
    """Lower coordinates of a member until the sum-rate equals ``H(S)``.

    Repeatedly picks the lowest-index source all of whose inequalities are
    loose and lowers it until one of them becomes tight (or the sum-rate target
    is hit).
    """
    r = _check_len(model, r).copy()
    if not is_member(model, r, max(tol, DEFAULT_TOL)):
        raise DomainError("rate vector is not in the Slepian-Wolf region")
    n = model.num_sources
    if model.total == 0.0:
        return np.zeros(n)
    g = lower_bounds(model)
    masks = np.arange(1 << n)
    containing = [masks[(masks >> i) & 1 == 1] for i in range(n)]
    for _ in range(n * (1 << n) + 1):
        excess = r.sum() - model.total
        if excess <= tol:
            break
        s = subset_sums(r) - g
        for i in range(n):
            room = s[containing[i]].min()
            if room > tol:
                r[i] -= min(room, excess)
                break
        else:
            raise DomainError("no fully loose coordinate found; sum-rate cannot be reduced")
    return r
