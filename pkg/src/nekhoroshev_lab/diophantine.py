"""Exact rational and lattice arithmetic for periodic frequency vectors.

Everything here works over :class:`fractions.Fraction` and Python integers so
that the bounds returned by :func:`dirichlet_approx` and
:func:`smallest_divisor` can be checked without tolerances. Real inputs are
converted to rationals first (floats convert exactly, as dyadic rationals).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "PeriodicVector",
    "ResonanceModule",
    "ApproximationCertificate",
    "to_rational",
    "period_of",
    "dirichlet_approx",
    "resonance_module",
    "project_onto",
    "smallest_divisor",
    "l1_ball",
    "integer_kernel",
    "hermite_normal_form",
    "exact_rank",
    "iter_rationals",
]


def to_rational(x, max_denominator: int | None = None) -> Fraction:
    """Convert a number (int, float, Fraction, decimal string) to a Fraction.

    Floats are converted exactly. If `max_denominator` is given the result is
    rounded to the closest fraction with a bounded denominator.
    """
    if isinstance(x, Fraction):
        q = x
    elif isinstance(x, (int, np.integer)):
        q = Fraction(int(x))
    elif isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        q = Fraction(float(x))
    else:
        q = Fraction(x)
    if max_denominator is not None:
        q = q.limit_denominator(max_denominator)
    return q


def _rational_vector(w, max_denominator=None) -> tuple[Fraction, ...]:
    return tuple(to_rational(x, max_denominator) for x in w)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


@dataclass(frozen=True)
class PeriodicVector:
    """A rational frequency vector stored as ``numerator / period``.

    ``period`` is the least positive integer T with ``T * omega`` integral
    (the lcm of the reduced denominators). ``real_period`` is the infimum over
    all real t > 0, which can be smaller, e.g. 1/2 for (2, 4).
    """

    numerator: tuple[int, ...]
    period: int

    def __post_init__(self):
        num = tuple(int(k) for k in self.numerator)
        T = int(self.period)
        if T <= 0:
            raise ValueError("period must be a positive integer")
        if not any(num):
            raise ValueError("zero vector has no period")
        g = reduce(math.gcd, num, T)
        if g != 1:
            num = tuple(k // g for k in num)
            T //= g
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "period", T)

    @classmethod
    def from_rationals(cls, w, max_denominator: int | None = None) -> "PeriodicVector":
        ws = _rational_vector(w, max_denominator)
        T = reduce(_lcm, (q.denominator for q in ws), 1)
        return cls(tuple(int(q * T) for q in ws), T)

    @property
    def n(self) -> int:
        return len(self.numerator)

    @property
    def value(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(k, self.period) for k in self.numerator)

    @property
    def real_period(self) -> Fraction:
        g = reduce(math.gcd, self.numerator, 0)
        return Fraction(self.period, g)

    def dot(self, k: Sequence[int]) -> Fraction:
        """Exact scalar product ``k . omega``."""
        return Fraction(sum(int(a) * b for a, b in zip(k, self.numerator)), self.period)

    def is_resonant(self, k: Sequence[int]) -> bool:
        return sum(int(a) * b for a, b in zip(k, self.numerator)) == 0

    def to_array(self) -> np.ndarray:
        return np.array([float(q) for q in self.value])

    def sup_norm(self) -> Fraction:
        return Fraction(max(abs(k) for k in self.numerator), self.period)

    def to_dict(self) -> dict:
        return {"numerator": [str(k) for k in self.numerator], "period": str(self.period)}

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicVector":
        return cls(tuple(int(k) for k in d["numerator"]), int(d["period"]))

    def __str__(self):
        return "(" + ", ".join(str(q) for q in self.value) + ")"


def period_of(w) -> int:
    """Least positive integer T such that ``T * w`` is an integer vector."""
    ws = _rational_vector(w)
    if not any(ws):
        raise ValueError("zero vector has no period")
    return PeriodicVector.from_rationals(ws).period


# ---------------------------------------------------------------------------
# Dirichlet approximation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ApproximationCertificate:
    """Result of :func:`dirichlet_approx` together with its exact bounds.

    Attributes
    ----------
    input : tuple of Fraction
        The (rationalised) vector v that was approximated.
    quality : Fraction
        The parameter Q > 1.
    result : PeriodicVector
        The approximation omega.
    period : Fraction
        T = q / |v|, the real minimal period of omega.
    q : int
        Denominator used for the normalised direction (T = q / |v|).
    error : Fraction
        ``|v - omega|`` in the sup norm.
    """

    input: tuple[Fraction, ...]
    quality: Fraction
    result: PeriodicVector
    period: Fraction
    q: int
    error: Fraction

    @property
    def n(self) -> int:
        return len(self.input)

    @property
    def vnorm(self) -> Fraction:
        return max(abs(x) for x in self.input)

    @property
    def integer_direction(self) -> tuple[int, ...]:
        """The primitive integer vector ``T * omega``."""
        return tuple(int(x * self.period) for x in self.result.value)

    def error_bound(self) -> float:
        """``T^-1 Q^(-1/(n-1))`` as a float (for display)."""
        return float(1 / self.period) * float(self.quality) ** (-1.0 / (self.n - 1))

    def period_bounds(self) -> tuple[Fraction, Fraction]:
        return 1 / self.vnorm, self.quality / self.vnorm

    def check(self) -> bool:
        """Verify both Dirichlet bounds in exact arithmetic.

        ``err <= T^-1 Q^(-1/(n-1))`` is tested as ``(T err)^(n-1) Q <= 1``.
        """
        lo, hi = self.period_bounds()
        if not (lo <= self.period <= hi):
            return False
        return (self.period * self.error) ** (self.n - 1) * self.quality <= 1

    def to_dict(self) -> dict:
        return {
            "input": [str(x) for x in self.input],
            "Q": str(self.quality),
            "omega": self.result.to_dict(),
            "omega_decimal": [float(x) for x in self.result.value],
            "T": str(self.period),
            "q": str(self.q),
            "error": str(self.error),
            "error_decimal": float(self.error),
            "error_bound_decimal": self.error_bound(),
            "bounds_hold": self.check(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ApproximationCertificate":
        return cls(
            input=tuple(Fraction(x) for x in d["input"]),
            quality=Fraction(d["Q"]),
            result=PeriodicVector.from_dict(d["omega"]),
            period=Fraction(d["T"]),
            q=int(d["q"]),
            error=Fraction(d["error"]),
        )


def _nearest(num: int, den: int) -> int:
    # round-half-down so that ties pick the smaller p
    fl, rem = divmod(num, den)
    return fl + 1 if 2 * rem > den else fl


def _search_bruteforce(nums: Sequence[int], den: int, Q: Fraction, m: int):
    """Smallest q in [1, Q) with max_i |q x_i - p_i|^m * Q <= 1, x_i = nums_i/den."""
    Qn, Qd = Q.numerator, Q.denominator
    dm = den ** m
    q = 1
    while q < Q:
        ps = [_nearest(q * a, den) for a in nums]
        dev = max(abs(q * a - p * den) for a, p in zip(nums, ps))
        if dev ** m * Qn <= dm * Qd:
            return q, ps
        q += 1
    return None


def _convergents(num: int, den: int) -> Iterator[int]:
    """Denominators of the continued-fraction convergents of num/den."""
    q_prev, q = 0, 1
    a, b = num, den
    while b:
        t, r = divmod(a, b)
        q_prev, q = q, t * q + q_prev
        yield q_prev if q_prev else 1
        a, b = b, r
    yield q


def _search_cf(num: int, den: int, Q: Fraction):
    """One-dimensional fast path: the smallest good q is a convergent denominator."""
    candidates = sorted(set(c for c in _convergents(num, den) if c >= 1))
    best = None
    for q in candidates:
        if q >= Q:
            break
        p = _nearest(q * num, den)
        if abs(q * num - p * den) * Q.numerator <= den * Q.denominator:
            best = (q, [p])
            break
    if best is None:
        return None
    # best approximations of the second kind are convergents, except for a
    # handful of small-q edge cases; confirm nothing smaller works
    q0 = best[0]
    if q0 <= 64:
        return _search_bruteforce([num], den, Q, 1)
    return best


def dirichlet_approx(v, Q, *, max_denominator: int | None = None,
                     fast_path: bool = True) -> ApproximationCertificate:
    """Approximate ``v`` by a periodic vector with the Dirichlet bounds.

    Writes ``v = |v| (±1, x)`` after moving the largest-magnitude component
    first (ties broken by lowest index) and finds the smallest integer
    ``1 <= q < Q`` with ``|q x - p| <= Q^(-1/(n-1))``, rounding each ``q x_i``
    to the nearest integer (ties go to the smaller ``p``). The approximation is
    ``omega = |v| (±1, p / q)``, whose period is ``T = q / |v|``.

    Parameters
    ----------
    v : sequence of numbers
        Vector to approximate, n >= 2. Floats are converted exactly.
    Q : number
        Quality parameter, Q > 1.
    max_denominator : int, optional
        Round each component of v to a fraction with this denominator bound
        before approximating.
    fast_path : bool
        For n = 2 search among continued-fraction convergents.

    Returns
    -------
    ApproximationCertificate
    """
    vs = _rational_vector(v, max_denominator)
    n = len(vs)
    if n < 2:
        raise ValueError("dirichlet_approx needs n >= 2")
    Qr = to_rational(Q)
    if Qr <= 1:
        raise ValueError(f"Q must be > 1, got {Q}")
    vnorm = max(abs(x) for x in vs)
    if vnorm == 0:
        raise ValueError("zero vector cannot be approximated")

    lead = min(range(n), key=lambda i: (-abs(vs[i]), i))
    rest = [i for i in range(n) if i != lead]
    sign = 1 if vs[lead] > 0 else -1
    xs = [vs[i] / vnorm for i in rest]
    den = reduce(_lcm, (x.denominator for x in xs), 1)
    nums = [int(x * den) for x in xs]
    m = n - 1

    found = None
    if fast_path and m == 1:
        found = _search_cf(nums[0], den, Qr)
    if found is None:
        found = _search_bruteforce(nums, den, Qr, m)
    if found is None:  # pragma: no cover - excluded by Minkowski's theorem
        raise RuntimeError("no approximation found; Dirichlet's theorem violated?")
    q, ps = found

    omega = [Fraction(0)] * n
    omega[lead] = sign * vnorm
    for i, p in zip(rest, ps):
        omega[i] = vnorm * Fraction(p, q)
    pv = PeriodicVector.from_rationals(omega)
    error = max(abs(a - b) for a, b in zip(vs, omega))
    return ApproximationCertificate(
        input=vs, quality=Qr, result=pv, period=Fraction(q) / vnorm, q=q, error=error,
    )


# ---------------------------------------------------------------------------
# Integer lattices
# ---------------------------------------------------------------------------

def exact_rank(rows: Sequence[Sequence]) -> int:
    """Rank of a rational matrix by fraction-exact elimination."""
    mat = [[to_rational(x) for x in r] for r in rows]
    if not mat:
        return 0
    rank, ncols = 0, len(mat[0])
    for c in range(ncols):
        piv = next((r for r in range(rank, len(mat)) if mat[r][c] != 0), None)
        if piv is None:
            continue
        mat[rank], mat[piv] = mat[piv], mat[rank]
        for r in range(rank + 1, len(mat)):
            f = mat[r][c] / mat[rank][c]
            if f:
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[rank])]
        rank += 1
    return rank


def hermite_normal_form(rows: Sequence[Sequence[int]]) -> list[list[int]]:
    """Row Hermite normal form of an integer matrix, zero rows removed.

    Pivots are positive and entries above each pivot are reduced into
    ``[0, pivot)``. Two matrices span the same lattice iff their HNFs agree.
    """
    A = [[int(x) for x in r] for r in rows]
    if not A:
        return []
    ncols = len(A[0])
    r0 = 0
    for c in range(ncols):
        # gcd-combine column c over rows r0.. into row r0
        for r in range(r0 + 1, len(A)):
            a, b = A[r0][c], A[r][c]
            if b == 0:
                continue
            g, x, y = _xgcd(a, b)
            u, v = -b // g, a // g
            A[r0], A[r] = ([x * s + y * t for s, t in zip(A[r0], A[r])],
                           [u * s + v * t for s, t in zip(A[r0], A[r])])
        if A[r0][c] == 0:
            continue
        if A[r0][c] < 0:
            A[r0] = [-s for s in A[r0]]
        piv = A[r0][c]
        for r in range(r0):
            f = A[r][c] // piv
            if f:
                A[r] = [s - f * t for s, t in zip(A[r], A[r0])]
        r0 += 1
        if r0 == len(A):
            break
    return [row for row in A[:r0]]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def integer_kernel(rows: Sequence[Sequence[int]], n: int | None = None) -> list[list[int]]:
    """Z-basis of ``{k in Z^n : A k = 0}`` in Hermite normal form.

    Column operations bring ``A`` to ``A U = [H | 0]`` with ``U`` unimodular;
    the columns of ``U`` matching the zero block form a basis of the full
    integer kernel, which is saturated by construction.
    """
    A = [[int(x) for x in r] for r in rows]
    if n is None:
        if not A:
            raise ValueError("need n for an empty matrix")
        n = len(A[0])
    # work with columns of A as rows of At, and track U as rows of Ut
    cols = [[A[i][j] for i in range(len(A))] for j in range(n)]
    U = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    c0 = 0
    for i in range(len(A)):
        for j in range(c0 + 1, n):
            a, b = cols[c0][i], cols[j][i]
            if b == 0:
                continue
            g, x, y = _xgcd(a, b)
            u, v = -b // g, a // g
            cols[c0], cols[j] = ([x * s + y * t for s, t in zip(cols[c0], cols[j])],
                                 [u * s + v * t for s, t in zip(cols[c0], cols[j])])
            U[c0], U[j] = ([x * s + y * t for s, t in zip(U[c0], U[j])],
                           [u * s + v * t for s, t in zip(U[c0], U[j])])
        if cols[c0][i] != 0:
            c0 += 1
            if c0 == n:
                break
    basis = [U[j] for j in range(c0, n)]
    return hermite_normal_form(basis)


@dataclass(frozen=True)
class ResonanceModule:
    """The module ``{k : k.omega_i = 0}`` with its real span and projector.

    An empty list of frequencies gives the full lattice ``Z^n`` (projector is
    the identity); n independent frequencies give the zero module.
    """

    n: int
    generators: tuple[tuple[int, ...], ...]
    omegas: tuple[PeriodicVector, ...] = ()
    span_basis: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.span_basis is None:
            if self.generators:
                G = np.array(self.generators, dtype=float).T
                Qm, _ = np.linalg.qr(G)
                basis = Qm[:, : len(self.generators)]
            else:
                basis = np.zeros((self.n, 0))
            object.__setattr__(self, "span_basis", basis)

    @property
    def rank(self) -> int:
        return len(self.generators)

    def projector(self) -> np.ndarray:
        E = self.span_basis
        return E @ E.T

    def contains(self, k: Sequence[int]) -> bool:
        """Exact membership test (k lies in the module)."""
        return all(w.is_resonant(k) for w in self.omegas)


def resonance_module(omegas: Sequence[PeriodicVector], n: int | None = None) -> ResonanceModule:
    """Saturated integer basis of the common resonance module of `omegas`."""
    omegas = tuple(omegas)
    if n is None:
        if not omegas:
            raise ValueError("need n when no frequencies are given")
        n = omegas[0].n
    if any(w.n != n for w in omegas):
        raise ValueError("dimension mismatch among frequencies")
    if len(omegas) > n:
        raise ValueError(f"{len(omegas)} vectors in dimension {n} cannot be independent")
    rows = [list(w.numerator) for w in omegas]
    for i in range(len(rows)):
        if exact_rank(rows[: i + 1]) <= i:
            raise ValueError(f"frequency #{i} {omegas[i]} depends linearly on the previous ones")
    if not rows:
        gens = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    else:
        gens = integer_kernel(rows, n)
    return ResonanceModule(n=n, generators=tuple(tuple(g) for g in gens), omegas=omegas)


def project_onto(module: ResonanceModule, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the real span of the module."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != module.n:
        raise ValueError(f"expected vectors of length {module.n}, got {x.shape[-1]}")
    E = module.span_basis
    return (x @ E) @ E.T


# ---------------------------------------------------------------------------
# Divisors
# ---------------------------------------------------------------------------

def l1_ball(n: int, K: int) -> Iterator[tuple[int, ...]]:
    """All integer vectors k in Z^n with ``|k|_1 <= K``."""
    if n == 0:
        yield ()
        return
    for a in range(-K, K + 1):
        for rest in l1_ball(n - 1, K - abs(a)):
            yield (a,) + rest


def smallest_divisor(omega: PeriodicVector, K: int) -> Fraction | None:
    """``min |k.omega|`` over nonresonant k with ``0 < |k|_1 <= K``.

    Returns None when every such k is resonant (only possible for K = 0).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    best = None
    for k in l1_ball(omega.n, K):
        s = abs(sum(a * b for a, b in zip(k, omega.numerator)))
        if s and (best is None or s < best):
            best = s
    return None if best is None else Fraction(best, omega.period)


def iter_rationals(n: int, max_den: int) -> Iterable[PeriodicVector]:
    """Nonzero rational vectors in [-1, 1]^n with denominators <= max_den."""
    values = sorted({Fraction(p, q) for q in range(1, max_den + 1) for p in range(-q, q + 1)})
    import itertools

    for w in itertools.product(values, repeat=n):
        if any(w):
            yield PeriodicVector.from_rationals(w)
