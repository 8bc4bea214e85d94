"""SDM checks over rational subspaces, steepness witnesses and prevalence sampling.

For a subspace Lambda with orthonormal basis E (and F for its complement),
``h_Lambda(alpha, beta) = h(E alpha + F beta)``. The SDM alternative asks that
at every point either ``|d_alpha h_Lambda| > kappa`` or the restricted Hessian
``E^T D^2h E`` has smallest singular value ``> kappa``, with
``kappa = gamma L^-tau``. Both quantities are basis independent within
Lambda, so any orthonormal basis may be used.

The checks sample B on a grid plus random points. A violation found this way
refutes the property; the absence of one is evidence at that resolution only.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diophantine import hermite_normal_form, integer_kernel
from .trig_hamiltonian import TrigPolyHamiltonian

__all__ = [
    "SubspaceFrame",
    "SdmReport",
    "FrameRecord",
    "CurveWitness",
    "PrevalenceTable",
    "enumerate_subspaces",
    "all_frames",
    "primitive_vectors",
    "sdm_check",
    "steep_witness",
    "prevalence_mc",
    "c3_bound",
    "PolyField",
]


# ---------------------------------------------------------------------------
# Polynomial evaluation
# ---------------------------------------------------------------------------

class PolyField:
    """Vectorised value, gradient and Hessian of an angle-free Hamiltonian."""

    def __init__(self, h: TrigPolyHamiltonian):
        if not h.is_integrable():
            raise ValueError("h must not depend on the angles")
        self.n = h.n
        self.h = h
        self._value = self._compile(h)
        self._grad = [self._compile(h.d_action(i)) for i in range(h.n)]
        self._hess = [[self._compile(h.d_action(i).d_action(j)) for j in range(h.n)]
                      for i in range(h.n)]

    @staticmethod
    def _compile(p: TrigPolyHamiltonian):
        _, A, C = p.to_arrays()
        return A, np.real(C)

    @staticmethod
    def _eval(comp, X: np.ndarray) -> np.ndarray:
        A, C = comp
        if len(C) == 0:
            return np.zeros(X.shape[:-1])
        mono = np.prod(X[..., None, :] ** A, axis=-1)
        return mono @ C

    def value(self, X) -> np.ndarray:
        return self._eval(self._value, np.asarray(X, float))

    def gradient(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        return np.stack([self._eval(c, X) for c in self._grad], axis=-1)

    def hessian(self, X) -> np.ndarray:
        X = np.asarray(X, float)
        rows = [np.stack([self._eval(c, X) for c in row], axis=-1) for row in self._hess]
        return np.stack(rows, axis=-2)


def c3_bound(h: TrigPolyHamiltonian, R: float = 1.0) -> float:
    """Majorant bound on ``|h|_{C^3(B)}``, B the sup-norm ball of radius R.

    The maximum over all partial derivatives of order 0 to 3 of
    ``sum |c_alpha| R^|alpha|``.
    """
    best = 0.0
    frontier = [h]
    for order in range(4):
        for p in frontier:
            best = max(best, sum(abs(c) * R ** sum(a) for (_, a, _), c in p.items()))
        if order < 3:
            frontier = [p.d_action(i) for p in frontier for i in range(h.n)]
    return best


# ---------------------------------------------------------------------------
# Subspaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubspaceFrame:
    """A subspace Lambda of dimension k whose complement has small integer generators.

    Attributes
    ----------
    n, k : int
    L : int
        Largest ``|v|_1`` among `complement_generators`; minimal over all
        spanning choices found by the enumeration.
    complement_generators : tuple of tuple of int
        n - k primitive integer vectors spanning the orthogonal complement.
    key : tuple
        Hermite normal form of the saturated complement lattice (canonical).
    lambda_generators : tuple of tuple of int
        Integer basis (Hermite normal form) of ``Lambda`` intersected with Z^n.
    basis_e, basis_f : ndarray
        Orthonormal bases (as columns) of Lambda and its complement.
    """

    n: int
    k: int
    L: int
    complement_generators: tuple
    key: tuple
    lambda_generators: tuple
    basis_e: np.ndarray = field(repr=False, compare=False)
    basis_f: np.ndarray = field(repr=False, compare=False)

    def label(self) -> str:
        """Complement generators, e.g. ``"1,-1"``; ``"full"`` for the whole space."""
        if not self.complement_generators:
            return "full"
        return ";".join(",".join(str(x) for x in v) for v in self.complement_generators)

    def lambda_label(self) -> str:
        return ";".join(",".join(str(x) for x in v) for v in self.lambda_generators)

    def to_dict(self) -> dict:
        return {"n": self.n, "k": self.k, "L": self.L,
                "complement_generators": [list(v) for v in self.complement_generators],
                "lambda_generators": [list(v) for v in self.lambda_generators]}


def primitive_vectors(n: int, L: int) -> list[tuple[int, ...]]:
    """Primitive integer vectors with ``|v|_1 <= L``, one per sign pair.

    The representative has its first nonzero entry positive. Ordered by
    ``|v|_1`` then lexicographically (descending).
    """
    out = []
    for v in itertools.product(range(-L, L + 1), repeat=n):
        s = sum(abs(x) for x in v)
        if s == 0 or s > L:
            continue
        first = next(x for x in v if x)
        if first < 0 or math.gcd(*v) != 1:
            continue
        out.append(v)
    out.sort(key=lambda v: (sum(abs(x) for x in v), tuple(-x for x in v)))
    return out


def _orthonormal(cols: np.ndarray) -> np.ndarray:
    if cols.shape[1] == 0:
        return np.zeros((cols.shape[0], 0))
    q, _ = np.linalg.qr(cols)
    return q[:, : cols.shape[1]]


def _make_frame(n: int, k: int, gens: Sequence[tuple[int, ...]]) -> SubspaceFrame:
    if k == n:
        ident = tuple(tuple(int(i == j) for j in range(n)) for i in range(n))
        return SubspaceFrame(n, n, 1, (), (), ident, np.eye(n), np.zeros((n, 0)))
    lam = integer_kernel(gens, n)
    key = tuple(tuple(r) for r in hermite_normal_form(integer_kernel(lam, n)))
    E = _orthonormal(np.array(lam, dtype=float).T)
    Fm = _orthonormal(np.array(gens, dtype=float).T)
    L = max(sum(abs(x) for x in v) for v in gens)
    return SubspaceFrame(n, k, L, tuple(tuple(v) for v in gens), key,
                         tuple(tuple(v) for v in lam), E, Fm)


def enumerate_subspaces(n: int, k: int, L: int) -> list[SubspaceFrame]:
    """All k-dimensional subspaces whose complement is spanned by ``|v|_1 <= L`` vectors.

    Each subspace appears once, with generators minimising the largest
    ``|v|_1``. ``k = n`` gives the whole space (no complement).
    """
    if not (1 <= k <= n) or L < 1:
        raise ValueError("need 1 <= k <= n and L >= 1")
    if k == n:
        return [_make_frame(n, n, ())]
    vecs = primitive_vectors(n, L)
    best: dict[tuple, tuple[int, tuple]] = {}
    for combo in itertools.combinations(vecs, n - k):
        if len(integer_kernel(combo, n)) != k:
            continue
        lam = integer_kernel(combo, n)
        key = tuple(tuple(r) for r in hermite_normal_form(integer_kernel(lam, n)))
        cost = max(sum(abs(x) for x in v) for v in combo)
        if key not in best or cost < best[key][0]:
            best[key] = (cost, combo)
    frames = [_make_frame(n, k, combo) for _, combo in best.values()]
    frames.sort(key=lambda fr: (fr.L, fr.complement_generators))
    return frames


def all_frames(n: int, L_max: int) -> list[SubspaceFrame]:
    """Frames for every k in 1..n with minimal L <= L_max."""
    out = []
    for k in range(1, n + 1):
        out.extend(enumerate_subspaces(n, k, L_max))
    return out


# ---------------------------------------------------------------------------
# Sampling B in adapted coordinates
# ---------------------------------------------------------------------------

def _odd(m: int) -> int:
    return m if m % 2 else m + 1


def grid_points(frame: SubspaceFrame, R: float, grid_res: int) -> np.ndarray:
    """Grid in (alpha, beta) coordinates mapped to actions, kept inside B.

    The coordinate box is ``[-sqrt(n) R, sqrt(n) R]^n`` with an odd number of
    points per axis so that the coordinate hyperplanes are sampled.
    """
    n = frame.n
    m = _odd(grid_res)
    ax = np.linspace(-math.sqrt(n) * R, math.sqrt(n) * R, m)
    coords = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    basis = np.hstack([frame.basis_e, frame.basis_f])
    pts = coords @ basis.T
    keep = np.max(np.abs(pts), axis=1) <= R * (1 + 1e-12)
    return pts[keep]


def _frame_stats(field_: PolyField, frame: SubspaceFrame, pts: np.ndarray):
    """Per point: projected gradient (k-vector) and sigma_min of the restricted Hessian."""
    G = field_.gradient(pts) @ frame.basis_e
    H = field_.hessian(pts)
    E = frame.basis_e
    Hr = np.einsum("ia,pij,jb->pab", E, H, E)
    sig = np.linalg.svd(Hr, compute_uv=False)[:, -1]
    return G, sig


# ---------------------------------------------------------------------------
# SDM check
# ---------------------------------------------------------------------------

@dataclass
class FrameRecord:
    frame: SubspaceFrame
    worst_point: np.ndarray
    grad_norm: float
    sigma_min: float
    critical_gamma: float
    violated: bool
    n_points: int

    @property
    def margin(self) -> float:
        """``min over points of max(|d_alpha h|, sigma_min)``."""
        return max(self.grad_norm, self.sigma_min)


@dataclass
class SdmReport:
    """Outcome of :func:`sdm_check`.

    ``critical_gamma`` is the exact threshold on the sampled points: the
    check passes for every gamma below it and is refuted at or above it.
    """

    gamma: float
    tau: float
    L_max: int
    grid_res: int
    random_points: int
    seed: int
    R: float
    M: float
    records: list[FrameRecord]
    atol: float = 0.0

    @property
    def refuted(self) -> bool:
        return any(r.violated for r in self.records)

    @property
    def passed(self) -> bool:
        return not self.refuted

    @property
    def verdict(self) -> str:
        return "refuted" if self.refuted else "no violation found at resolution"

    @property
    def critical_gamma(self) -> float:
        return min((r.critical_gamma for r in self.records), default=math.inf)

    @property
    def margin(self) -> float:
        """Smallest unweighted ``max(|d_alpha h|, sigma_min)`` over frames and points."""
        return min((r.margin for r in self.records), default=math.inf)

    def violations(self) -> list[FrameRecord]:
        return [r for r in self.records if r.violated]

    def rows(self) -> list[dict]:
        out = []
        for r in self.records:
            out.append({
                "k": r.frame.k, "L": r.frame.L, "generators": r.frame.label(),
                "subspace": r.frame.lambda_label(),
                "grad_norm": r.grad_norm, "sigma_min": r.sigma_min,
                "critical_gamma": r.critical_gamma,
                "verdict": "violated" if r.violated else "ok",
                "worst_point": " ".join(f"{x:.17g}" for x in r.worst_point),
            })
        return out

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "tau": self.tau, "L_max": self.L_max,
            "grid_res": self.grid_res, "random_points": self.random_points, "seed": self.seed,
            "R": self.R, "M": self.M, "atol": self.atol, "verdict": self.verdict,
            "critical_gamma": self.critical_gamma, "frames": self.rows(),
        }

    def write_csv(self, path) -> None:
        rows = self.rows()
        cols = ["k", "L", "generators", "subspace", "grad_norm", "sigma_min", "critical_gamma",
                "verdict", "worst_point"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({c: (f"{v:.17g}" if isinstance(v, float) else v) for c, v in row.items()})

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _random_ball(rng: np.random.Generator, count: int, n: int, R: float) -> np.ndarray:
    return rng.uniform(-R, R, size=(count, n))


def sdm_check(h: TrigPolyHamiltonian, gamma: float, tau: float, L_max: int,
              grid_res: int = 32, *, R: float = 1.0, random_points: int = 10_000,
              seed: int = 0, xi=None, atol: float | None = None) -> SdmReport:
    """Test the SDM alternative at (gamma, tau) for all frames with L <= L_max.

    Parameters
    ----------
    h : TrigPolyHamiltonian
        Angle-free Hamiltonian.
    gamma, tau : float
    L_max : int
    grid_res : int
        Points per axis of the (alpha, beta) grid, rounded up to odd, >= 8.
    R : float
        B is the sup-norm ball of radius R.
    random_points : int
        Additional uniform points in B, drawn from `seed`.
    xi : array, optional
        Check ``h(I) - xi . I`` instead of h.
    atol : float, optional
        Values up to atol count as zero (floating-point roundoff in the
        gradients and singular values). Default ``64 * machine eps * M``.

    Raises
    ------
    ValueError
        If h depends on the angles or grid_res < 8.
    """
    if not h.is_integrable():
        raise ValueError("sdm_check needs an angle-free (integrable) h")
    if grid_res < 8:
        raise ValueError("grid_res must be >= 8")
    field_ = PolyField(h)
    n = h.n
    M = c3_bound(h, R)
    atol = 64 * np.finfo(float).eps * M if atol is None else atol
    shift = np.zeros(n) if xi is None else np.asarray(xi, float)
    rng = np.random.default_rng(seed)
    extra = _random_ball(rng, random_points, n, R)
    records = []
    for frame in all_frames(n, L_max):
        pts = np.vstack([grid_points(frame, R, grid_res), extra])
        G, sig = _frame_stats(field_, frame, pts)
        g = np.linalg.norm(G - shift @ frame.basis_e, axis=1)
        score = np.maximum(g, sig)
        i = int(np.argmin(score))
        crit = max(float(score[i]) - atol, 0.0) * frame.L ** tau
        kappa = gamma * frame.L ** (-tau)
        records.append(FrameRecord(frame, pts[i], float(g[i]), float(sig[i]), crit,
                                   bool(score[i] <= kappa + atol), len(pts)))
    return SdmReport(gamma, tau, L_max, grid_res, random_points, seed, R, M, records, atol)


# ---------------------------------------------------------------------------
# Steepness along curves
# ---------------------------------------------------------------------------

@dataclass
class CurveWitness:
    """Sampled witness of the steepness conclusion along a curve.

    ``found`` is False for a counterexample report: no sample before the
    curve leaves the r-ball has projected gradient above ``r^2 / 2``.
    """

    curve: np.ndarray
    r: float
    t: np.ndarray
    t_star: float | None
    index: int | None
    projected_gradient: float
    threshold: float
    found: bool
    max_projected_gradient: float

    def check(self) -> bool:
        """The two conditions as literal assertions on the returned sample."""
        if not self.found:
            return False
        d = np.max(np.linalg.norm(self.curve[: self.index + 1] - self.curve[0], axis=1))
        return bool(d <= self.r * (1 + 1e-12) and self.projected_gradient > self.threshold)


def steep_witness(h: TrigPolyHamiltonian, frame: SubspaceFrame, gamma: float, tau: float,
                  curve, r: float, *, M: float | None = None, R: float = 1.0,
                  t=None, tol: float = 1e-9) -> CurveWitness:
    """Find the first sample along `curve` where ``|Pi_Lambda grad h| > r^2 / 2``.

    Parameters
    ----------
    curve : array of shape (m, n)
        Samples of a continuous path in an affine translate of the frame's
        subspace, inside B, with ``|Gamma(1) - Gamma(0)| = r``.
    r : float
        Must satisfy ``r < gamma L^-tau / (2 M)``.
    M : float, optional
        Bound on ``|h|_{C^3(B)}``; defaults to :func:`c3_bound`.
    t : array, optional
        Curve parameters of the samples; default uniform on [0, 1].
    """
    curve = np.asarray(curve, float)
    if curve.ndim != 2 or curve.shape[1] != h.n:
        raise ValueError("curve must be an (m, n) array of action samples")
    M = c3_bound(h, R) if M is None else M
    bound = gamma * frame.L ** (-tau) / (2 * M)
    if not r < bound:
        raise ValueError(f"r = {r} violates r < gamma L^-tau / (2M) = {bound:.6g}")
    if not 0 < r < 1:
        raise ValueError("need 0 < r < 1")
    t = np.linspace(0.0, 1.0, len(curve)) if t is None else np.asarray(t, float)
    disp = curve - curve[0]
    off = np.linalg.norm(disp @ frame.basis_f, axis=1) if frame.basis_f.shape[1] else np.zeros(1)
    if np.max(off) > tol:
        raise ValueError("curve leaves the affine subspace through its first point")
    if np.max(np.abs(curve)) > R * (1 + tol):
        raise ValueError("curve leaves B")
    sep = np.linalg.norm(curve[-1] - curve[0])
    if abs(sep - r) > tol * max(1.0, r):
        raise ValueError(f"endpoint separation {sep:.6g} differs from r = {r}")

    P = frame.basis_e @ frame.basis_e.T
    proj = np.linalg.norm(PolyField(h).gradient(curve) @ P, axis=1)
    dist = np.linalg.norm(disp, axis=1)
    thr = r * r / 2
    inside = np.cumprod(dist <= r * (1 + 1e-12)).astype(bool)
    hits = np.nonzero(inside & (proj > thr))[0]
    if len(hits):
        i = int(hits[0])
        return CurveWitness(curve, r, t, float(t[i]), i, float(proj[i]), thr, True,
                            float(np.max(proj)))
    return CurveWitness(curve, r, t, None, None, float(np.max(proj)), thr, False,
                        float(np.max(proj)))


# ---------------------------------------------------------------------------
# Prevalence
# ---------------------------------------------------------------------------

@dataclass
class PrevalenceTable:
    """Bad-parameter fractions for ``h - xi . I`` with xi uniform in [-1, 1]^n."""

    gammas: list[float]
    bad_fraction: list[float]
    bad_count: list[int]
    samples: int
    tau: float
    L_max: int
    grid_res: int
    seed: int

    def sigma(self, i: int) -> float:
        p = self.bad_fraction[i]
        return math.sqrt(max(p * (1 - p), 1.0 / self.samples) / self.samples)

    def fit_sqrt(self) -> float:
        """C with ``bad <= C sqrt(gamma)`` at the largest gamma."""
        i = int(np.argmax(self.gammas))
        return self.bad_fraction[i] / math.sqrt(self.gammas[i])

    def sqrt_law_holds(self, nsigma: float = 3.0) -> bool:
        C = self.fit_sqrt()
        return all(p <= C * math.sqrt(g) + nsigma * self.sigma(i)
                   for i, (g, p) in enumerate(zip(self.gammas, self.bad_fraction)))

    def monotone(self) -> bool:
        order = np.argsort(self.gammas)
        vals = [self.bad_fraction[i] for i in order]
        return all(a <= b for a, b in zip(vals, vals[1:]))

    def rows(self) -> list[dict]:
        return [{"gamma": g, "bad_fraction": p, "bad_count": c, "sigma": self.sigma(i)}
                for i, (g, p, c) in enumerate(zip(self.gammas, self.bad_fraction, self.bad_count))]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["gamma", "bad_fraction", "bad_count", "sigma"],
                               lineterminator="\n")
            w.writeheader()
            for row in self.rows():
                w.writerow({c: (f"{v:.17g}" if isinstance(v, float) else v) for c, v in row.items()})


def consistent(a: PrevalenceTable, b: PrevalenceTable, nsigma: float = 3.0) -> bool:
    """Two tables agree within nsigma combined binomial errors at every gamma."""
    for i in range(len(a.gammas)):
        p = (a.bad_count[i] + b.bad_count[i]) / (a.samples + b.samples)
        p = max(p, 1.0 / (a.samples + b.samples))
        s = math.sqrt(p * (1 - p) * (1 / a.samples + 1 / b.samples))
        if abs(a.bad_fraction[i] - b.bad_fraction[i]) > nsigma * s:
            return False
    return True


def prevalence_mc(h: TrigPolyHamiltonian, gamma_list: Sequence[float], tau: float,
                  L_max: int, samples: int = 10_000, seed: int = 0, *,
                  grid_res: int = 32, R: float = 1.0, random_points: int = 0,
                  chunk: int = 512) -> PrevalenceTable:
    """Fraction of xi in [-1, 1]^n for which ``h - xi . I`` fails the SDM check.

    Each sample is judged exactly as :func:`sdm_check` would judge it on the
    same point set (grid plus `random_points` extra points from `seed`). The
    same xi samples are used for every gamma, so the fractions are monotone.

    Raises
    ------
    ValueError
        If ``tau <= 2 (n^2 + 1)`` or samples < 1000.
    """
    n = h.n
    if tau <= 2 * (n * n + 1):
        raise ValueError(f"prevalence needs tau > 2(n^2+1) = {2 * (n * n + 1)}")
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    field_ = PolyField(h)
    rng = np.random.default_rng(seed)
    extra = _random_ball(rng, random_points, n, R)
    xis = rng.uniform(-1.0, 1.0, size=(samples, n))
    gammas = [float(g) for g in gamma_list]
    bad = np.zeros((len(gammas), samples), dtype=bool)
    for frame in all_frames(n, L_max):
        pts = np.vstack([grid_points(frame, R, grid_res), extra])
        G, sig = _frame_stats(field_, frame, pts)
        Z = xis @ frame.basis_e
        for gi, gamma in enumerate(gammas):
            kappa = gamma * frame.L ** (-tau)
            sel = sig <= kappa
            if not np.any(sel):
                continue
            Gs = G[sel]
            for lo in range(0, samples, chunk):
                d = np.linalg.norm(Gs[None, :, :] - Z[lo:lo + chunk, None, :], axis=2)
                bad[gi, lo:lo + chunk] |= np.min(d, axis=1) <= kappa
    counts = [int(b.sum()) for b in bad]
    return PrevalenceTable(gammas, [c / samples for c in counts], counts, samples, tau,
                           L_max, grid_res, seed)
