"""Symplectic integration of ``H = h(I) + P(theta, I)`` and drift diagnostics.

The default scheme is a symmetric splitting: half a step of the perturbation
flow (symplectic Euler, implicit in I), a full step of the exact flow of h
(``theta += grad h(I) dt``), then half a step of the adjoint Euler map
(implicit in theta). When P does not depend on the actions both half steps
are exact kicks ``I -= dt/2 d_theta P``. The composition is symmetric, hence
time reversible and second order.

Angles use the unit torus with ``exp(2 pi i k.theta)`` modes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .diophantine import ApproximationCertificate, dirichlet_approx
from .trig_hamiltonian import TrigPolyHamiltonian
from .steepness import PolyField

__all__ = [
    "SCHEMES",
    "DriftTrace",
    "ScalingTable",
    "ResonanceTrace",
    "integrate",
    "flow_map",
    "stability_time",
    "resonance_trace",
    "fast_drift_time",
    "loglog_slope",
]

SCHEMES = ("strang_split", "symplectic_euler")
_TWO_PI = 2.0 * math.pi
_FP_TOL = 1e-14
_FP_MAXIT = 50


# ---------------------------------------------------------------------------
# Compiled kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _monomial(I, a):
    v = 1.0
    for i in range(I.shape[0]):
        for _ in range(a[i]):
            v *= I[i]
    return v


@numba.njit(cache=True)
def _dmonomial(I, a, j):
    # d/dI_j of I**a
    if a[j] == 0:
        return 0.0
    v = float(a[j])
    for i in range(I.shape[0]):
        e = a[i] - 1 if i == j else a[i]
        for _ in range(e):
            v *= I[i]
    return v


@numba.njit(cache=True)
def _pert_grads(theta, I, K, A, C, dth, dI):
    """Gradients of ``Re sum C exp(2 pi i k.theta) I**a`` in theta and I."""
    n = theta.shape[0]
    for i in range(n):
        dth[i] = 0.0
        dI[i] = 0.0
    for m in range(K.shape[0]):
        ph = 0.0
        for i in range(n):
            ph += K[m, i] * theta[i]
        ph *= 2.0 * np.pi
        c = C[m] * complex(np.cos(ph), np.sin(ph))
        mono = _monomial(I, A[m])
        for i in range(n):
            if K[m, i] != 0:
                # d/dtheta_i of Re(c mono) = Re(2 pi i k_i c) mono
                dth[i] += -2.0 * np.pi * K[m, i] * c.imag * mono
            if A[m, i] != 0:
                dI[i] += c.real * _dmonomial(I, A[m], i)


@numba.njit(cache=True)
def _eval_full(theta, I, K, A, C):
    s = 0.0
    n = theta.shape[0]
    for m in range(K.shape[0]):
        ph = 0.0
        for i in range(n):
            ph += K[m, i] * theta[i]
        ph *= 2.0 * np.pi
        s += (C[m] * complex(np.cos(ph), np.sin(ph))).real * _monomial(I, A[m])
    return s


@numba.njit(cache=True)
def _h_grad(I, gidx, GA, GC, out):
    for i in range(out.shape[0]):
        out[i] = 0.0
    for m in range(GA.shape[0]):
        out[gidx[m]] += GC[m] * _monomial(I, GA[m])


@numba.njit(cache=True)
def _euler_a(theta, I, tau, K, A, C, theta_only, dth, dI):
    # I' = I - tau dP/dtheta(theta, I'), theta' = theta + tau dP/dI(theta, I')
    n = theta.shape[0]
    if theta_only:
        _pert_grads(theta, I, K, A, C, dth, dI)
        for i in range(n):
            I[i] -= tau * dth[i]
        return 0
    I_old = I.copy()
    for it in range(_FP_MAXIT):
        _pert_grads(theta, I, K, A, C, dth, dI)
        err = 0.0
        for i in range(n):
            new = I_old[i] - tau * dth[i]
            err = max(err, abs(new - I[i]))
            I[i] = new
        if err <= _FP_TOL * max(1.0, np.max(np.abs(I))):
            break
    _pert_grads(theta, I, K, A, C, dth, dI)
    for i in range(n):
        theta[i] += tau * dI[i]
    return it


@numba.njit(cache=True)
def _euler_b(theta, I, tau, K, A, C, theta_only, dth, dI):
    # theta' = theta + tau dP/dI(theta', I), I' = I - tau dP/dtheta(theta', I)
    n = theta.shape[0]
    if theta_only:
        _pert_grads(theta, I, K, A, C, dth, dI)
        for i in range(n):
            I[i] -= tau * dth[i]
        return 0
    th_old = theta.copy()
    for it in range(_FP_MAXIT):
        _pert_grads(theta, I, K, A, C, dth, dI)
        err = 0.0
        for i in range(n):
            new = th_old[i] + tau * dI[i]
            err = max(err, abs(new - theta[i]))
            theta[i] = new
        if err <= _FP_TOL * max(1.0, np.max(np.abs(theta))):
            break
    _pert_grads(theta, I, K, A, C, dth, dI)
    for i in range(n):
        I[i] -= tau * dth[i]
    return it


@numba.njit(cache=True)
def _step(theta, I, dt, scheme, K, A, C, theta_only, gidx, GA, GC, dth, dI, grad):
    if scheme == 0:
        _euler_a(theta, I, 0.5 * dt, K, A, C, theta_only, dth, dI)
        _h_grad(I, gidx, GA, GC, grad)
        for i in range(theta.shape[0]):
            theta[i] += dt * grad[i]
        _euler_b(theta, I, 0.5 * dt, K, A, C, theta_only, dth, dI)
    else:
        _euler_a(theta, I, dt, K, A, C, theta_only, dth, dI)
        _h_grad(I, gidx, GA, GC, grad)
        for i in range(theta.shape[0]):
            theta[i] += dt * grad[i]


@numba.njit(cache=True)
def _run(theta0, I0, dt, nsteps, stride, scheme, K, A, C, theta_only, gidx, GA, GC,
         EK, EA, EC, delta, stop_on_escape):
    n = theta0.shape[0]
    nsamp = nsteps // stride + 2
    times = np.zeros(nsamp)
    th_s = np.zeros((nsamp, n))
    I_s = np.zeros((nsamp, n))
    drift_s = np.zeros(nsamp)
    energy_s = np.zeros(nsamp)
    theta = theta0.copy()
    I = I0.copy()
    dth = np.zeros(n)
    dI = np.zeros(n)
    grad = np.zeros(n)
    E0 = _eval_full(theta, I, EK, EA, EC)
    th_s[0] = theta
    I_s[0] = I
    running = 0.0
    prev = 0.0
    escape = -1.0
    status = 0
    k = 1
    done = 0
    for step in range(1, nsteps + 1):
        _step(theta, I, dt, scheme, K, A, C, theta_only, gidx, GA, GC, dth, dI, grad)
        ok = True
        for i in range(n):
            if not (np.isfinite(theta[i]) and np.isfinite(I[i])):
                ok = False
        if not ok:
            status = 1
            break
        done = step
        d = 0.0
        for i in range(n):
            d = max(d, abs(I[i] - I0[i]))
        if d > running:
            running = d
        stop = False
        if escape < 0 and d >= delta:
            # linear interpolation of the crossing inside the last step
            escape = (step - 1) * dt + dt * (delta - prev) / (d - prev)
            stop = stop_on_escape
        prev = d
        if step % stride == 0 or stop:
            times[k] = step * dt
            th_s[k] = theta
            I_s[k] = I
            drift_s[k] = running
            energy_s[k] = abs(_eval_full(theta, I, EK, EA, EC) - E0)
            k += 1
        if stop:
            break
    return times[:k], th_s[:k], I_s[:k], drift_s[:k], energy_s[:k], escape, running, status, \
        done, theta, I


@numba.njit(cache=True)
def _flow(theta, I, dt, nsteps, scheme, K, A, C, theta_only, gidx, GA, GC):
    n = theta.shape[0]
    dth = np.zeros(n)
    dI = np.zeros(n)
    grad = np.zeros(n)
    for _ in range(nsteps):
        _step(theta, I, dt, scheme, K, A, C, theta_only, gidx, GA, GC, dth, dI, grad)
    return theta, I


# ---------------------------------------------------------------------------
# Python front end
# ---------------------------------------------------------------------------

def _compile(H: TrigPolyHamiltonian):
    h = H.integrable_part()
    P = H.angular_part()
    K, A, C = P.to_arrays()
    theta_only = bool(len(A) == 0 or not A.any())
    gidx, GA, GC = [], [], []
    for i in range(H.n):
        _, a, c = h.d_action(i).to_arrays()
        gidx.extend([i] * len(c))
        GA.extend(a.tolist())
        GC.extend(np.real(c).tolist())
    gidx = np.array(gidx, dtype=np.int64)
    GA = np.array(GA, dtype=np.int64).reshape(-1, H.n)
    GC = np.array(GC, dtype=np.float64)
    EK, EA, EC = H.to_arrays()
    return (K, A, C, theta_only, gidx, GA, GC), (EK, EA, EC)


def _scheme_code(scheme: str) -> int:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    return SCHEMES.index(scheme)


@dataclass
class DriftTrace:
    """Sampled trajectory with drift statistics.

    Attributes
    ----------
    times : ndarray
        Sample times (multiples of ``stride * dt``; a final off-grid sample is
        added when the run stops at an escape).
    actions, angles : ndarray, shape (samples, n)
        Angles are reduced mod 1.
    drift : ndarray
        Running sup over all steps (not only samples) of ``|I(t) - I(0)|_inf``.
    energy_error : ndarray
        ``|H(t) - H(0)|`` at the samples.
    escape_time : float or None
        First time the drift reaches delta (linear interpolation inside the
        step), None if censored.
    censored : bool
    status : str
        ``"ok"``, ``"escaped"`` (stopped at escape) or ``"aborted"``
        (non-finite state; the trace ends at the last valid sample).
    """

    times: np.ndarray
    actions: np.ndarray
    angles: np.ndarray
    drift: np.ndarray
    energy_error: np.ndarray
    escape_time: float | None
    censored: bool
    delta: float
    horizon: float
    dt: float
    scheme: str
    status: str
    max_drift: float
    final_theta: np.ndarray = field(repr=False)
    final_I: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.actions.shape[1]

    def write_csv(self, path, long_format: bool = False) -> None:
        n = self.n
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if long_format:
                w.writerow(["t", "variable", "value"])
                for j, t in enumerate(self.times):
                    for i in range(n):
                        w.writerow([_g(t), f"I{i + 1}", _g(self.actions[j, i])])
                    w.writerow([_g(t), "drift", _g(self.drift[j])])
                    w.writerow([_g(t), "energy_err", _g(self.energy_error[j])])
                return
            w.writerow(["t"] + [f"I{i + 1}" for i in range(n)] + ["drift", "energy_err"])
            for j, t in enumerate(self.times):
                w.writerow([_g(t)] + [_g(x) for x in self.actions[j]]
                           + [_g(self.drift[j]), _g(self.energy_error[j])])


def _g(x) -> str:
    return f"{float(x):.17g}"


def integrate(H: TrigPolyHamiltonian, init, dt: float, horizon: float,
              scheme: str = "strang_split", *, stride: int = 1, delta: float = math.inf,
              stop_on_escape: bool = False) -> DriftTrace:
    """Integrate H from ``init = (theta0, I0)`` up to `horizon`.

    Parameters
    ----------
    H : TrigPolyHamiltonian
        The angle-free terms form h, the rest is the perturbation.
    init : pair of arrays
    dt : float
        Positive step.
    horizon : float
        Final time; ``round(horizon / dt)`` steps are taken.
    scheme : {"strang_split", "symplectic_euler"}
    stride : int
        Keep every stride-th step.
    delta : float
        Drift threshold for the escape time.
    stop_on_escape : bool
        Stop at the first step where the drift reaches delta.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    code = _scheme_code(scheme)
    theta0, I0 = (np.asarray(x, dtype=np.float64).copy() for x in init)
    if theta0.shape != (H.n,) or I0.shape != (H.n,):
        raise ValueError(f"initial condition must have shape ({H.n},)")
    kern, energy = _compile(H)
    nsteps = int(round(horizon / dt))
    times, th, Is, drift, en, esc, running, status, done, thf, If = _run(
        theta0, I0, float(dt), nsteps, int(stride), code, *kern, *energy,
        float(delta), bool(stop_on_escape))
    escape = None if esc < 0 else float(esc)
    if status == 1:
        state = "aborted"
    elif escape is not None and stop_on_escape:
        state = "escaped"
    else:
        state = "ok"
    return DriftTrace(times, Is, np.mod(th, 1.0), drift, en, escape, escape is None, delta,
                      float(horizon), float(dt), scheme, state, float(running), thf, If)


def flow_map(H: TrigPolyHamiltonian, theta, I, dt: float, nsteps: int,
             scheme: str = "strang_split"):
    """Unreduced state after nsteps steps of size dt (dt may be negative)."""
    kern, _ = _compile(H)
    th = np.asarray(theta, dtype=np.float64).copy()
    act = np.asarray(I, dtype=np.float64).copy()
    return _flow(th, act, float(dt), int(nsteps), _scheme_code(scheme), *kern)


# ---------------------------------------------------------------------------
# Stability times
# ---------------------------------------------------------------------------

def fast_drift_time(eps: float, delta: float, phi0: float) -> float:
    """Escape time of the resonant solution ``I(t) = I0 - 2 pi eps cos(2 pi phi0) t (1, 1)``."""
    return delta / (_TWO_PI * eps * abs(math.cos(_TWO_PI * phi0)))


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class ScalingTable:
    """Escape times per perturbation size."""

    eps: list[float]
    t_star: list[float | None]
    censored: list[bool]
    max_drift: list[float]
    delta: float
    horizon: float
    dt: float

    @property
    def slope(self) -> float | None:
        pts = [(e, t) for e, t in zip(self.eps, self.t_star) if t is not None]
        if len(pts) < 2:
            return None
        return loglog_slope(*zip(*pts))

    def rows(self) -> list[dict]:
        return [{"eps": e, "t_star": t, "censored": c, "max_drift": d}
                for e, t, c, d in zip(self.eps, self.t_star, self.censored, self.max_drift)]

    def write_csv(self, path, long_format: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if long_format:
                w.writerow(["eps", "variable", "value"])
                for row in self.rows():
                    w.writerow([_g(row["eps"]), "t_star",
                                "" if row["t_star"] is None else _g(row["t_star"])])
                    w.writerow([_g(row["eps"]), "censored", int(row["censored"])])
                    w.writerow([_g(row["eps"]), "max_drift", _g(row["max_drift"])])
                return
            w.writerow(["eps", "t_star", "censored", "max_drift"])
            for row in self.rows():
                w.writerow([_g(row["eps"]), "" if row["t_star"] is None else _g(row["t_star"]),
                            int(row["censored"]), _g(row["max_drift"])])

    def to_dict(self) -> dict:
        return {"delta": self.delta, "horizon": self.horizon, "dt": self.dt,
                "slope": self.slope, "rows": self.rows()}


def _one_run(args):
    H, init, eps, delta, horizon, dt, scheme = args
    tr = integrate(H.instantiate(eps), init, dt, horizon, scheme, delta=delta,
                   stop_on_escape=True, stride=max(1, int(round(horizon / dt)) // 1000))
    return tr.escape_time, tr.max_drift


def stability_time(H: TrigPolyHamiltonian, init, epsilon_list: Sequence[float], delta: float = 0.1,
                   horizon: float = 1e6, *, dt: float = 0.01, scheme: str = "strang_split",
                   R: float = 1.0, jobs: int = 1) -> ScalingTable:
    """First time the drift reaches delta, for each perturbation size.

    H is a template: terms of grade g are multiplied by ``eps**g`` (see
    :meth:`TrigPolyHamiltonian.instantiate`). Runs that do not escape before
    `horizon` are reported as censored.
    """
    if not 0 < delta < R / 2:
        raise ValueError(f"delta must lie in (0, R/2) = (0, {R / 2})")
    eps = [float(e) for e in epsilon_list]
    if any(e <= 0 for e in eps):
        raise ValueError("perturbation sizes must be positive")
    tasks = [(H, init, e, delta, horizon, dt, scheme) for e in eps]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_one_run, tasks))
    else:
        out = [_one_run(t) for t in tasks]
    return ScalingTable(eps, [o[0] for o in out], [o[0] is None for o in out],
                        [o[1] for o in out], delta, horizon, dt)


# ---------------------------------------------------------------------------
# Resonance trace
# ---------------------------------------------------------------------------

@dataclass
class ResonanceTrace:
    """Per-sample Dirichlet certificates of ``grad h(I(t))`` and window visits.

    Attributes
    ----------
    frequencies : ndarray, shape (samples, n)
    certificates : list of ApproximationCertificate or None
        None where ``grad h`` vanishes.
    directions : list of tuple or None
        Primitive integer direction ``T omega`` per sample.
    window_constants : list of float
    flags : ndarray of bool, shape (samples, len(window_constants))
        ``|grad h - omega_anchor| < c r_anchor`` for the anchor of the
        current visit, ``r = T^-1 Q^(-1/(n-1))`` its approximation radius.
    visits : list of dict
        Consecutive stretches attached to one anchor: its direction, period,
        first and last sample times and duration.
    """

    times: np.ndarray
    frequencies: np.ndarray
    certificates: list
    directions: list
    window_constants: list
    flags: np.ndarray
    visits: list
    Q: float

    def all_certified(self) -> bool:
        return all(c is None or c.check() for c in self.certificates)

    def distinct_directions(self) -> list:
        seen = []
        for v in self.visits:
            if v["direction"] not in seen:
                seen.append(v["direction"])
        return seen


def resonance_trace(trace: DriftTrace, h: TrigPolyHamiltonian, Q: float,
                    window_constants: Sequence[float] = (1.0, 2.0, 4.0), *,
                    visit_window: float | None = None) -> ResonanceTrace:
    """Dirichlet-approximate ``grad h`` along a trace and record resonance visits.

    A visit starts at a sample's own certificate and lasts while
    ``|grad h - omega| < visit_window * r`` (default: the largest window
    constant); the next sample outside starts a new visit.
    """
    if len(trace.times) == 0:
        raise ValueError("empty trace")
    consts = [float(c) for c in window_constants]
    vw = max(consts) if visit_window is None else float(visit_window)
    h = h.integrable_part()
    freqs = PolyField(h).gradient(trace.actions)
    n = h.n
    certs, dirs = [], []
    flags = np.zeros((len(freqs), len(consts)), dtype=bool)
    visits: list[dict] = []
    anchor = None
    for j, w in enumerate(freqs):
        if not np.any(w):
            certs.append(None)
            dirs.append(None)
            anchor = None
            continue
        cert = dirichlet_approx(w, Q)
        certs.append(cert)
        dirs.append(cert.integer_direction)
        radius = lambda c: float(1 / c.period) * float(c.quality) ** (-1.0 / (n - 1))
        if anchor is not None:
            dist = float(np.max(np.abs(w - anchor.result.to_array())))
            if dist >= vw * radius(anchor):
                anchor = None
        if anchor is None:
            anchor = cert
            visits.append({"direction": cert.integer_direction, "period": cert.period,
                           "start": float(trace.times[j]), "end": float(trace.times[j])})
        visits[-1]["end"] = float(trace.times[j])
        dist = float(np.max(np.abs(w - anchor.result.to_array())))
        flags[j] = [dist < c * radius(anchor) for c in consts]
    for v in visits:
        v["duration"] = v["end"] - v["start"]
    return ResonanceTrace(trace.times, freqs, certs, dirs, consts, flags, visits, float(Q))
