"""Command-line runner.

Every command except ``approx`` writes a run directory
``<root>/<timestamp>-<command>/`` holding ``manifest.json`` (resolved
parameters, seed, library version, copied Hamiltonian) and CSV/JSON
artifacts. The root defaults to ``$NEKHOROSHEV_LAB_RUNS`` or ``./runs``.
``rerun <dir>`` replays a manifest and compares the CSVs byte for byte.

Exit codes: 0 success, 1 refuted or failed report, 2 usage error.
Parameters can also come from an INI file (``--config``) with one section per
command; explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import shutil
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from . import __version__
from .constants import Constants
from .diophantine import PeriodicVector, dirichlet_approx
from .dynamics import SCHEMES, integrate, resonance_trace, stability_time
from .exponents import condition_ledger, exponent_plan
from .normal_form import DomainNestingError, StepRejected, nearly_periodic_domain, normal_form
from .steepness import prevalence_mc, sdm_check
from .trig_hamiltonian import AnalyticDomain, TrigPolyHamiltonian

ENV_ROOT = "NEKHOROSHEV_LAB_RUNS"


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _numbers(text: str) -> list:
    """Comma-separated numbers; entries with '/' are kept as exact fractions."""
    out = []
    for x in str(text).split(","):
        x = x.strip()
        if not x:
            continue
        try:
            out.append(Fraction(x) if "/" in x else float(x))
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {x!r} as a number")
    return out


def _omegas(text: str) -> list[PeriodicVector]:
    """Rational vectors separated by ';', e.g. ``1,1;1,0`` or ``1,1/2``."""
    try:
        return [PeriodicVector.from_rationals([Fraction(x.strip()) for x in part.split(",")])
                for part in str(text).split(";") if part.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad frequency list {text!r}: {exc}")


def _g(x) -> str:
    return f"{float(x):.17g}"


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------

def _run_dir(root: str | None, command: str) -> Path:
    base = Path(root or os.environ.get(ENV_ROOT) or "runs")
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
    path = base / f"{stamp}-{command}"
    i = 1
    while path.exists():
        path = base / f"{stamp}-{i}-{command}"
        i += 1
    path.mkdir(parents=True)
    return path


def _plain(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, list) and v and isinstance(v[0], PeriodicVector):
        return ";".join(",".join(str(x) for x in w.value) for w in v)
    if isinstance(v, list):
        return [_plain(x) for x in v]
    return v


def _params(args: argparse.Namespace) -> dict:
    """JSON-safe parameters; strings re-parse through the matching flag type."""
    skip = {"func", "command", "out", "config"}
    return {k: _plain(v) for k, v in vars(args).items() if k not in skip}


def _write_manifest(path: Path, command: str, args, files: list[str], extra: dict | None = None):
    manifest = {
        "command": command,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "seed": getattr(args, "seed", None),
        "params": _params(args),
        "files": sorted(files),
    }
    if extra:
        manifest.update(extra)
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _load_h(args, run: Path | None) -> TrigPolyHamiltonian:
    src = Path(args.h)
    if not src.exists():
        raise UsageError(f"Hamiltonian file not found: {src}")
    H = TrigPolyHamiltonian.load(src)
    if run is not None:
        shutil.copyfile(src, run / "hamiltonian.json")
        args.h = str((run / "hamiltonian.json").resolve())
    return H


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, default=str) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_approx(args) -> int:
    """Print the Dirichlet certificate of a vector as JSON."""
    if args.file:
        data = json.loads(Path(args.file).read_text())
        v, Q = data["v"], data["Q"]
    else:
        if args.v is None or args.Q is None:
            raise UsageError("approx needs --v and --Q (or --file)")
        v, Q = args.v, args.Q
    if all(x == 0 for x in v):
        raise UsageError("zero vector cannot be approximated")
    cert = dirichlet_approx(v, Q)
    print(cert.to_json(indent=2))
    return 0


def cmd_nf(args) -> int:
    run = _run_dir(args.out, "nf")
    H = _load_h(args, run)
    if args.eps is not None:
        H = H.instantiate(args.eps)
    omegas = args.omegas
    k = len(omegas)
    rs = args.r if len(args.r) == k else args.r * k if len(args.r) == 1 else None
    ss = args.s if len(args.s) == k else args.s * k if len(args.s) == 1 else None
    if rs is None or ss is None:
        raise UsageError("--r and --s need one value or one per frequency")
    consts = Constants(step=args.step_constant, window=args.window)
    if not args.ball:
        h = H.grade_part(0)
        doms = [nearly_periodic_domain(h, w, r, s, args.R, args.window)
                for w, r, s in zip(omegas, rs, ss)]
    else:
        doms = [AnalyticDomain(r, s, args.R) for r, s in zip(rs, ss)]
    status, message = "ok", ""
    try:
        res = normal_form(H, omegas, doms, args.m, args.N, constants=consts,
                          check_nesting=not args.no_nesting)
    except (StepRejected, DomainNestingError) as exc:
        status, message, res = "rejected", str(exc), None
    files = ["hamiltonian.json", "summary.json"]
    summary = {"status": status, "message": message}
    if res is not None:
        res.write_csv(run / "steps.csv")
        (run / "transformed.json").write_text(res.transformed.to_json(indent=1) + "\n")
        files += ["steps.csv", "transformed.json"]
        summary.update(
            steps=res.steps, g_modes_resonant=res.g_modes_resonant(),
            g_modes=sorted(res.g.modes()), final_remainder=res.remainder_norms[-1],
            max_contraction=max(res.contractions(), default=0.0),
            domains=[{"r": d.r, "s": d.s, "center": d.center} for d in doms])
    _dump(run / "summary.json", summary)
    _write_manifest(run, "nf", args, files)
    print(f"{status}: {run}" + (f" ({message})" if message else ""))
    return 0 if status == "ok" else 1


def cmd_sdm(args) -> int:
    run = _run_dir(args.out, "sdm")
    H = _load_h(args, run)
    h = H.grade_part(0) if not H.grade_part(0).is_zero() else H.integrable_part()
    rep = sdm_check(h, args.gamma, args.tau, args.Lmax, args.grid, R=args.R,
                    random_points=args.random_points, seed=args.seed)
    rep.write_csv(run / "sdm.csv")
    (run / "sdm.json").write_text(rep.to_json(indent=2) + "\n")
    files = ["hamiltonian.json", "sdm.csv", "sdm.json"]
    if args.prevalence:
        tab = prevalence_mc(h, args.prevalence, args.tau, args.Lmax, args.samples, args.seed,
                            grid_res=args.grid, R=args.R)
        tab.write_csv(run / "prevalence.csv")
        _dump(run / "prevalence.json", {"rows": tab.rows(), "fit_sqrt": tab.fit_sqrt(),
                                        "sqrt_law_holds": tab.sqrt_law_holds(),
                                        "monotone": tab.monotone(), "seed": args.seed})
        files += ["prevalence.csv", "prevalence.json"]
    _write_manifest(run, "sdm", args, files)
    print(f"{rep.verdict}: critical gamma {_g(rep.critical_gamma)}")
    for r in rep.violations():
        print(f"  violated on subspace {r.frame.lambda_label()} "
              f"(complement {r.frame.label()}, L={r.frame.L})")
    print(run)
    return 1 if rep.refuted else 0


def _init(args, n: int):
    th = args.theta0 if args.theta0 is not None else [0.0] * n
    I0 = args.I0 if args.I0 is not None else [0.0] * n
    if len(th) != n or len(I0) != n:
        raise UsageError(f"initial condition needs {n} angles and {n} actions")
    return th, I0


def cmd_drift(args) -> int:
    run = _run_dir(args.out, "drift")
    H = _load_h(args, run)
    Hn = H.instantiate(args.eps)
    init = _init(args, H.n)
    tr = integrate(Hn, init, args.dt, args.horizon, args.scheme, stride=args.stride,
                   delta=args.delta, stop_on_escape=args.stop_on_escape)
    tr.write_csv(run / "trace.csv", long_format=args.long)
    files = ["hamiltonian.json", "trace.csv", "summary.json"]
    summary = {"status": tr.status, "escape_time": tr.escape_time, "censored": tr.censored,
               "max_drift": tr.max_drift, "delta": tr.delta, "horizon": tr.horizon,
               "dt": tr.dt, "scheme": tr.scheme}
    if args.Q is not None:
        rt = resonance_trace(tr, H.grade_part(0), args.Q)
        summary["resonance_visits"] = rt.visits
        summary["certificates_hold"] = rt.all_certified()
    _dump(run / "summary.json", summary)
    _write_manifest(run, "drift", args, files)
    print(f"{tr.status}: escape time {tr.escape_time}, max drift {_g(tr.max_drift)}\n{run}")
    return 1 if tr.status == "aborted" else 0


def cmd_scaling(args) -> int:
    run = _run_dir(args.out, "scaling")
    H = _load_h(args, run)
    init = _init(args, H.n)
    tab = stability_time(H, init, args.eps, args.delta, args.horizon, dt=args.dt,
                         scheme=args.scheme, R=args.R, jobs=args.jobs)
    tab.write_csv(run / "scaling.csv", long_format=args.long)
    _dump(run / "scaling.json", tab.to_dict())
    _write_manifest(run, "scaling", args, ["hamiltonian.json", "scaling.csv", "scaling.json"])
    slope = tab.slope
    print(f"slope {'n/a' if slope is None else _g(slope)}\n{run}")
    return 0


def cmd_exponents(args) -> int:
    plan = exponent_plan(args.n, args.tau)
    A = ", ".join(str(x) for x in plan.a_seq)
    print(f"a_j = {A}")
    print(f"a = b = {plan.a} ({float(plan.a):.17g})")
    print(f"generic value (2n)^(-3n)/3 = {plan.theorem_value}")
    run = _run_dir(args.out, "exponents")
    consts = Constants()
    if args.constants:
        consts = Constants.from_dict(json.loads(Path(args.constants).read_text()))
    kw = dict(R=args.R, r=args.r, s=args.s, M=args.M, constants=consts)
    if args.log10_eps is not None:
        led = condition_ledger(args.n, args.tau, args.gamma, 0.0,
                               log_eps=args.log10_eps * math.log(10), **kw)
    else:
        led = condition_ledger(args.n, args.tau, args.gamma, args.eps, **kw)
    print(led.table())
    _dump(run / "exponents.json", plan.to_dict())
    (run / "ledger.json").write_text(led.to_json(indent=2) + "\n")
    with open(run / "ledger.csv", "w", newline="") as fh:
        fh.write("row,kind,passed,value,exponent,log10_threshold\n")
        for r in led.rows:
            if r.kind == "exponent":
                fh.write(f"{r.label()},exponent,{int(r.passed)},{r.value},,\n")
            else:
                fh.write(f"{r.label()},threshold,{int(r.passed)},,{r.exponent},"
                         f"{_g(r.log_threshold / math.log(10))}\n")
    _write_manifest(run, "exponents", args, ["exponents.json", "ledger.json", "ledger.csv"])
    print(run)
    return 0


COMMANDS = {"approx": cmd_approx, "nf": cmd_nf, "sdm": cmd_sdm, "drift": cmd_drift,
            "scaling": cmd_scaling, "exponents": cmd_exponents}


def cmd_rerun(args) -> int:
    """Replay a run directory's manifest and compare CSVs byte for byte."""
    src = Path(args.run)
    mf = src / "manifest.json"
    if not mf.exists():
        raise UsageError(f"no manifest.json in {src}")
    manifest = json.loads(mf.read_text())
    command = manifest["command"]
    if command not in COMMANDS or command == "approx":
        raise UsageError(f"cannot rerun command {command!r}")
    parser = build_parser()
    ns = parser.parse_args([command])
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    types = {a.dest: a.type for a in sub.choices[command]._actions}
    for k, v in manifest["params"].items():
        if isinstance(v, str) and types.get(k) is not None:
            v = types[k](v)
        setattr(ns, k, v)
    ns.out = args.out or str(src.parent)
    before = set(Path(ns.out).iterdir()) if Path(ns.out).exists() else set()
    code = COMMANDS[command](ns)
    new = [p for p in Path(ns.out).iterdir() if p not in before and p.is_dir()]
    if len(new) != 1:
        print("could not locate the replayed run", file=sys.stderr)
        return 1
    dst = new[0]
    same = True
    for name in manifest["files"]:
        if not name.endswith(".csv"):
            continue
        a, b = src / name, dst / name
        ok = b.exists() and a.read_bytes() == b.read_bytes()
        print(f"{name}: {'identical' if ok else 'DIFFERS'}")
        same &= ok
    print(dst)
    return code if same else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None,
                        help=f"output root (default ${ENV_ROOT} or ./runs)")
    common.add_argument("--config", default=None, help="INI file with a section per command")

    p = argparse.ArgumentParser(prog="nekhoroshev-lab", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("approx", parents=[common], help="Dirichlet certificate of a vector")
    a.add_argument("--v", type=_numbers)
    a.add_argument("--Q", type=float)
    a.add_argument("--file", help="JSON file with keys v and Q")
    a.set_defaults(func=cmd_approx)

    def ham(sp):
        sp.add_argument("--h", required=False, default=None,
                        help="Hamiltonian JSON (grade-g terms scale with eps**g)")

    nf = sub.add_parser("nf", parents=[common], help="iterated resonant normal form")
    ham(nf)
    nf.add_argument("--omegas", type=_omegas, default=_omegas("1,1"))
    nf.add_argument("--r", type=_floats, default=[0.003])
    nf.add_argument("--s", type=_floats, default=[0.3])
    nf.add_argument("--R", type=float, default=1.0)
    nf.add_argument("--m", type=int, default=3)
    nf.add_argument("--N", type=int, default=4)
    nf.add_argument("--eps", type=float, default=None)
    nf.add_argument("--ball", action="store_true",
                    help="use the ball |I| < R instead of nearly-periodic domains "
                         "centred where grad h = omega")
    nf.add_argument("--no-nesting", action="store_true")
    nf.add_argument("--step-constant", type=float, default=1.0)
    nf.add_argument("--window", type=float, default=1.0)
    nf.set_defaults(func=cmd_nf)

    sd = sub.add_parser("sdm", parents=[common], help="SDM check and prevalence estimate")
    ham(sd)
    sd.add_argument("--gamma", type=float, default=0.5)
    sd.add_argument("--tau", type=float, default=11.0)
    sd.add_argument("--Lmax", type=int, default=3)
    sd.add_argument("--grid", type=int, default=32)
    sd.add_argument("--R", type=float, default=1.0)
    sd.add_argument("--random-points", type=int, default=10000)
    sd.add_argument("--seed", type=int, default=0)
    sd.add_argument("--prevalence", type=_floats, default=None,
                    help="gamma list for the Monte Carlo bad fraction of h - xi.I")
    sd.add_argument("--samples", type=int, default=10000)
    sd.set_defaults(func=cmd_sdm)

    def dyn(sp):
        ham(sp)
        sp.add_argument("--theta0", type=_floats, default=None)
        sp.add_argument("--I0", type=_floats, default=None)
        sp.add_argument("--dt", type=float, default=0.01)
        sp.add_argument("--horizon", type=float, default=1e6)
        sp.add_argument("--delta", type=float, default=0.1)
        sp.add_argument("--scheme", choices=SCHEMES, default="strang_split")
        sp.add_argument("--long", action="store_true", help="long-format CSV")
        sp.add_argument("--seed", type=int, default=0, help="recorded only; runs are deterministic")

    dr = sub.add_parser("drift", parents=[common], help="integrate one trajectory")
    dyn(dr)
    dr.add_argument("--eps", type=float, default=1e-3)
    dr.add_argument("--stride", type=int, default=100)
    dr.add_argument("--stop-on-escape", action="store_true")
    dr.add_argument("--Q", type=float, default=None, help="also record a resonance trace")
    dr.set_defaults(func=cmd_drift)

    sc = sub.add_parser("scaling", parents=[common], help="escape time against eps")
    dyn(sc)
    sc.add_argument("--eps", type=_floats, default=[1e-2, 1e-3, 1e-4])
    sc.add_argument("--R", type=float, default=1.0)
    sc.add_argument("--jobs", type=int, default=1)
    sc.set_defaults(func=cmd_scaling)

    ex = sub.add_parser("exponents", parents=[common], help="exponents and condition ledger")
    ex.add_argument("--n", type=int, default=2)
    ex.add_argument("--tau", type=Fraction, default=Fraction(2))
    ex.add_argument("--gamma", type=float, default=1.0)
    ex.add_argument("--eps", type=float, default=1e-3)
    ex.add_argument("--log10-eps", type=float, default=None,
                    help="evaluate at eps = 10**x (for values below double range)")
    ex.add_argument("--R", type=float, default=1.0)
    ex.add_argument("--r", type=float, default=1.0)
    ex.add_argument("--s", type=float, default=1.0)
    ex.add_argument("--M", type=float, default=1.0)
    ex.add_argument("--constants", default=None, help="JSON constant table")
    ex.set_defaults(func=cmd_exponents)

    rr = sub.add_parser("rerun", help="replay a run directory and compare CSVs")
    rr.add_argument("run")
    rr.add_argument("--out", default=None, help="root for the replay (default: next to the run)")
    rr.set_defaults(func=cmd_rerun)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str], args) -> argparse.Namespace:
    cfg = configparser.ConfigParser()
    cfg.optionxform = str
    if not cfg.read(args.config):
        raise UsageError(f"cannot read config file {args.config}")
    if not cfg.has_section(args.command):
        return args
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = sub.choices[args.command]
    dests = {a.dest: a for a in sp._actions}
    values = {}
    for key, raw in cfg.items(args.command):
        dest = key.replace("-", "_")
        if dest not in dests or dest in ("help", "config"):
            raise UsageError(f"unknown key {key!r} in section [{args.command}]")
        action = dests[dest]
        if isinstance(action, (argparse._StoreTrueAction,)):
            values[dest] = cfg.getboolean(args.command, key)
        else:
            values[dest] = raw
    sp.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            args = _apply_config(parser, argv, args)
        if args.command in ("nf", "sdm", "drift", "scaling"):
            if not args.h:
                raise UsageError("--h is required")
            if not Path(args.h).exists():
                raise UsageError(f"Hamiltonian file not found: {args.h}")
        return args.func(args)
    except (UsageError, ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
