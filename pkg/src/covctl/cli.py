"""``covctl`` command-line front-end.

Exit codes: 0 success, 2 validation error, 3 infeasibility, 4 numerical
failure. Every file output is accompanied by a ``*.manifest.json`` run record.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import run_benchmark, write_csv
from .covariance import as_gain, propagate, stability_report, steady_state
from .errors import CovctlError, InfeasibleError, ModelValidationError, NumericalError
from .model import load_model
from .moments import compute_cp_analytic, estimate_cp_empirical
from .montecarlo import SimConfig, compare, resolve_threads, simulate
from .synthesis import DEFAULT_TOL, synthesize_gain

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4


def fmt(x: float) -> str:
    return f"{x:.16e}"


def _write_csv(fh, header, rows) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def write_rows(path, header, rows) -> None:
    """CSV with 17 significant digits; ``path=None`` writes to stdout."""
    if path is None:
        _write_csv(sys.stdout, header, rows)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_csv(fh, header, rows)


class Manifest:
    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.t0 = time.perf_counter()
        self.started = dt.datetime.now(dt.timezone.utc).isoformat()
        self.outputs: list[str] = []
        self.seed = None

    def output(self, path) -> Path:
        self.outputs.append(str(Path(path).resolve()))
        return Path(path)

    def write(self, path) -> None:
        inputs = {k: str(Path(v).resolve()) for k in ("model", "gain")
                  if isinstance(v := getattr(self.args, k, None), str)}
        doc = {
            "command": self.args.command,
            "argv": self.argv,
            "inputs": inputs,
            "seed": self.seed,
            "version": __version__,
            "started_utc": self.started,
            "wall_clock_s": time.perf_counter() - self.t0,
            "outputs": self.outputs,
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _manifest_path(out) -> Path:
    out = Path(out)
    return out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")


def entry_labels(n: int, prefix: str) -> list[str]:
    return [f"{prefix}_{i + 1}{j + 1}" for i in range(n) for j in range(i, n)]


def upper_entries(s: np.ndarray) -> list[float]:
    n = s.shape[0]
    return [float(s[i, j]) for i in range(n) for j in range(i, n)]


def parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def resolve_gain(args, model, cp, echo=True):
    if getattr(args, "gain", None):
        doc = json.loads(Path(args.gain).read_text(encoding="utf-8"))
        k = doc["K"] if isinstance(doc, dict) else doc
        return as_gain(k, model)
    res = synthesize_gain(model, cp, tol=args.tol, method=args.method)
    if not res.feasible:
        raise InfeasibleError(res.message)
    if echo:
        print(f"synthesized K = {np.array2string(res.gain, precision=6)} (alpha = {res.alpha:.6f})")
    return res.gain


def _z0(args, model):
    if getattr(args, "z0", None):
        return np.array(parse_floats(args.z0))
    return model.x0


# ------------------------------------------------------------------ commands

def cmd_validate(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model = load_model(args.model)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"OK: {args.model} (n={model.n}, m={model.m}, l={model.l})")
    return EXIT_OK


def cmd_cp(args, man: Manifest) -> int:
    model = load_model(args.model)
    cp = compute_cp_analytic(model)
    write_rows(man.output(args.out) if args.out else None, None,
               (list(map(float, row)) for row in cp.value))
    if args.empirical:
        seed = args.seed if args.seed is not None else (model.seed or 0)
        man.seed = seed
        emp = estimate_cp_empirical(model, args.empirical, seed, threads=resolve_threads(args.threads))
        dev = float(np.max(np.abs(emp.value - cp.value)))
        print(f"empirical C_p ({args.empirical} samples, seed {seed}): max |empirical - analytic| = {dev:.6g}")
        if args.out:
            out = Path(args.out)
            write_rows(man.output(out.with_name(out.stem + ".empirical.csv")), None,
                       (list(map(float, row)) for row in emp.value))
    return EXIT_OK


def cmd_propagate(args, man: Manifest) -> int:
    model = load_model(args.model)
    cp = compute_cp_analytic(model)
    k = resolve_gain(args, model, cp)
    rep = stability_report(model, k, cp)
    if not rep.stable:
        print(f"warning: covariance dynamics diverge, rho(M(K)) = {rep.rho:.6g}", file=sys.stderr)
    traj = propagate(model, k, cp, _z0(args, model), args.horizon)
    n = model.n
    header = ["k"] + entry_labels(n, "eps_th") + [f"z_{i + 1}" for i in range(n)]
    rows = [[t] + upper_entries(traj.cov_seq[t]) + list(map(float, traj.z_seq[t]))
            for t in range(traj.horizon + 1)]
    write_rows(man.output(args.out) if args.out else None, header, rows)
    return EXIT_OK


def cmd_steady(args, man: Manifest) -> int:
    model = load_model(args.model)
    cp = compute_cp_analytic(model)
    k = resolve_gain(args, model, cp)
    s = steady_state(model, k, cp)
    print(np.array2string(s, precision=4, suppress_small=True))
    if args.out:
        write_rows(man.output(args.out), None, (list(map(float, row)) for row in s))
    return EXIT_OK


def cmd_synth(args, man: Manifest) -> int:
    model = load_model(args.model)
    cp = compute_cp_analytic(model)
    res = synthesize_gain(model, cp, tol=args.tol, method=args.method,
                          feasibility_only=args.feasibility_only)
    if args.out:
        man.output(args.out).write_text(json.dumps(res.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"K          = {np.array2string(res.gain, precision=6)}")
    print(f"alpha      = {res.alpha:.6f}")
    print(f"beta       = {res.beta:.6f}")
    print(f"lmi_margin = {res.lmi_margin:.6g}")
    print(f"rho(M(K))  = {res.rho:.6f}")
    if not res.feasible:
        print(f"infeasible: {res.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_simulate(args, man: Manifest) -> int:
    model = load_model(args.model)
    cp = compute_cp_analytic(model)
    k = resolve_gain(args, model, cp)
    seed = args.seed if args.seed is not None else (model.seed or 0)
    man.seed = seed
    z0 = _z0(args, model)
    config = SimConfig(args.trials, args.horizon, seed, z0)
    emp = simulate(model, k, config, threads=args.threads)
    th = propagate(model, k, cp, z0, args.horizon)
    report = compare(th, emp, args.threshold)

    n = model.n
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows(man.output(out / "theoretical.csv"), ["k"] + entry_labels(n, "eps_th"),
               ([t] + upper_entries(th.cov_seq[t]) for t in range(args.horizon + 1)))
    write_rows(man.output(out / "empirical.csv"),
               ["k"] + entry_labels(n, "eps_em") + entry_labels(n, "se")
               + [f"mean_{i + 1}" for i in range(n)],
               ([t] + upper_entries(emp.cov_seq[t]) + upper_entries(emp.stderr_seq[t])
                + list(map(float, emp.mean_seq[t])) for t in range(args.horizon + 1)))
    write_rows(man.output(out / "comparison.csv"),
               ["k", "i", "j", "theoretical", "empirical", "deviation", "z"],
               ([t, i, j, float(th.cov_seq[t, i - 1, j - 1]), float(emp.cov_seq[t, i - 1, j - 1]), d, z]
                for t, i, j, d, z in report.rows()))
    summary = {"trials": args.trials, "horizon": args.horizon, "seed": seed,
               "threshold": report.threshold, "max_abs": report.max_abs,
               "max_rel": report.max_rel, "max_z": report.max_z, "passed": report.passed}
    (out / "report.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    man.output(out / "report.json")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: max z = {report.max_z:.3f} (threshold {report.threshold:g}), "
          f"max |dev| = {report.max_abs:.4g}, max rel = {report.max_rel:.4g}")
    return EXIT_OK


def cmd_benchmark(args, man: Manifest) -> int:
    man.seed = args.seed
    n_list = [int(v) for v in parse_floats(args.n_list)]

    def show(case):
        print(f"n={case.n:3d}  median={case.median_ms:9.3f} ms  p95={case.p95_ms:9.3f} ms  "
              f"alpha_median={case.alpha_median:.6f}", flush=True)

    cases = run_benchmark(n_list, args.reps, args.seed, args.method, args.feasibility_only,
                          args.variance, args.structure, progress=show)
    if args.out:
        write_csv(cases, man.output(args.out))
    return EXIT_OK


# ------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="covctl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"covctl {__version__}")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads for sampling (env COVCTL_THREADS overrides)")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_model(p):
        p.add_argument("model", help="model JSON file")

    def with_gain(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--gain", help="gain JSON file (as written by 'synth')")
        g.add_argument("--synthesize", action="store_true", help="synthesize K from the LMI")

    def with_solver(p):
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--method", choices=("exact", "sdp"), default="exact")

    p = sub.add_parser("validate", help="check a model file")
    with_model(p)

    p = sub.add_parser("cp", help="second-moment matrix C_p as CSV")
    with_model(p)
    p.add_argument("--empirical", type=int, default=0, metavar="N",
                   help="also estimate C_p from N samples and report the deviation")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")

    p = sub.add_parser("propagate", help="covariance trajectory as CSV")
    with_model(p)
    with_gain(p)
    with_solver(p)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--z0", help="comma-separated initial nominal state (default: model x0 or 0)")
    p.add_argument("--out")

    p = sub.add_parser("steady", help="steady-state error covariance")
    with_model(p)
    with_gain(p)
    with_solver(p)
    p.add_argument("--out")

    p = sub.add_parser("synth", help="synthesize K and the decay rate alpha")
    with_model(p)
    with_solver(p)
    p.add_argument("--feasibility-only", action="store_true",
                   help="fix alpha = 1 instead of minimizing it")
    p.add_argument("--out", help="gain JSON file")

    p = sub.add_parser("simulate", help="Monte Carlo vs. theoretical covariance")
    with_model(p)
    with_gain(p)
    with_solver(p)
    p.add_argument("--trials", type=int, default=5000)
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--z0")
    p.add_argument("--threshold", type=float, default=5.0, help="z-score pass threshold")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("benchmark", help="synthesis solve time versus n")
    p.add_argument("--n-list", default="3,5,10,15,20")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=("exact", "sdp"), default="sdp")
    p.add_argument("--feasibility-only", action="store_true")
    p.add_argument("--variance", type=float, default=0.07)
    p.add_argument("--structure", choices=("diagonal", "full"), default="diagonal")
    p.add_argument("--out")
    return ap


COMMANDS = {
    "cp": cmd_cp, "propagate": cmd_propagate, "steady": cmd_steady, "synth": cmd_synth,
    "simulate": cmd_simulate, "benchmark": cmd_benchmark,
}


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        args.threads = resolve_threads(args.threads)
    saved, warnings.showwarning = warnings.showwarning, _show_warning
    try:
        if args.command == "validate":
            return cmd_validate(args)
        man = Manifest(args, argv)
        code = COMMANDS[args.command](args, man)
        out = getattr(args, "out", None)
        if out and man.outputs:
            man.write(_manifest_path(out))
        return code
    except ModelValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CovctlError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    finally:
        warnings.showwarning = saved


if __name__ == "__main__":
    sys.exit(main())
