"""Command-line experiment runner.

Subcommands build one validated ExperimentSpec, integrate, and write CSV
(floats at 16 significant digits, so identical specs give byte-identical
files).  `tableau` emits a JSON Butcher tableau instead; `reproduce-paper`
chains the full benchmark set for the elliptic two-body problem at the
published parameters.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import drift_report, estimate_orders, max_norm_error, reference_solution
from .integrators import ConfigError, MethodConfig, NonConvergence, integrate
from .problems import (
    HamiltonianProblem,
    InvariantSet,
    kepler_invariants,
    kepler_problem,
    polynomial_oscillator,
)
from .tableau import build_hbvm_tableau, tableau_to_json

__all__ = ["ExperimentSpec", "main", "parse_step_size", "run_experiment"]

_EXPERIMENTS = ("tableau", "convergence", "alpha-norm", "iterations", "drift")
_METHODS = ("gauss", "hbvm", "elim")
_INVARIANT_CHOICES = ("none", "L1", "L1L2")
_DEFAULT_TOL = 1e-14

_PI_PATTERN = re.compile(
    r"^\s*(?P<num>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)?\s*\*?\s*pi\s*"
    r"(?:/\s*(?P<den>[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?))?\s*$"
)


def parse_step_size(token: str) -> float:
    """Parse a step size such as '0.1', 'pi/30' or '20pi'."""
    match = _PI_PATTERN.match(token)
    if match:
        value = math.pi
        if match.group("num"):
            value *= float(match.group("num"))
        if match.group("den"):
            value /= float(match.group("den"))
        return value
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"cannot parse step size or horizon {token!r}") from None


def _fmt(value) -> str:
    return f"{value:.16g}"


@dataclass(frozen=True)
class ExperimentSpec:
    """One validated experiment invocation."""

    experiment: str
    problem: str = "kepler"
    eccentricity: float = 0.6
    method: str = "hbvm"
    s: int = 3
    k: Optional[int] = None
    r: Optional[int] = None
    invariants: str = "none"
    step_sizes: tuple = ()
    horizon: float = 0.0
    tol: float = _DEFAULT_TOL
    out: Optional[str] = None

    def resolved_k(self) -> int:
        if self.method == "gauss":
            return self.s
        return self.k if self.k is not None else self.s

    def nu(self) -> int:
        return {"none": 0, "L1": 1, "L1L2": 2}[self.invariants]

    def validate(self) -> None:
        if self.experiment not in _EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.method not in _METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.invariants not in _INVARIANT_CHOICES:
            raise ConfigError(f"unknown invariant selection {self.invariants!r}")
        if not (self.problem == "kepler" or re.fullmatch(r"oscillator[2468]", self.problem)):
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.problem == "kepler" and not 0.0 <= self.eccentricity < 1.0:
            raise ConfigError(f"eccentricity must lie in [0, 1), got {self.eccentricity}")
        if self.method == "gauss" and self.k is not None and self.k != self.s:
            raise ConfigError("the gauss method fixes k = s; drop -k or pass k = s")
        if self.method == "elim" and self.invariants == "none":
            raise ConfigError("the elim method needs --invariants L1 or L1L2")
        if self.method != "elim" and self.invariants != "none":
            raise ConfigError("--invariants requires --method elim")
        if self.invariants != "none" and self.problem != "kepler":
            raise ConfigError("invariant selections are defined for the kepler problem")
        if self.experiment != "tableau":
            if not self.step_sizes:
                raise ConfigError("need at least one step size (--steps)")
            if any(h <= 0.0 for h in self.step_sizes):
                raise ConfigError("step sizes must be positive")
            if self.experiment == "drift" and len(self.step_sizes) != 1:
                raise ConfigError("drift runs use exactly one step size")
            if not self.horizon > 0.0:
                raise ConfigError(f"horizon must be positive, got {self.horizon}")
            if self.experiment == "alpha-norm" and self.method != "elim":
                raise ConfigError("alpha-norm tracks the elim scaling; use --method elim")
        if not self.tol > 0.0:
            raise ConfigError(f"tolerance must be positive, got {self.tol}")
        # fail on impossible method parameters before any stepping
        self.method_config().validate(nu=self.nu())

    def method_config(self) -> MethodConfig:
        return MethodConfig(
            s=self.s, k=self.resolved_k(), r=self.r, fp_tolerance=self.tol
        )

    def build_problem(self) -> HamiltonianProblem:
        if self.problem == "kepler":
            return kepler_problem(self.eccentricity)
        return polynomial_oscillator(int(self.problem.removeprefix("oscillator")))

    def build_invariants(self) -> Optional[InvariantSet]:
        if self.invariants == "L1":
            return kepler_invariants("angular_momentum_only")
        if self.invariants == "L1L2":
            return kepler_invariants("angular_momentum_and_lrl")
        return None


def _monitored_invariants(spec: ExperimentSpec):
    """Invariant set reported in drift output, independent of what is imposed."""
    if spec.problem == "kepler":
        return kepler_invariants("angular_momentum_and_lrl"), ("L1", "L2")
    return None, ()


def _steps_for(horizon: float, h: float) -> int:
    n = int(round(horizon / h))
    if n < 1 or abs(n * h - horizon) > 1e-9 * horizon:
        raise ConfigError(
            f"horizon {horizon!r} is not an integer multiple of step size {h!r}"
        )
    return n


def _write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _run_convergence(spec: ExperimentSpec, out: Path) -> None:
    problem = spec.build_problem()
    invariants = spec.build_invariants()
    config = spec.method_config()
    h_ref = min(spec.step_sizes) / 2.0
    y_ref = reference_solution(problem, h_ref, spec.horizon)
    rows = []
    errors = []
    for h in spec.step_sizes:
        n = _steps_for(spec.horizon, h)
        traj = integrate(problem, invariants, config, h, n)
        err = max_norm_error(traj.states[-1], y_ref)
        errors.append(err)
        order = "" if len(errors) < 2 else _fmt(math.log2(errors[-2] / errors[-1]))
        rows.append([_fmt(h), str(n), _fmt(err), order, str(traj.iteration_total)])
        print(f"h={_fmt(h)}  n={n}  error={_fmt(err)}  iterations={traj.iteration_total}")
    _write_csv(out, ["h", "n_steps", "error", "order", "iteration_total"], rows)


def _run_alpha_norm(spec: ExperimentSpec, out: Path) -> None:
    problem = spec.build_problem()
    invariants = spec.build_invariants()
    config = spec.method_config()
    nu = invariants.nu
    rows = []
    maxima = []
    for h in spec.step_sizes:
        n = _steps_for(spec.horizon, h)
        traj = integrate(problem, invariants, config, h, n)
        amax = float(np.max(np.abs(traj.alpha)))
        maxima.append(amax)
        for i in range(n):
            rows.append(
                [_fmt(h), str(i + 1), _fmt(traj.times[i + 1])]
                + [_fmt(traj.alpha[i, v]) for v in range(nu)]
                + [_fmt(np.max(np.abs(traj.alpha[i])))]
            )
        print(f"h={_fmt(h)}  n={n}  max|alpha|={_fmt(amax)}")
    if len(maxima) >= 2:
        orders = estimate_orders(maxima)
        print("alpha orders:", " ".join(_fmt(o) for o in orders))
    header = (
        ["h", "n", "t"] + [f"alpha_{v + 1}" for v in range(nu)] + ["alpha_inf"]
    )
    _write_csv(out, header, rows)


def _run_iterations(spec: ExperimentSpec, out: Path) -> None:
    problem = spec.build_problem()
    invariants = spec.build_invariants()
    config = spec.method_config()
    rows = []
    for h in spec.step_sizes:
        n = _steps_for(spec.horizon, h)
        traj = integrate(problem, invariants, config, h, n)
        total = traj.iteration_total
        nfall = int(np.count_nonzero(traj.fallback))
        rows.append([_fmt(h), str(n), str(total), str(nfall)])
        print(f"h={_fmt(h)}  n={n}  iterations={total}  fallback_steps={nfall}")
    _write_csv(out, ["h", "n_steps", "iteration_total", "fallback_steps"], rows)


def _run_drift(spec: ExperimentSpec, out: Path) -> None:
    problem = spec.build_problem()
    invariants = spec.build_invariants()
    config = spec.method_config()
    h = spec.step_sizes[0]
    n = _steps_for(spec.horizon, h)
    traj = integrate(problem, invariants, config, h, n)
    monitored, labels = _monitored_invariants(spec)
    report = drift_report(traj, problem, monitored)
    nu = spec.nu()
    header = (
        ["n", "t", "h_error"]
        + [f"err_{lab}" for lab in labels]
        + [f"alpha_{v + 1}" for v in range(nu)]
        + ["iterations", "fallback"]
    )
    rows = []
    for i in range(n + 1):
        row = [str(i), _fmt(traj.times[i]), _fmt(report.h_error[i])]
        row += [_fmt(report.invariant_error[i, v]) for v in range(len(labels))]
        if i == 0:
            row += [""] * nu + ["", ""]
        else:
            row += [_fmt(traj.alpha[i - 1, v]) for v in range(nu)]
            row += [str(int(traj.iterations[i - 1])), str(int(traj.fallback[i - 1]))]
        rows.append(row)
    _write_csv(out, header, rows)
    print(
        f"h={_fmt(h)}  n={n}  max|H err|={_fmt(report.h_max)}  "
        f"H slope={_fmt(report.h_slope)}  iterations={report.iteration_total}"
    )
    for v, lab in enumerate(labels):
        print(
            f"max|{lab} err|={_fmt(report.invariant_max[v])}  "
            f"{lab} slope={_fmt(report.invariant_slopes[v])}"
        )


def _run_tableau(spec: ExperimentSpec, out: Optional[Path]) -> None:
    tab = build_hbvm_tableau(spec.resolved_k(), spec.s)
    payload = json.dumps(tableau_to_json(tab), indent=2)
    if out is None:
        print(payload)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(payload + "\n")
        print(f"wrote {out}")


def run_experiment(spec: ExperimentSpec) -> None:
    """Validate and execute one experiment, writing its output file."""
    spec.validate()
    out = Path(spec.out) if spec.out is not None else None
    if spec.experiment == "tableau":
        _run_tableau(spec, out)
        return
    if out is None:
        raise ConfigError("this experiment writes CSV; pass --out")
    if spec.experiment == "convergence":
        _run_convergence(spec, out)
    elif spec.experiment == "alpha-norm":
        _run_alpha_norm(spec, out)
    elif spec.experiment == "iterations":
        _run_iterations(spec, out)
    elif spec.experiment == "drift":
        _run_drift(spec, out)


# ---------------------------------------------------------------------------
# full benchmark reproduction

_BENCHMARK_METHODS = (
    ("gauss3", "gauss", 3, None, None, "none"),
    ("hbvm_12_3", "hbvm", 3, 12, None, "none"),
    ("ehbvm_12_3_L1", "elim", 3, 12, 12, "L1"),
    ("ehbvm_12_3_L1L2", "elim", 3, 12, 12, "L1L2"),
)
_BENCHMARK_DENOMS = (30, 60, 120, 240, 480)


def _reproduce_paper(out_dir: Path, tol: Optional[float]) -> None:
    """Convergence, iteration, scaling-norm and drift benchmarks at the
    published parameters: the eccentricity 0.6 orbit over ten periods for
    five halving steps, then 10^4 drift steps at h = 0.1.

    The convergence table runs at a tighter fixed-point tolerance than the
    rest: at the finest steps the order-2s error term sits near 1e-12 and
    would otherwise drown in solver noise.  An explicit --tol overrides
    both."""
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = kepler_problem(0.6)
    horizon = 20.0 * math.pi
    y_ref = problem.initial_state
    steps = [math.pi / d for d in _BENCHMARK_DENOMS]
    conv_tol = tol if tol is not None else 1e-15
    base_tol = tol if tol is not None else _DEFAULT_TOL

    errors = {}
    iters = {}
    alpha_max = {}
    alpha_series = {}
    for label, method, s, k, r, which in _BENCHMARK_METHODS:
        spec = ExperimentSpec(
            experiment="convergence", method=method, s=s, k=k, r=r,
            invariants=which, tol=base_tol,
        )
        invariants = spec.build_invariants()
        conv_config = MethodConfig(s=s, k=spec.resolved_k(), r=r, fp_tolerance=conv_tol)
        base_config = spec.method_config()
        for h in steps:
            n = _steps_for(horizon, h)
            traj = integrate(problem, invariants, conv_config, h, n)
            errors[label, h] = max_norm_error(traj.states[-1], y_ref)
            base = integrate(problem, invariants, base_config, h, n)
            iters[label, h] = base.iteration_total
            if invariants is not None:
                alpha_max[label, h] = float(np.max(np.abs(base.alpha)))
                alpha_series[label, h] = base
            print(
                f"{label}  h=pi/{round(math.pi / h)}  error={_fmt(errors[label, h])}  "
                f"iterations={iters[label, h]}"
            )

    labels = [row[0] for row in _BENCHMARK_METHODS]
    conv_rows = []
    for i, h in enumerate(steps):
        row = [_fmt(h)]
        for label in labels:
            row.append(_fmt(errors[label, h]))
            prev = errors[label, steps[i - 1]] if i else None
            row.append("" if not i else _fmt(math.log2(prev / errors[label, h])))
        conv_rows.append(row)
    header = ["h"]
    for label in labels:
        header += [f"error_{label}", f"order_{label}"]
    _write_csv(out_dir / "convergence.csv", header, conv_rows)

    iter_rows = [
        [_fmt(h)] + [str(iters[label, h]) for label in labels] for h in steps
    ]
    _write_csv(out_dir / "iterations.csv", ["h"] + labels, iter_rows)

    elim_labels = [row[0] for row in _BENCHMARK_METHODS if row[5] != "none"]
    alpha_rows = []
    for i, h in enumerate(steps):
        row = [_fmt(h)]
        for label in elim_labels:
            row.append(_fmt(alpha_max[label, h]))
            prev = alpha_max[label, steps[i - 1]] if i else None
            row.append("" if not i else _fmt(math.log2(prev / alpha_max[label, h])))
        alpha_rows.append(row)
    header = ["h"]
    for label in elim_labels:
        header += [f"alpha_max_{label}", f"alpha_order_{label}"]
    _write_csv(out_dir / "alpha_norms.csv", header, alpha_rows)

    # per-step scaling components for the two-invariant method at h = pi/30
    traj = alpha_series["ehbvm_12_3_L1L2", steps[0]]
    rows = [
        [str(i + 1), _fmt(traj.times[i + 1]), _fmt(traj.alpha[i, 0]), _fmt(traj.alpha[i, 1])]
        for i in range(traj.alpha.shape[0])
    ]
    _write_csv(
        out_dir / "alpha_components.csv", ["n", "t", "alpha_1", "alpha_2"], rows
    )

    for label, method, s, k, r, which in _BENCHMARK_METHODS:
        spec = ExperimentSpec(
            experiment="drift", method=method, s=s, k=k, r=r, invariants=which,
            step_sizes=(0.1,), horizon=1000.0, tol=base_tol,
            out=str(out_dir / f"drift_{label}.csv"),
        )
        print(f"drift {label}:")
        run_experiment(spec)

    meta = {
        "problem": "kepler",
        "eccentricity": 0.6,
        "horizon": horizon,
        "step_sizes": steps,
        "drift_step_size": 0.1,
        "drift_horizon": 1000.0,
        "fp_tolerance": base_tol,
        "fp_tolerance_convergence": conv_tol,
        "methods": {row[0]: {"method": row[1], "s": row[2], "k": row[3], "r": row[4], "invariants": row[5]} for row in _BENCHMARK_METHODS},
    }
    (out_dir / "parameters.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {out_dir}/")


# ---------------------------------------------------------------------------
# argument handling


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linteg",
        description="experiment runner for the conserving line-integral methods",
    )
    sub = parser.add_subparsers(dest="experiment", required=True)

    def add_common(p, with_steps=True):
        p.add_argument("--config", help="JSON file with defaults; flags override it")
        p.add_argument("--problem", help="kepler or oscillator{2,4,6,8}")
        p.add_argument("--eccentricity", type=float, help="kepler eccentricity")
        p.add_argument("--method", choices=_METHODS, help="integrator family")
        p.add_argument("-s", type=int, dest="s", help="polynomial degree count (order 2s)")
        p.add_argument("-k", type=int, dest="k", help="Gauss nodes for the Hamiltonian")
        p.add_argument("-r", type=int, dest="r", help="Gauss nodes for the invariants")
        p.add_argument(
            "--invariants", choices=_INVARIANT_CHOICES, help="invariants the method imposes"
        )
        p.add_argument("--tol", type=float, help="fixed-point tolerance")
        p.add_argument("--out", help="output file path")
        if with_steps:
            p.add_argument("--steps", help="comma list of step sizes, e.g. pi/30,pi/60")
            p.add_argument("--horizon", help="integration time, e.g. 20pi or 1000")

    for name in ("convergence", "alpha-norm", "iterations", "drift"):
        add_common(sub.add_parser(name, help=f"run the {name} experiment"))
    add_common(sub.add_parser("tableau", help="export a Butcher tableau as JSON"), with_steps=False)

    repro = sub.add_parser(
        "reproduce-paper", help="run the full published benchmark set"
    )
    repro.add_argument("--out-dir", default="results", help="output directory")
    repro.add_argument("--tol", type=float, help="fixed-point tolerance")
    return parser


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - {
            "problem", "eccentricity", "method", "s", "k", "r",
            "invariants", "steps", "horizon", "tol", "out",
        }
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    env_tol = os.environ.get("ELIM_FP_TOL")

    def pick(name, default):
        flag = getattr(args, name.replace("-", "_"), None)
        if flag is not None:
            return flag
        if name in file_values:
            return file_values[name]
        return default

    steps = pick("steps", None)
    if isinstance(steps, str):
        step_sizes = tuple(parse_step_size(tok) for tok in steps.split(","))
    elif steps is None:
        step_sizes = ()
    else:
        step_sizes = tuple(float(v) for v in steps)

    horizon = pick("horizon", 0.0)
    if isinstance(horizon, str):
        horizon = parse_step_size(horizon)

    tol = pick("tol", float(env_tol) if env_tol is not None else _DEFAULT_TOL)

    return ExperimentSpec(
        experiment=args.experiment,
        problem=pick("problem", "kepler"),
        eccentricity=float(pick("eccentricity", 0.6)),
        method=pick("method", "hbvm"),
        s=int(pick("s", 3)),
        k=(lambda v: None if v is None else int(v))(pick("k", None)),
        r=(lambda v: None if v is None else int(v))(pick("r", None)),
        invariants=pick("invariants", "none"),
        step_sizes=step_sizes,
        horizon=float(horizon),
        tol=float(tol),
        out=pick("out", None),
    )


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.experiment == "reproduce-paper":
            env_tol = os.environ.get("ELIM_FP_TOL")
            tol = args.tol if args.tol is not None else (
                float(env_tol) if env_tol is not None else None
            )
            if tol is not None and not tol > 0.0:
                raise ConfigError(f"tolerance must be positive, got {tol}")
            _reproduce_paper(Path(args.out_dir), tol)
        else:
            run_experiment(_spec_from_args(args))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NonConvergence, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
