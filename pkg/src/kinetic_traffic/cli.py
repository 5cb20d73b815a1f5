"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O failure.
All printed floats use 15 significant digits, so identical invocations
produce byte-identical output.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .diagrams import (
    METHOD_INTEGRATE,
    METHOD_RECURSIVE,
    UNITS_PHYSICAL,
    build_grid,
    rescale_dimensional,
    sweep,
)
from .dynamics import (
    IntegrationConfig,
    KineticState,
    observables,
    random_state,
    run_trajectory,
)
from .equilibrium import equilibrium_recursive, is_attracting, stability_report
from .errors import KineticModelError
from .lattice import ModelParams, build_lattice
from .serialize import (
    diagram_csv,
    diagram_json,
    diagram_svg,
    equilibrium_json,
    fmt15,
    trajectory_csv,
)
from .verify import run_suite

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; remap to the usage code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _add_model_args(p: argparse.ArgumentParser, with_rho: bool = True) -> None:
    p.add_argument("--n", type=int, required=True, help="number of speed classes (>= 2)")
    if with_rho:
        p.add_argument("--rho", type=float, required=True, help="total density in [0, 1]")
    p.add_argument("--eta0", type=float, default=1.0, help="interaction rate slope (default 1)")


def _cmd_simulate(args) -> int:
    params = ModelParams(n=args.n, eta0=args.eta0)
    lattice = build_lattice(args.n)
    if args.seed is None:
        start = KineticState(np.full(args.n, args.rho / args.n))
    else:
        start = random_state(args.n, args.rho, seed=args.seed)
    config = IntegrationConfig(
        dt=args.dt, t_final=args.t_final, record_stride=args.record_stride
    )
    times, samples, converged = run_trajectory(start, params, config)
    final = KineticState(samples[-1])
    obs = observables(final, lattice)
    print(f"n={args.n} rho={fmt15(args.rho)} dt={fmt15(args.dt)} t_final={fmt15(args.t_final)}")
    print(f"steady={'yes' if converged else 'no'} t_reached={fmt15(float(times[-1]))}")
    print("f_final=" + " ".join(fmt15(float(x)) for x in final.f))
    print(f"q={fmt15(obs.q)} u={fmt15(obs.u)}")
    if args.out_csv:
        _write(args.out_csv, trajectory_csv(times, samples, lattice))
        print(f"wrote {args.out_csv}")
    return EXIT_OK


def _cmd_equilibrium(args) -> int:
    params = ModelParams(n=args.n, eta0=args.eta0)
    lattice = build_lattice(args.n)
    eq = equilibrium_recursive(args.n, args.rho)
    report = stability_report(eq.f_inf, params)
    # the closed form always takes the larger quadratic root, which is
    # the attracting branch even when the spectrum alone is marginal
    stable = is_attracting(report.verdict, from_larger_roots=True)
    obs = observables(KineticState(eq.f_inf), lattice)
    scale_rho, scale_v = 1.0, 1.0
    if args.units == UNITS_PHYSICAL:
        scale_rho, scale_v = params.rho_max, params.v_max
    payload = {
        "n": eq.n,
        "rho": eq.rho * scale_rho,
        "f_inf": [x * scale_rho for x in eq.f_inf],
        "q": obs.q * scale_rho * scale_v,
        "u": obs.u * scale_v,
        "phase": eq.phase,
        "stable": stable,
        "branch_data": [
            {
                "j": b.j,
                "rule": b.rule,
                "root": b.root,
                "delta": b.delta,
                "b": b.b,
                "c": b.c,
            }
            for b in eq.branch_data
        ],
    }
    print(f"n={eq.n} rho={fmt15(payload['rho'])} phase={eq.phase} stable={'yes' if stable else 'no'}")
    print("f_inf=" + " ".join(fmt15(float(x)) for x in payload["f_inf"]))
    print(f"q={fmt15(payload['q'])} u={fmt15(payload['u'])} verdict={report.verdict}")
    if args.out_json:
        _write(args.out_json, equilibrium_json(payload))
        print(f"wrote {args.out_json}")
    return EXIT_OK


def _cmd_diagram(args) -> int:
    params = ModelParams(n=args.n, eta0=args.eta0)
    grid = build_grid(args.rho_steps)
    config = None
    if args.method == METHOD_INTEGRATE:
        config = IntegrationConfig(dt=args.dt, t_final=args.t_final)
    diagram = sweep(args.n, grid, args.method, params, config, jobs=args.jobs)
    flagged = sum(1 for p in diagram.points if not p.converged)
    if args.units == UNITS_PHYSICAL:
        diagram = rescale_dimensional(diagram, params)
    print(
        f"n={diagram.n} method={diagram.method} units={diagram.units} "
        f"points={len(diagram.points)}"
    )
    print(f"sigma={fmt15(diagram.sigma)} q_max={fmt15(diagram.q_max)}")
    if flagged:
        print(f"unconverged points: {flagged} (kept, marked in the JSON output)")
    for opt, writer in (
        (args.out_csv, diagram_csv),
        (args.out_json, diagram_json),
        (args.out_svg, diagram_svg),
    ):
        if opt:
            _write(opt, writer(diagram))
            print(f"wrote {opt}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    results = run_suite(n_max=args.n_max)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    if all(r.passed for r in results):
        print(f"all {len(results)} invariant groups passed")
        return EXIT_OK
    return EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kinetic-traffic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one initial state to steady flow")
    _add_model_args(p)
    p.add_argument("--t-final", type=float, default=200.0, help="time horizon (default 200)")
    p.add_argument("--dt", type=float, default=0.01, help="step size (default 0.01)")
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="sample a random initial split with this seed (default: uniform split)",
    )
    p.add_argument(
        "--record-stride", type=int, default=1, help="keep every k-th sample (default 1)"
    )
    p.add_argument("--out-csv", help="write the trajectory as CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("equilibrium", help="closed-form steady state at one density")
    _add_model_args(p)
    p.add_argument(
        "--units",
        choices=["dimensionless", "physical"],
        default="dimensionless",
        help="report physical units (veh/km, km/h)",
    )
    p.add_argument("--out-json", help="write the equilibrium record as JSON")
    p.set_defaults(func=_cmd_equilibrium)

    p = sub.add_parser("diagram", help="sweep the density range and emit diagrams")
    _add_model_args(p, with_rho=False)
    p.add_argument(
        "--rho-steps", type=int, default=201, help="grid resolution (default 201)"
    )
    p.add_argument(
        "--method",
        choices=[METHOD_RECURSIVE, METHOD_INTEGRATE],
        default=METHOD_RECURSIVE,
        help="closed form per point, or relax a uniform split",
    )
    p.add_argument(
        "--t-final",
        type=float,
        default=4000.0,
        help="horizon per point for --method integrate (default 4000)",
    )
    p.add_argument(
        "--dt", type=float, default=0.02, help="step size for --method integrate (default 0.02)"
    )
    p.add_argument(
        "--units",
        choices=["dimensionless", "physical"],
        default="dimensionless",
        help="rescale to veh/km and km/h",
    )
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--out-csv", help="write the diagram table as CSV")
    p.add_argument("--out-json", help="write the diagram with metadata as JSON")
    p.add_argument("--out-svg", help="write flux and speed panels as SVG")
    p.set_defaults(func=_cmd_diagram)

    p = sub.add_parser("verify", help="run the model invariant suite")
    p.add_argument(
        "--n-max", type=int, default=6, help="largest class count to check (default 6)"
    )
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"kinetic-traffic: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KineticModelError as exc:
        print(f"kinetic-traffic: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"kinetic-traffic: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
