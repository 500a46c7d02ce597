"""Command line front end: reproducible runs over all package modules.

Subcommands
-----------
coeffs      Turing hypotheses and bifurcation coefficients of a system.
match       Solve the cubic matching equation, optionally diff the
            embedded reference tables.
gl          Ginzburg-Landau homoclinic amplitude and trajectory.
synthesize  Sample a ring pattern on a planar grid and export it.
verify      Galerkin residuals, Newton refinement, branch continuation.
continuum   Large-N limit of the matching equation.

Every command accepts ``--seed``, ``--threads``, ``--out`` and
``--config``.  A config file is a JSON object whose keys are argument
names (``{"gamma": 1.3, "mu": 0.01}``); explicit flags override config
values, which override built-in defaults.  Outputs are plain text and
CSV with shortest-round-trip floats, so identical configurations produce
byte-identical files.

``--threads`` is validated and echoed into artifact metadata for
provenance, but present-day command bodies are single-process: every
module underneath is pure numpy, and the grid sizes the CLI exposes do
not amortize worker startup.

Exit codes: 0 success, 1 reference comparison failure, 2 usage or
parse or structural errors, 3 supercritical system, 4 no convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings

import numpy as np

from .continuum import compare_large_N, positive_branch, solve_continuum, write_comparison, write_solution
from .errors import (
    DimensionMismatch,
    DomainError,
    NoConvergence,
    NotDoubleEigenvalue,
    NotTuring,
    SingularJacobian,
    StepFailure,
    Supercritical,
)
from .galerkin import GalerkinGrid, continue_mu, l2_norm, newton_refine, profile_to_state, residual, write_branch
from .glradial import find_homoclinic
from .matching import MatchProblem, SolveOptions, format_table, primitive_solutions, solve_matching, write_table
from .profiles import PlanarGrid, build_context, export_field, export_modes, synthesize_field
from .rdsys import coefficients, parse_system_file, sh_system, verify_turing
from .tables import TOLERANCE, reference_list


class _Usage(Exception):
    """Invalid invocation detected past argparse; maps to exit 2."""


# ---------------------------------------------------------------------------
# argument types


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number")
    if v <= 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text}")
    return v


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {text}")
    return v


def _sign_value(text: str) -> int:
    if text not in ("1", "-1", "+1"):
        raise argparse.ArgumentTypeError(f"sign must be 1 or -1, got {text}")
    return int(text)


def _float_list(text: str) -> list:
    try:
        return [float(t) for t in str(text).split(",") if t != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in str(text).split(",") if t != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _branch_spec(text: str) -> tuple:
    """START:STEP:COUNT, COUNT points from START stepping down by STEP."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected START:STEP:COUNT, got {text!r}")
    try:
        start, step = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad branch spec {text!r}")
    if start <= 0.0 or count < 2 or step == 0.0:
        raise argparse.ArgumentTypeError(
            f"branch needs START > 0, STEP != 0, COUNT >= 2, got {text!r}"
        )
    return start, step, count


# ---------------------------------------------------------------------------
# shared helpers


def _load_system(args):
    if getattr(args, "system", None):
        try:
            with open(args.system) as fh:
                return parse_system_file(fh.read())
        except OSError as exc:
            raise _Usage(f"cannot read system file: {exc}")
        except ValueError as exc:
            raise _Usage(f"system file {args.system}: {exc}")
    if getattr(args, "sh", False) or getattr(args, "gamma", None) is not None:
        if args.gamma is None:
            raise _Usage("--sh needs --gamma")
        return sh_system(args.gamma)
    raise _Usage("supply a system: --sh --gamma G, or --system FILE")


def _emit(args, lines) -> None:
    text = "\n".join(lines) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v) -> str:
    return repr(float(v))


def _pick_amplitudes(args) -> np.ndarray:
    """Explicit --a vector, or entry --root of the solved canonical list."""
    if getattr(args, "a", None) is not None:
        raw = _float_list(args.a) if isinstance(args.a, str) else args.a
        vec = np.asarray(raw, dtype=float)
        if vec.shape != (args.N + 1,):
            raise _Usage(f"--a needs {args.N + 1} entries for N={args.N}, got {vec.size}")
        return vec
    sols = solve_matching(MatchProblem(args.m, args.N), SolveOptions(seed=args.seed))
    prim = primitive_solutions(sols, args.N)
    if not 0 <= args.root < len(prim):
        raise _Usage(f"--root {args.root} out of range: {len(prim)} non-harmonic solutions")
    return prim[args.root].a


def _config_echo(args, keys) -> str:
    """One header comment with numeric config values (import-safe tokens)."""
    toks = []
    for k in keys:
        v = getattr(args, k, None)
        if v is None:
            continue
        toks.append(f"{k}={int(v) if isinstance(v, (bool, int)) else _fmt(v)}")
    return "# " + " ".join(toks)


# ---------------------------------------------------------------------------
# commands


def cmd_coeffs(args) -> int:
    system = _load_system(args)
    turing = verify_turing(system)
    co = coefficients(system)
    subcritical = co.c0 > 0.0 and co.c3 < 0.0
    _emit(args, [
        f"system: {system.label or 'custom'}",
        f"kc: {_fmt(turing.kc)}",
        f"U0: {_fmt(turing.U0[0])} {_fmt(turing.U0[1])}",
        f"U1: {_fmt(turing.U1[0])} {_fmt(turing.U1[1])}",
        f"c0: {_fmt(co.c0)}",
        f"c3: {_fmt(co.c3)}",
        f"nu: {_fmt(co.nu)}",
        f"subcritical: {'yes' if subcritical else 'no'}",
    ])
    return 0 if subcritical else 3


def cmd_match(args) -> int:
    opts = SolveOptions(seed=args.seed)
    if args.starts is not None:
        opts.starts = args.starts
    if args.tol is not None:
        opts.tol = args.tol
    p = MatchProblem(args.m, args.N)
    prim = primitive_solutions(solve_matching(p, opts), p.N)
    if args.out:
        write_table(args.out, p, prim)
        lines = []
    else:
        lines = [format_table(p, prim)] if prim else []
    lines.append(f"m={args.m} N={args.N}: {len(prim)} non-harmonic solutions")
    if args.compare_reference:
        try:
            ref = reference_list(args.m, args.N)
        except KeyError:
            raise _Usage(f"no reference table for N={args.N} (available: N <= 4)")
        missing = [
            t for t in ref
            if not any(np.max(np.abs(s.a - np.asarray(t))) < TOLERANCE for s in prim)
        ]
        if missing:
            lines.append(f"FAIL, {len(missing)} reference rows unmatched:")
            lines.extend("  " + " ".join(_fmt(v) for v in t) for t in missing)
            print("\n".join(lines))
            return 1
        lines.append(f"PASS, {len(prim)} solutions")
    print("\n".join(lines))
    return 0


def cmd_gl(args) -> int:
    if args.c0 is not None or args.c3 is not None:
        if args.c0 is None or args.c3 is None:
            raise _Usage("--c0 and --c3 go together")
        c0, c3 = args.c0, args.c3
    else:
        co = coefficients(_load_system(args))
        c0, c3 = co.c0, co.c3
    kw = {}
    if args.s_max is not None:
        kw["s_max"] = args.s_max
    if args.rtol is not None:
        kw["rtol"] = args.rtol
    sol = find_homoclinic(c0, c3, **kw)
    print(f"c0: {_fmt(c0)}")
    print(f"c3: {_fmt(c3)}")
    print(f"q0: {_fmt(sol.q0)}")
    print(f"q_plus: {_fmt(sol.q_plus)}")
    print(f"tail_slope: {_fmt(sol.tail_slope)}")
    if args.out:
        lines = [f"# c0={_fmt(c0)} c3={_fmt(c3)} q0={_fmt(sol.q0)}", "s,q,dq"]
        for s, q, dq in zip(sol.s_grid, sol.q_samples, sol.dq_samples):
            lines.append(f"{_fmt(s)},{_fmt(q)},{_fmt(dq)}")
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def cmd_synthesize(args) -> int:
    system = _load_system(args)
    a = _pick_amplitudes(args)
    ctx = build_context(system, m=args.m, N=args.N, a=a, mu=args.mu,
                        r0=args.r0, sign=args.sign)
    fld = synthesize_field(ctx, PlanarGrid(extent=args.disc, resolution=args.resolution))
    out = args.out or "field.csv"
    export_field(fld, out, which=args.projection)
    with open(out, "a") as fh:
        fh.write(_config_echo(args, ("gamma", "seed", "threads", "root")) + "\n")
    if args.modes_out:
        export_modes(fld, args.modes_out)
    print(f"wrote {out} ({args.resolution}x{args.resolution} samples, "
          f"projection {args.projection})")
    return 0


def cmd_verify(args) -> int:
    system = _load_system(args)
    a = _pick_amplitudes(args)
    co = coefficients(system)
    gl = find_homoclinic(co.c0, co.c3)
    grid = GalerkinGrid(m=args.m, n_modes=args.N + 1, R_max=args.R_max, h=args.h)

    def seed_at(mu):
        ctx = build_context(system, m=args.m, N=args.N, a=a, mu=mu,
                            r0=args.r0, sign=args.sign, gl=gl)
        return profile_to_state(ctx, grid, blend=args.blend)

    lines = [
        f"# verify m={args.m} N={args.N} R_max={_fmt(grid.R_max)} h={_fmt(grid.h)} "
        f"blend={int(args.blend)} threads={args.threads}"
    ]
    code = 0
    norms = []
    mu_list = _float_list(args.mu_list) if isinstance(args.mu_list, str) else args.mu_list
    for mu in sorted(mu_list, reverse=True):
        res = residual(system, grid, seed_at(mu))
        l2 = float(np.linalg.norm(res))
        norms.append(l2)
        lines.append(f"mu={_fmt(mu)}: seed residual l2={_fmt(l2)} "
                     f"linf={_fmt(np.max(np.abs(res)))}")
    if len(norms) >= 2:
        trend = "decreasing" if all(x > y for x, y in zip(norms, norms[1:])) else "not monotone"
        lines.append(f"residual trend toward onset: {trend}")

    if args.refine is not None:
        try:
            state, report = newton_refine(system, grid, seed_at(args.refine),
                                          max_iter=args.max_iter)
            lines.append(
                f"refine mu={_fmt(args.refine)}: converged "
                f"iterations={report.iterations} "
                f"correction_rel={_fmt(report.correction_rel)} "
                f"l2={_fmt(l2_norm(grid, state))} "
                f"quadratic_tail={'yes' if report.quadratic_tail() else 'no'}"
            )
        except NoConvergence as exc:
            lines.append(f"refine mu={_fmt(args.refine)}: FAILED ({exc})")
            code = 4

    if args.branch is not None and code == 0:
        spec = _branch_spec(args.branch) if isinstance(args.branch, str) else args.branch
        if len(spec) != 3:
            raise _Usage(f"branch spec needs START:STEP:COUNT, got {args.branch!r}")
        start, step, count = float(spec[0]), float(spec[1]), int(spec[2])
        mu_stop = start - step * (count - 1)
        branch = continue_mu(system, grid, seed_at(start), mu_stop=mu_stop,
                             steps=count - 1)
        path = args.branch_out or "branch.csv"
        write_branch(path, branch)
        lines.append(f"branch: wrote {path} ({len(branch.points)} points)")
        if branch.fold_bracket is not None:
            lo, hi = branch.fold_bracket
            lines.append(f"branch halted between mu={_fmt(lo)} and mu={_fmt(hi)}")
        try:
            lines.append(f"branch l2 slope vs mu: {_fmt(branch.slope())}")
        except DomainError:
            lines.append("branch l2 slope vs mu: undefined (too few points)")
    _emit(args, lines)
    return code


def cmd_continuum(args) -> int:
    sol = solve_continuum(args.grid)
    lines = [
        f"continuum: M={args.grid} residual={_fmt(sol.residual_norm)}",
        f"alpha(0)={_fmt(sol.alpha[0])} alpha(1)={_fmt(sol.alpha[-1])} "
        f"min={_fmt(sol.alpha.min())}",
    ]
    if args.out:
        write_solution(args.out, sol)
        lines.append(f"wrote {args.out}")
    n_list = _int_list(args.N_list) if isinstance(args.N_list, str) else args.N_list
    if n_list:
        for N in n_list:
            if N < 4:
                raise _Usage(f"positive family starts at N=4, got {N}")
        table = compare_large_N([(N, positive_branch(N)) for N in n_list],
                                continuum=sol)
        for n1, n2, d in table.pairs:
            lines.append(f"distance N={n1} vs N={n2}: {_fmt(d)}")
        for n, d in table.to_continuum:
            lines.append(f"distance N={n} vs continuum: {_fmt(d)}")
        if args.compare_out:
            write_comparison(args.compare_out, table)
            lines.append(f"wrote {args.compare_out}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sp) -> None:
    sp.add_argument("--seed", type=_u64, default=0, help="root-finding RNG seed")
    sp.add_argument("--threads", type=_positive_int, default=1,
                    help="worker cap, recorded in artifact metadata")
    sp.add_argument("--out", help="write the main artifact/report here")
    sp.add_argument("--config", help="JSON file with default argument values")


def _add_system(sp) -> None:
    sp.add_argument("--sh", action="store_true", help="Swift-Hohenberg cast")
    sp.add_argument("--gamma", type=float, help="quadratic strength for --sh")
    sp.add_argument("--system", help="plain-text system file (key = value)")


def _add_pattern(sp) -> None:
    sp.add_argument("-m", type=_positive_int, required=True, help="dihedral order")
    sp.add_argument("-N", type=int, required=True, help="mode truncation")
    sp.add_argument("--a", type=_float_list, help="explicit amplitudes a_0,...,a_N")
    sp.add_argument("--root", type=int, default=0,
                    help="index into the sorted non-harmonic solution list")
    sp.add_argument("--sign", type=_sign_value, default=1,
                    help="pitchfork branch: 1 or -1")
    sp.add_argument("--r0", type=_positive_float, help="core/far seam radius")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turingrings",
        description="Localized dihedral ring patterns near Turing onset",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    registry = {}

    sp = sub.add_parser("coeffs", help="Turing hypotheses and coefficients")
    _add_system(sp)
    _add_common(sp)
    sp.set_defaults(func=cmd_coeffs)
    registry["coeffs"] = sp

    sp = sub.add_parser("match", help="solve the cubic matching equation")
    sp.add_argument("-m", type=_positive_int, required=True)
    sp.add_argument("-N", type=int, required=True)
    sp.add_argument("--starts", type=_positive_int, help="multi-start pool size")
    sp.add_argument("--tol", type=_positive_float, help="residual acceptance")
    sp.add_argument("--compare-reference", action="store_true",
                    help="diff against the embedded reference tables")
    _add_common(sp)
    sp.set_defaults(func=cmd_match)
    registry["match"] = sp

    sp = sub.add_parser("gl", help="far-field envelope homoclinic")
    _add_system(sp)
    sp.add_argument("--c0", type=float, help="linear envelope coefficient")
    sp.add_argument("--c3", type=float, help="cubic envelope coefficient")
    sp.add_argument("--s-max", type=_positive_float, dest="s_max")
    sp.add_argument("--rtol", type=_positive_float)
    _add_common(sp)
    sp.set_defaults(func=cmd_gl)
    registry["gl"] = sp

    sp = sub.add_parser("synthesize", help="sample a ring pattern on a grid")
    _add_system(sp)
    _add_pattern(sp)
    sp.add_argument("--mu", type=_positive_float, required=True,
                    help="bifurcation parameter (must be positive)")
    sp.add_argument("--disc", type=_positive_float, default=20.0,
                    help="half-width of the sampling window")
    sp.add_argument("--resolution", type=_positive_int, default=128,
                    help="samples per axis")
    sp.add_argument("--projection", choices=("u0", "u1"), default="u0")
    sp.add_argument("--modes-out", dest="modes_out",
                    help="also dump per-mode radial amplitudes")
    _add_common(sp)
    sp.set_defaults(func=cmd_synthesize)
    registry["synthesize"] = sp

    sp = sub.add_parser("verify", help="Galerkin residuals and refinement")
    _add_system(sp)
    _add_pattern(sp)
    sp.add_argument("--mu-list", dest="mu_list", type=_float_list,
                    default=[0.08, 0.02], help="seed-residual checkpoints")
    sp.add_argument("--refine", type=_positive_float, metavar="MU",
                    help="Newton-refine the seed at this mu")
    sp.add_argument("--branch", type=_branch_spec, metavar="START:STEP:COUNT",
                    help="continue the refined solution down in mu")
    sp.add_argument("--branch-out", dest="branch_out", help="branch CSV path")
    sp.add_argument("--R-max", dest="R_max", type=_positive_float, default=100.0)
    sp.add_argument("--h", type=_positive_float, default=0.05)
    sp.add_argument("--blend", action="store_true",
                    help="cosine-blend the seed across the seam")
    sp.add_argument("--max-iter", dest="max_iter", type=_positive_int, default=40)
    _add_common(sp)
    sp.set_defaults(func=cmd_verify)
    registry["verify"] = sp

    sp = sub.add_parser("continuum", help="large-N limit of the matching equation")
    sp.add_argument("--grid", type=_positive_int, default=129,
                    help="uniform grid size for the integral solve")
    sp.add_argument("--N-list", dest="N_list", type=_int_list, default=[20, 40, 80],
                    help="discrete truncations to rescale and compare")
    sp.add_argument("--compare-out", dest="compare_out",
                    help="convergence table CSV path")
    _add_common(sp)
    sp.set_defaults(func=cmd_continuum)
    registry["continuum"] = sp

    parser._registry = registry
    return parser


def _apply_config(parser, argv) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise _Usage(f"config file {known.config}: {exc}")
    if not isinstance(cfg, dict):
        raise _Usage(f"config file {known.config}: expected a JSON object")
    for key, value in cfg.items():
        matched = False
        for sp in parser._registry.values():
            if any(a.dest == key for a in sp._actions):
                sp.set_defaults(**{key: value})
                matched = True
        if not matched:
            raise _Usage(f"config file {known.config}: unknown key {key!r}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # argparse already printed the diagnostic
            return int(exc.code or 0)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NotTuring, NotDoubleEigenvalue, DomainError, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Supercritical as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (NoConvergence, StepFailure, SingularJacobian) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
