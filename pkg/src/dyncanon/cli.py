"""Command-line front end.

Exit status: 0 when every check passes, 1 when a check or computation
fails, 2 on malformed input.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import explicit as ex
from . import matcore as mc
from . import verify as vf
from ._kernels import BACKEND
from .errors import GBDTError, ShapeError
from .scenario import ScenarioError, load_scenario
from .serialization import dumps, field_to_csv, matrix_from_json, matrix_to_json
from .triple import SignatureJ, complete_S0, random_admissible, triple_from_json, triple_to_json, verify_identity

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

log = logging.getLogger("dyncanon")


class InputError(Exception):
    pass


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from None


def _load(path):
    try:
        return load_scenario(path)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    except ScenarioError as e:
        raise InputError(str(e)) from None
    except (GBDTError, ValueError, KeyError, TypeError) as e:
        raise InputError(f"{path}: {e}") from None


def _emit(text, path=None):
    if path is None:
        sys.stdout.write(text)
    else:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        # newline="" keeps the bytes identical across platforms
        with open(path, "w", newline="") as fh:
            fh.write(text)


# -- triple ----------------------------------------------------------------

def cmd_triple(args) -> int:
    if args.action == "verify":
        try:
            t = triple_from_json(_read_json(args.file))
        except (GBDTError, ValueError) as e:
            raise InputError(str(e)) from None
        chk = verify_identity(t, rtol=args.rtol)
        pd = mc.posdef_check(t.S0)
        ok = chk.ok and pd.is_pd
        _emit(dumps({"residual": chk.residual, "bound": chk.bound, "ok": ok,
                     "S0_min_eig": pd.min_eig, "S0_positive_definite": pd.is_pd}))
        return EXIT_OK if ok else EXIT_FAIL
    if args.action == "generate":
        seed = args.seed
        if seed is None:
            env = os.environ.get("GBDT_SEED", "")
            try:
                seed = int(env) if env else 0
            except ValueError:
                raise InputError(f"GBDT_SEED must be an integer, got {env!r}") from None
        t = random_admissible(args.n, SignatureJ(args.m1, args.m2), seed,
                              spectrum=args.spectrum, method=args.method)
        _emit(dumps(triple_to_json(t)), args.output)
        return EXIT_OK
    # complete
    obj = _read_json(args.file)
    try:
        sig = SignatureJ(int(obj["m1"]), int(obj["m2"]))
        A = matrix_from_json(obj["A"], "A")
        Pi0 = matrix_from_json(obj["Pi0"], "Pi0")
    except KeyError as e:
        raise InputError(f"{args.file}: missing field {e}") from None
    except (GBDTError, ValueError) as e:
        raise InputError(str(e)) from None
    t = complete_S0(A, Pi0, sig)
    _emit(dumps(triple_to_json(t)), args.output)
    return EXIT_OK


# -- solve -----------------------------------------------------------------

def _solve_field(sc):
    g = sc.grid
    if sc.engine == "explicit":
        model = ex.build_model(sc.triple)
        f = ex.field(model, g.xs, g.ts)
        meta = {"engine": "explicit", "route": model.route}
        return f, meta, model
    from .generalham import general_field, integrate, parse_hamiltonian

    if g.x0 != 0.0:
        raise InputError("the general engine needs grid.x0 = 0")
    dx = (g.x1 - g.x0) / (g.nx - 1)
    stride = int(round(dx / sc.step))
    if stride < 1 or abs(stride * sc.step - dx) > 1e-9 * max(dx, 1.0):
        raise InputError(f"grid spacing {dx:g} is not a multiple of the step {sc.step:g}")
    try:
        H = parse_hamiltonian(sc.hamiltonian, sc.triple.m)
    except (OSError, ValueError) as e:
        raise InputError(f"hamiltonian: {e}") from None
    tr = integrate(sc.triple, H, g.x1, sc.step)
    if not tr.complete:
        raise GBDTError(tr.failure)
    f = general_field(tr, g.ts, stride)
    meta = dict(tr.meta)
    return f, meta, None


def cmd_solve(args) -> int:
    sc = _load(args.scenario)
    f, meta, model = _solve_field(sc)
    g = sc.grid
    meta.update({
        "scenario": sc.name,
        "grid": {"x0": g.x0, "x1": g.x1, "nx": g.nx, "t0": g.t0, "t1": g.t1, "nt": g.nt},
        "dx": (g.x1 - g.x0) / (g.nx - 1),
        "dt": (g.t1 - g.t0) / (g.nt - 1) if g.nt > 1 else 0.0,
        "n": sc.triple.n, "m1": sc.triple.sig.m1, "m2": sc.triple.sig.m2,
        "rows": {"Y": int(f.Y[..., 0, 0].size * sc.triple.m * sc.triple.n),
                 "Hcal": int(g.nx * sc.triple.m ** 2)},
        "cond_max": float(f.cond_max),
    })
    if "condition_warning" in f.meta:
        meta["condition_warning"] = f.meta["condition_warning"]
    if args.kappa:
        if model is None:
            raise InputError("kappa limits need the explicit engine")
        kl = ex.kappa_limits(model, sc.x_max, 1e-8)
        meta["kappa"] = {"x_max": sc.x_max, "kQ": matrix_to_json(kl.kQ), "kR": matrix_to_json(kl.kR),
                         "kS": matrix_to_json(kl.kS), "converged": kl.converged}
    field_path = args.field or sc.output_path("field")
    meta_path = args.metadata or sc.output_path("metadata")
    _emit(field_to_csv(f), field_path)
    if meta_path is not None:
        _emit(dumps(meta), meta_path)
    elif field_path is not None:
        _emit(dumps(meta))
    return EXIT_OK


# -- check -----------------------------------------------------------------

def cmd_check(args) -> int:
    sc = _load(args.scenario)
    if args.checks:
        sc.checks = args.checks.split(",")
    rep = vf.run_suite(sc)
    text = dumps(rep.to_json())
    out = args.report or sc.output_path("report")
    if out is not None:
        _emit(text, out)
    if out is None or not args.quiet:
        _emit(text)
    for c in rep.checks:
        if not c.passed:
            log.warning("check %s failed: residual %s > bound %g (%s)", c.name, c.residual, c.bound, c.context)
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- asymptotics -----------------------------------------------------------

def cmd_asymptotics(args) -> int:
    sc = _load(args.scenario)
    if sc.engine != "explicit":
        raise InputError("asymptotics need the explicit engine")
    x_max = args.x_max or sc.x_max
    model = ex.build_model(sc.triple)
    kl = ex.kappa_limits(model, 2.0 * x_max, args.tol)
    lim = ex.wa_limit(model, kl.kQ, kl.kR)
    xs, d = vf.wa_limit_path(model, x_max, lim)
    noise = vf.noise_floor(model, xs)
    rep = vf.Report()
    rep.add(vf.Check("wa_limit", float(d[-1]), sc.tolerances.get("wa_limit", vf.DEFAULT_BOUNDS["wa_limit"]),
                     f"x_max={x_max:g}"))
    rep.add(vf.Check("wa_limit_monotone", vf._eventually_decreasing(d, floor=noise), 0.0,
                     f"noise floor {noise:.1e}"))
    rep.add(vf.decay_suite(model, x_max, bound=sc.tolerances.get("decay", vf.DEFAULT_BOUNDS["decay"])))
    out = {
        "x_max": x_max,
        "limits_at": 2.0 * x_max,
        "kappa": {"kQ": matrix_to_json(kl.kQ), "kR": matrix_to_json(kl.kR), "kS": matrix_to_json(kl.kS),
                  "converged": kl.converged, "last_diff": kl.last_diff},
        "wa_limit": matrix_to_json(lim),
        "schedule": [float(x) for x in xs],
        "wa_deviation": [float(v) for v in d],
        "checks": rep.to_json(),
    }
    _emit(dumps(out), args.output)
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- boundary --------------------------------------------------------------

def cmd_boundary(args) -> int:
    sc = _load(args.scenario)
    sub = args.subspace
    if sub is None:
        sub = sc.subspace
    elif not sub.startswith("schur:"):
        sub = matrix_from_json(_read_json(sub), "subspace")
    try:
        L = vf.subspace_basis(sc.triple, sub)
    except ShapeError as e:
        raise InputError(str(e)) from None
    if sc.engine == "explicit":
        engine = ex.build_model(sc.triple)
    else:
        from .generalham import integrate, parse_hamiltonian

        engine = integrate(sc.triple, parse_hamiltonian(sc.hamiltonian, sc.triple.m), sc.grid.x1, sc.step)
    a = args.a if args.a is not None else sc.grid.x1
    bd = vf.boundary_design(engine, a, L)
    bound = sc.tolerances.get("boundary", vf.DEFAULT_BOUNDS["boundary"])
    spread = float(bd.residuals.max() - bd.residuals.min())
    ok = bd.residual <= bound and spread <= vf.DEFAULT_BOUNDS["boundary_t_uniform"]
    _emit(dumps({"a": a, "k": int(L.shape[1]), "W": matrix_to_json(bd.W), "residual": bd.residual,
                 "t_spread": spread, "bound": bound, "pass": bool(ok)}), args.output)
    return EXIT_OK if ok else EXIT_FAIL


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dyncanon", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    pt = sub.add_parser("triple", help="verify, generate or complete a parameter triple")
    tsub = pt.add_subparsers(dest="action", required=True)
    tv = tsub.add_parser("verify", help="check the parameter identity and S0 > 0")
    tv.add_argument("file")
    tv.add_argument("--rtol", type=float, default=1e-10)
    tg = tsub.add_parser("generate", help="draw a random admissible triple")
    tg.add_argument("--n", type=int, required=True)
    tg.add_argument("--m1", type=int, required=True)
    tg.add_argument("--m2", type=int, required=True)
    tg.add_argument("--seed", type=int, default=None, help="defaults to $GBDT_SEED, then 0")
    tg.add_argument("--spectrum", choices=("offreal", "upper", "lower", "any"), default="offreal")
    tg.add_argument("--method", choices=("inertia", "lyapunov"), default="inertia")
    tg.add_argument("-o", "--output")
    tc = tsub.add_parser("complete", help="solve for S0 given A and Pi0")
    tc.add_argument("file")
    tc.add_argument("-o", "--output")

    ps = sub.add_parser("solve", help="write the solution field as CSV plus metadata JSON")
    ps.add_argument("scenario")
    ps.add_argument("--field", help="CSV path (default: scenario outputs.field, else stdout)")
    ps.add_argument("--metadata", help="metadata JSON path (default: scenario outputs.metadata)")
    ps.add_argument("--kappa", action="store_true", help="include kappa limits in the metadata")

    pc = sub.add_parser("check", help="run the verification suite")
    pc.add_argument("scenario")
    pc.add_argument("--report", help="report JSON path (default: scenario outputs.report)")
    pc.add_argument("--checks", help="comma-separated check names overriding the scenario list")
    pc.add_argument("-q", "--quiet", action="store_true", help="do not echo the report when writing a file")

    pa = sub.add_parser("asymptotics", help="kappa limits, limit of w_A(x,0) and the decay suite")
    pa.add_argument("scenario")
    pa.add_argument("--x-max", type=float, default=None)
    pa.add_argument("--tol", type=float, default=1e-8)
    pa.add_argument("-o", "--output")

    pb = sub.add_parser("boundary", help="boundary matrix from an invariant subspace")
    pb.add_argument("scenario")
    pb.add_argument("--subspace", help="basis JSON file or schur:<predicate>")
    pb.add_argument("--a", type=float, default=None, help="right end (default: grid.x1)")
    pb.add_argument("-o", "--output")
    return p


COMMANDS = {
    "triple": cmd_triple,
    "solve": cmd_solve,
    "check": cmd_check,
    "asymptotics": cmd_asymptotics,
    "boundary": cmd_boundary,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.info("kernel backend: %s", BACKEND)
    try:
        return COMMANDS[args.command](args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except GBDTError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
