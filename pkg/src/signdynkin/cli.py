"""Command-line front end.

Exit codes: 0 pass, 1 domain failure, 2 input error, 3 insufficient samples.
"""

import argparse
import hashlib
import sys

import numpy as np

from . import __version__
from .chain import (
    covariance_direct,
    covariance_neumann,
    expected_occupation,
    load_chain,
    schur_restrict,
    signed_precision,
    validate_generator,
)
from .elimination import predict_by_elimination
from .errors import (
    DynkinError,
    InsufficientSamplesError,
    InvalidGeneratorError,
    StructuralError,
)
from .field import (
    cond_independence_check,
    killed_covariance,
    predict_covariance_route,
    predict_direct,
)
from .ou import NoisyObsSpec, OuSpec, noisy_prediction, ou_covariance, ou_generator, signed_ou_covariance
from .paths import (
    McConfig,
    default_workers,
    mc_conditional_cov,
    mc_hitting_coefficients,
    mc_isomorphism_check,
    mc_mu_integral,
    mc_occupation_matrix,
)
from .records import exact_row, mc_row, render_csv, render_json, value_row

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SAMPLES = 0, 1, 2, 3
SUITES = ("occupation", "hitting", "isomorphism", "cond-independence", "claim41")
EXACT_TOL = 1e-10


class InputError(Exception):
    pass


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _load(args):
    try:
        gen, s = load_chain(args.chain)
    except OSError as exc:
        raise InputError(f"{args.chain}: {exc.strerror}") from None
    return gen, s


def _meta(args, digest=None):
    return {
        "tool_version": __version__,
        "chain_digest": digest,
        "seed": args.seed,
        "n_paths": args.paths,
    }


def _states(gen, text):
    if text is None or text == "":
        return ()
    return tuple(gen.index(tok.strip()) for tok in text.split(",") if tok.strip())


def _weights(gen, text):
    """``"state:value,..."``; unlisted states get 0."""
    d = np.zeros(gen.n)
    if not text:
        return d
    for item in text.split(","):
        if not item.strip():
            continue
        label, sep, value = item.rpartition(":")
        if not sep:
            raise InputError(f"weight {item!r} is not of the form state:value")
        try:
            d[gen.index(label.strip())] = float(value)
        except ValueError:
            raise InputError(f"weight {item!r} has a non-numeric value") from None
    return d


def _cfg(args):
    return McConfig(n_paths=args.paths, seed=args.seed, workers=args.workers)


def _emit(args, meta, rows, payload=None):
    text = render_csv(meta, rows) if args.format == "csv" else render_json(meta, rows, payload)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _status(rows):
    flags = [r["passed"] for r in rows if r["passed"] is not None]
    return EXIT_OK if all(flags) else EXIT_FAIL


# -- subcommands -----------------------------------------------------------------

def cmd_validate(args):
    gen, _ = _load(args)
    report = validate_generator(gen)
    rows = [value_row("transience_mode", report.transience_mode, None, None)]
    rows[0]["passed"] = report.valid
    _emit(args, _meta(args, _digest(args.chain)), rows, report.as_dict())
    return EXIT_OK if report.valid else EXIT_FAIL


def cmd_covariance(args):
    gen, s = _load(args)
    if args.method == "neumann":
        sigma = covariance_neumann(gen, s, tol=args.tol)
    else:
        sigma = covariance_direct(gen, s)
    labels = gen.states
    rows = [
        value_row("covariance", labels[i], labels[j], sigma[i, j])
        for i in range(gen.n)
        for j in range(gen.n)
    ]
    payload = {"states": list(labels), "method": args.method, "covariance": sigma}
    _emit(args, _meta(args, _digest(args.chain)), rows, payload)
    return EXIT_OK


def cmd_simulate(args):
    gen, s = _load(args)
    x = gen.index(args.start)
    occ, net = mc_occupation_matrix(gen, s, _cfg(args), starts=(x,))
    green, sigma = expected_occupation(gen), covariance_direct(gen, s)
    lab = gen.states
    rows = [mc_row("occupation", lab[x], lab[y], occ[x, y], green[x, y]) for y in range(gen.n)]
    rows += [mc_row("net_occupation", lab[x], lab[y], net[x, y], sigma[x, y]) for y in range(gen.n)]
    _emit(args, _meta(args, _digest(args.chain)), rows)
    return _status(rows)


def cmd_predict(args):
    gen, s = _load(args)
    target, given = gen.index(args.target), _states(gen, args.given)
    lab = gen.states
    direct = predict_direct(gen, s, given, target)
    payload = direct.as_dict(lab)
    if args.method == "direct":
        rows = [value_row("coefficient", lab[target], lab[a], c) for a, c in zip(given, direct.coefficients)]
    elif args.method == "eliminate":
        order = list(_states(gen, args.order)) if args.order else None
        coef, state = predict_by_elimination(
            signed_precision(gen, s), given, target, order, return_state=True
        )
        rows = [
            exact_row("coefficient", lab[target], lab[a], c, ref, EXACT_TOL)
            for a, c, ref in zip(given, coef, direct.coefficients)
        ]
        payload["elimination_order"] = [lab[v] for v in state.log]
        if args.trace:
            payload["trace"] = [
                {
                    "vertex": lab[t["vertex"]],
                    "fill_in": [[lab[u], lab[v]] for u, v in t["fill_in"]],
                    "dominance_margin": t["dominance_margin"],
                }
                for t in state.trace
            ]
    else:
        est = mc_hitting_coefficients(gen, s, target, given, _cfg(args))
        rows = [
            mc_row("hitting_coefficient", lab[target], lab[a], est[i], direct.coefficients[i])
            for i, a in enumerate(given)
        ]
    _emit(args, _meta(args, _digest(args.chain)), rows, payload)
    return _status(rows)


def _suite_occupation(gen, s, args):
    occ, net = mc_occupation_matrix(gen, s, _cfg(args))
    green, sigma = expected_occupation(gen), covariance_direct(gen, s)
    lab, n = gen.states, gen.n
    rows = [mc_row("occupation", lab[x], lab[y], occ[x, y], green[x, y]) for x in range(n) for y in range(n)]
    rows += [mc_row("net_occupation", lab[x], lab[y], net[x, y], sigma[x, y]) for x in range(n) for y in range(n)]
    return rows, None


def _suite_hitting(gen, s, args):
    if args.target is None or not args.given:
        raise InputError("the hitting suite needs --target and --given")
    lab = gen.states
    b, given = gen.index(args.target), _states(gen, args.given)
    direct = predict_direct(gen, s, given, b)
    textbook = predict_covariance_route(covariance_direct(gen, s), given, b)
    est = mc_hitting_coefficients(gen, s, b, given, _cfg(args))
    rows = []
    for i, a in enumerate(given):
        rows.append(mc_row("hitting_coefficient", lab[b], lab[a], est[i], direct.coefficients[i]))
        rows.append(exact_row("schur_vs_covariance", lab[b], lab[a], direct.coefficients[i], textbook[i], EXACT_TOL))
    cond = mc_conditional_cov(gen, s, b, None, given, _cfg(args))
    ib = direct.rest.index(b)
    for j, b2 in enumerate(direct.rest):
        rows.append(mc_row("conditional_cov", lab[b], lab[b2], cond[b2], direct.cond_cov[ib, j]))
    return rows, direct.as_dict(lab)


def _suite_isomorphism(gen, s, args):
    lab = gen.states
    x = gen.index(args.x if args.x is not None else 0)
    y = gen.index(args.y if args.y is not None else x)
    d = _weights(gen, args.d)
    check = mc_isomorphism_check(gen, s, x, y, d, _cfg(args))
    z_l, z_r, z_lr = check.z_scores()
    gap = check.lhs.mean - check.rhs.mean
    rows = [
        mc_row("gaussian_lhs", lab[x], lab[y], check.lhs, check.analytic),
        mc_row("path_rhs", lab[x], lab[y], check.rhs, check.analytic),
        {
            "name": "lhs_minus_rhs",
            "x": lab[x],
            "y": lab[y],
            "mean": gap,
            "std_error": float(np.hypot(check.lhs.std_error, check.rhs.std_error)),
            "n": check.lhs.n,
            "analytic_reference": 0.0,
            "z_score": z_lr,
            "passed": bool(abs(z_lr) <= 3.0),
        },
    ]
    killed = killed_covariance(gen, s, d)[x, y]
    mu = mc_mu_integral(gen, s, x, y, lambda occ, h: np.exp(-occ @ d) * h, _cfg(args))
    rows.append(mc_row("laplace_mu_integral", lab[x], lab[y], mu, killed))
    payload = {"analytic": check.analytic, "d": {lab[i]: d[i] for i in range(gen.n)}}
    return rows, payload


def _suite_cond_independence(gen, s, args):
    sets = [_states(gen, t) for t in (args.A, args.B, args.C)]
    if not sets[0] or not sets[2]:
        raise InputError("the cond-independence suite needs --A, --B and --C")
    report = cond_independence_check(gen, s, *sets)
    lab = gen.states
    row = exact_row("cond_cov_block", ",".join(lab[a] for a in sets[0]), ",".join(lab[c] for c in sets[2]),
                    report.max_abs, 0.0, report.tol)
    row["passed"] = report.passed
    return [row], {"separated": report.separated, "block": report.block}


def _suite_restriction(gen, s, args):
    m = signed_precision(gen, s)
    sigma = covariance_direct(gen, s)
    lab, n = gen.states, gen.n
    subsets = [_states(gen, args.given)] if args.given else [tuple(range(k)) for k in range(1, n + 1)]
    rows = []
    for a in subsets:
        restricted = np.linalg.inv(schur_restrict(m, a))
        gap = float(np.max(np.abs(restricted - sigma[np.ix_(a, a)])))
        rows.append(exact_row("restricted_inverse", ",".join(lab[i] for i in a), None, gap, 0.0, EXACT_TOL))
    return rows, None


SUITE_RUNNERS = {
    "occupation": _suite_occupation,
    "hitting": _suite_hitting,
    "isomorphism": _suite_isomorphism,
    "cond-independence": _suite_cond_independence,
    "claim41": _suite_restriction,
}


def cmd_verify(args):
    gen, s = _load(args)
    rows, payload = SUITE_RUNNERS[args.suite](gen, s, args)
    meta = _meta(args, _digest(args.chain))
    meta["suite"] = args.suite
    _emit(args, meta, rows, payload)
    return _status(rows)


def _parse_noisy(text):
    pts, sep, var = text.partition(":")
    if not sep:
        raise InputError("--noisy expects 'n1,n2,...:sigma2'")
    try:
        return [int(p) for p in pts.split(",") if p.strip()], float(var)
    except ValueError:
        raise InputError(f"cannot parse --noisy {text!r}") from None


def cmd_ou(args):
    spec = OuSpec(args.a, args.n)
    rows = []
    payload = {}
    if args.noisy:
        pts, var = _parse_noisy(args.noisy)
        values = [float(v) for v in args.values.split(",")] if args.values else None
        result = noisy_prediction(NoisyObsSpec(tuple(pts), var, values), args.query)
        for i, p in enumerate(pts):
            rows.append(value_row("weight_dense", args.query, p, result.dense[i]))
            rows.append(exact_row("weight_recurrence", args.query, p, result.recurrence[i], result.dense[i], EXACT_TOL))
            row = value_row("weight_one_sequence", args.query, p, result.one_sequence[i])
            row["analytic_reference"] = float(result.dense[i])
            rows.append(row)
        payload = result.as_dict()
    else:
        gaussian_only = args.a <= 0
        q = ou_generator(spec, args.boundary, gaussian_only=gaussian_only).q
        precision = -q
        if args.signed:
            signs = [_sign_token(t) for t in args.signed.split(",")]
            if len(signs) != args.n - 1:
                raise InputError(f"--signed needs {args.n - 1} consecutive signs")
            s = np.eye(args.n)
            for i, sg in enumerate(signs):
                s[i, i + 1] = s[i + 1, i] = sg
            s[s == 0] = 1.0
            sigma = signed_ou_covariance(spec, s)
            precision = -q * s
        else:
            sigma = ou_covariance(spec)
        route2 = np.linalg.inv(precision)
        gap = float(np.max(np.abs(route2 - sigma)))
        # raw truncation is shown for contrast, not expected to agree
        rows.append(exact_row("covariance_gap", args.boundary, None, gap, 0.0, EXACT_TOL if args.boundary == "corrected" else np.inf))
        payload = {"recursion_covariance": sigma, "inverse_precision": route2, "max_gap": gap}
    _emit(args, _meta(args), rows, payload)
    return _status(rows)


def _sign_token(tok):
    tok = tok.strip()
    if tok in ("+", "+1", "1"):
        return 1.0
    if tok in ("-", "-1"):
        return -1.0
    raise InputError(f"bad sign {tok!r}")


# -- wiring ---------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="signdynkin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, chain=True):
        if chain:
            p.add_argument("chain", help="chain definition file (JSON)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--paths", type=int, default=100_000)
        p.add_argument("--workers", type=int, default=default_workers())
        p.add_argument("--output", "-o")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("validate", help="check a generator")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("covariance", help="signed covariance (-Q o S)^-1")
    common(p)
    p.add_argument("--method", choices=("direct", "neumann"), default="direct")
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser("simulate", help="occupation estimates from one start state")
    common(p)
    p.add_argument("--start", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("predict", help="kriging weights")
    common(p)
    p.add_argument("--target", required=True)
    p.add_argument("--given", required=True)
    p.add_argument("--method", choices=("direct", "eliminate", "mc"), default="direct")
    p.add_argument("--order", help="elimination order (default: minimum degree)")
    p.add_argument("--trace", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify", help="run a verification suite")
    common(p)
    p.add_argument("--suite", choices=SUITES, required=True)
    p.add_argument("--target")
    p.add_argument("--given")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--d", help="per-state weights 'state:value,...'")
    p.add_argument("--A")
    p.add_argument("--B", default="")
    p.add_argument("--C")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ou", help="Ornstein-Uhlenbeck and noisy free-field examples")
    common(p, chain=False)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--boundary", choices=("corrected", "raw"), default="corrected")
    p.add_argument("--signed", help="consecutive signs, e.g. '+,-,+'")
    p.add_argument("--noisy", help="'n1,n2,...:sigma2'")
    p.add_argument("--query", type=int, default=1)
    p.add_argument("--values", help="observed values for the noisy example")
    p.set_defaults(func=cmd_ou)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InsufficientSamplesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SAMPLES
    except (InputError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvalidGeneratorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except DynkinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
