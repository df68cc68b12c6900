"""Command-line front end.

Evaluates analytic curves, runs and validates Monte Carlo samples and runs
the self-test suite.  Output is CSV (header row, shortest round-trip floats)
or JSON (columns as arrays plus a `meta` object), written atomically.

Exit codes: 0 success, 2 usage or domain error, 3 convergence failure,
4 validation failure.
"""
import argparse
import json
import sys
import time

import numpy as np

from . import __version__, chempot, chgue_finite, hard_edge, montecarlo, selftest, wilson
from .numerics import ConvergenceError

DEFAULT_SEED = 20240611
EXIT_OK, EXIT_USAGE, EXIT_CONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing helpers

def parse_grid(text):
    """`min:max:points`, endpoints included."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError("grid must look like min:max:points, got %r" % text)
    if n < 1 or (n > 1 and not hi > lo) or not (np.isfinite(lo) and np.isfinite(hi)):
        raise UsageError("bad grid %r" % text)
    return np.linspace(lo, hi, n)


def parse_grid2d(text):
    """`xmin:xmax:nx,ymin:ymax:ny`."""
    try:
        xs, ys = text.split(",")
    except ValueError:
        raise UsageError("2-d grid must look like xmin:xmax:nx,ymin:ymax:ny, got %r" % text)
    return parse_grid(xs), parse_grid(ys)


def parse_masses(text):
    if not text:
        return ()
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError("masses must be a comma-separated list of numbers")


def _fmt(v):
    # shortest round-trip representation of a 64-bit float
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {k: _jsonable(u) for k, u in v.items()}
    return v


def run_config(args):
    """The RunConfig echoed into JSON output: every parsed option but the output path."""
    cfg = {k: v for k, v in sorted(vars(args).items())
           if k not in ("output", "func") and v is not None}
    return _jsonable(cfg)


def render(columns, args, fmt):
    """Serialize ordered columns (name -> 1-d array) as CSV or JSON bytes."""
    names = list(columns)
    if fmt == "json":
        doc = {name: [_jsonable(float(v)) for v in np.asarray(columns[name]).ravel()]
               for name in names}
        doc["meta"] = {"config": run_config(args), "version": __version__}
        return (json.dumps(doc, indent=1, sort_keys=False) + "\n").encode()
    rows = [",".join(names)]
    cols = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    for i in range(len(cols[0]) if cols else 0):
        rows.append(",".join(_fmt(c[i]) for c in cols))
    return ("\n".join(rows) + "\n").encode()


def emit(columns, args, summary):
    data = render(columns, args, args.format)
    if args.output:
        montecarlo._atomic_write(args.output, data)
        print(summary)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        print(summary, file=sys.stderr)


# ---------------------------------------------------------------------------
# analytic commands

def _spec(args):
    return chgue_finite.EnsembleSpec(args.N, args.nu, parse_masses(args.masses))


def cmd_density(args):
    x = parse_grid(args.grid)
    masses = parse_masses(args.masses)
    if args.regime == "finite":
        if np.any(x < 0):
            raise UsageError("finite-N density lives on x >= 0")
        rho = chgue_finite.density(_spec(args), x)
    elif args.regime == "micro":
        if np.any(x < 0):
            raise UsageError("microscopic density lives on x >= 0")
        rho = hard_edge.density_micro(hard_edge.MicroArgs(args.nu, masses), x)
    elif args.regime == "finite-rescaled":
        rho = hard_edge.density_finite_rescaled(args.N, args.nu, masses, x)
    else:  # d5-a0
        rho, zero_modes = hard_edge.density_d5_a0(args.nu, args.m, x)
    rho = np.atleast_1d(rho)
    emit({"x": x, "rho": rho}, args,
         "density %s nu=%d: %d points, max rho %.6g" % (args.regime, args.nu, len(x), np.max(rho)))


def _check_s(s):
    if np.any(s < 0):
        raise UsageError("s must be >= 0")


def cmd_gap(args):
    s = parse_grid(args.grid)
    _check_s(s)
    masses = parse_masses(args.masses)
    if args.regime == "finite":
        e0 = chgue_finite.gap_e0(_spec(args), s)
    elif masses:
        e0 = hard_edge.e0_micro_massive(args.nu, masses, s, N=args.N)
    else:
        e0 = hard_edge.e0_micro(args.nu, s)
    e0 = np.atleast_1d(e0)
    emit({"s": s, "E0": e0}, args, "gap %s nu=%d: E0(%g) = %.6g" % (args.regime, args.nu, s[-1], e0[-1]))


def cmd_smallest(args):
    s = parse_grid(args.grid)
    _check_s(s)
    masses = parse_masses(args.masses)
    if args.regime == "finite":
        p = chgue_finite.p1(_spec(args), s)
    elif masses:
        p = hard_edge.p1_micro_massive(args.nu, masses, s, N=args.N)
    else:
        p = hard_edge.p1_micro(args.nu, s)
    p = np.atleast_1d(p)
    emit({"s": s, "p1": p}, args, "smallest %s nu=%d: max p1 %.6g" % (args.regime, args.nu, np.max(p)))


def cmd_partition(args):
    masses = parse_masses(args.masses)
    if args.regime == "finite":
        z = chgue_finite.z_massive(_spec(args))
    elif args.regime == "micro":
        z = hard_edge.z_micro(args.nu, masses)
    else:  # micro-degenerate: N_f copies of one mass
        if len(set(masses)) > 1:
            raise UsageError("micro-degenerate needs equal masses")
        val = hard_edge.z_micro_degenerate(args.nu, len(masses), masses[0] if masses else 0.0)
        z = chgue_finite.SignedLog(float(np.sign(val)), float(np.log(abs(val))) if val else -np.inf)
    emit({"sign": [z.sign], "log_abs": [z.log], "value": [z.value]}, args,
         "partition %s nu=%d Nf=%d: Z = %.12g" % (args.regime, args.nu, len(masses), z.value))


def cmd_group_integral(args):
    analytic = wilson.z_wechpt(args.nf, args.nu, args.m_hat, args.a8)
    cols = {"analytic": [analytic]}
    summary = "group-integral Nf=%d nu=%d: analytic %.12g" % (args.nf, args.nu, analytic)
    if args.samples:
        est, err = montecarlo.mc_group_integral(args.nf, args.nu, args.m_hat, args.a8,
                                                args.samples, montecarlo.RngStream(args.seed))
        pull = (est.real - analytic) / err.real if err.real > 0 else 0.0
        cols.update({"mc_re": [est.real], "mc_im": [est.imag], "mc_err_re": [err.real],
                     "mc_err_im": [err.imag], "pull": [pull]})
        summary += ", Haar MC %.6g +- %.2g (%.2f sigma)" % (est.real, err.real, pull)
    emit(cols, args, summary)


def cmd_wilson_z(args):
    m = parse_grid(args.grid)
    if np.any(m < 0):
        raise UsageError("m_hat must be >= 0")
    z = np.array([wilson.z_wechpt(args.nf, args.nu, v, args.a8) for v in m])
    cols = {"m_hat": m, "z": z}
    if args.nf == 1:
        cols["z_gaussian"] = np.array([wilson.z_wechpt_nf1_gaussian(args.nu, v, args.a8) for v in m])
    emit(cols, args, "wilson-z Nf=%d nu=%d a8=%g: %d points" % (args.nf, args.nu, args.a8, len(m)))


def cmd_mu_density(args):
    x, y = parse_grid2d(args.grid)
    zz = (x[None, :] + 1j * y[:, None]).ravel()
    rho = np.zeros(zz.shape)
    # the density vanishes like |z|^2 at the origin
    nz = zz != 0
    if args.regime == "micro":
        rho[nz] = chempot.density_micro_mu(args.nu, args.mu_hat, zz[nz])
    else:
        p = chempot.MuParams.weak(args.N, args.nu, args.mu_hat, parse_masses(args.masses))
        rho[nz] = np.real(chempot.density_finite_mu_dirac(p, zz[nz]))
    emit({"x": zz.real, "y": zz.imag, "rho": rho}, args,
         "mu-density %s nu=%d mu_hat=%g: %d points" % (args.regime, args.nu, args.mu_hat, len(zz)))


# ---------------------------------------------------------------------------
# Monte Carlo

def _mu_params(args):
    if args.mu_hat is not None:
        return chempot.MuParams.weak(args.N, args.nu, args.mu_hat)
    return chempot.MuParams(args.N, args.nu, args.mu)


def sample_batch(args):
    rng = montecarlo.RngStream(args.seed)
    if args.model == "chgue":
        return montecarlo.sample_chgue(args.N, args.nu, rng, args.samples, args.threads)
    if args.model == "wilson_d5":
        p = wilson.WilsonParams(n=args.n, nu=args.nu, a=args.a, m=args.m)
        return montecarlo.sample_wilson_d5(p, rng, args.samples, args.threads)
    return montecarlo.sample_mu_product(_mu_params(args), rng, args.samples, args.threads,
                                        smallest=args.smallest)


def cmd_mc_sample(args):
    if args.samples < 1:
        raise UsageError("samples must be >= 1")
    batch = sample_batch(args)
    summary = "mc sample %s: %d samples of %d eigenvalues, seed %d" % (
        batch.model_tag, batch.samples, batch.eigenvalues.shape[1], args.seed)
    if args.format == "binary":
        if not args.output:
            raise UsageError("binary output needs --output")
        batch.to_binary(args.output)
        print(summary)
    elif args.format == "csv" and args.output:
        batch.to_csv(args.output)
        print(summary)
    else:
        ev = batch.eigenvalues
        cols = {"stream": batch.provenance[:, 0], "draw": batch.provenance[:, 1]}
        for i in range(ev.shape[1]):
            if np.iscomplexobj(ev):
                cols["ev%d_re" % i] = ev[:, i].real
                cols["ev%d_im" % i] = ev[:, i].imag
            else:
                cols["ev%d" % i] = ev[:, i]
        emit(cols, args, summary)


_VALIDATE_GRIDS = {"density": "0.25:9.75:39", "smallest": "0:6:31", "gap": "0:4:41"}


def _bin_average(f, edges, nodes=16):
    t, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1], edges[1:]
    pts = 0.5 * (hi - lo)[:, None] * t[None, :] + 0.5 * (hi + lo)[:, None]
    vals = np.asarray(f(pts.ravel())).reshape(pts.shape)
    return 0.5 * vals @ w


def validate_chgue(args):
    """Compare a chGUE run with the microscopic limit; returns (columns, consistent fraction)."""
    if args.masses:
        raise UsageError("the chGUE sampler is quenched; masses are not supported")
    grid = parse_grid(args.grid or _VALIDATE_GRIDS[args.observable])
    batch = montecarlo.sample_chgue(args.N, args.nu, montecarlo.RngStream(args.seed),
                                    args.samples, args.threads)
    xt = montecarlo.rescale_hard_edge(batch, "wishart_to_dirac")
    n = batch.samples
    if args.observable == "gap":
        _check_s(grid)
        mc = (xt[:, 0][:, None] > grid[None, :]).mean(axis=0)
        err = np.sqrt(mc * (1.0 - mc) / n)
        analytic = np.atleast_1d(hard_edge.e0_micro(args.nu, grid))
        x = grid
        sigma = np.sqrt(np.maximum(analytic * (1.0 - analytic), 1e-300) / n)
    else:
        if len(grid) < 2:
            raise UsageError("histogram validation needs at least two bin edges")
        if args.observable == "density":
            f = lambda v: hard_edge.density_quenched(args.nu, v)
            h = montecarlo.estimate_density(xt, grid)
        else:
            f = lambda v: hard_edge.p1_micro(args.nu, np.abs(v))
            h = montecarlo.estimate_density(xt[:, 0], grid, samples=n)
        analytic = _bin_average(f, grid)
        mc, err = h.density, h.error
        x = h.centers[0]
        # Poisson sigma from the expected count
        sigma = np.sqrt(np.maximum(analytic, 0.0) / (n * h.areas))
    ok = np.abs(mc - analytic) <= 3.0 * np.maximum(sigma, err)
    return {"x": x, "analytic": analytic, "mc": mc, "mc_err": err}, float(ok.mean())


def cmd_mc_validate(args):
    if args.model != "chgue":
        raise UsageError("mc validate supports --model chgue")
    if args.samples < 1:
        raise UsageError("samples must be >= 1")
    cols, frac = validate_chgue(args)
    passed = frac >= args.min_fraction
    emit(cols, args, "mc validate chgue %s N=%d nu=%d: %.1f%% of %d points within 3 sigma (%s)" % (
        args.observable, args.N, args.nu, 100.0 * frac, len(cols["x"]), "pass" if passed else "FAIL"))
    return EXIT_OK if passed else EXIT_VALIDATION


def cmd_selftest(args):
    t0 = time.time()
    report = selftest.run(args.filter)
    failed = [r for r in report if r["status"] != "pass"]
    for r in report:
        print("%-40s %-6s metric=%.3g tol=%.3g (%.2fs)" % (
            r["name"], r["status"][:6], r["metric"], r["tolerance"], r["seconds"]), file=sys.stderr)
    if args.report:
        data = json.dumps(_jsonable(report), indent=1) + "\n"
        montecarlo._atomic_write(args.report, data.encode())
    print("selftest: %d checks, %d failed, %.1fs" % (len(report), len(failed), time.time() - t0))
    if not report:
        print("no checks match filter %r" % args.filter, file=sys.stderr)
        return EXIT_USAGE
    return EXIT_VALIDATION if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument grammar

def _common(p, grid=None, fmt=("csv", "json")):
    p.add_argument("--N", type=int, default=10, help="matrix size")
    p.add_argument("--nu", type=int, default=0, help="topological index")
    p.add_argument("--masses", default="", help="comma-separated masses")
    if grid is not None:
        p.add_argument("--grid", default=grid, help="min:max:points")
    p.add_argument("--output", "-o", help="output path (default stdout)")
    p.add_argument("--format", choices=fmt, default="csv")


def _mc_opts(p):
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=None, help="worker cap (default $RMT_THREADS or 1)")


def build_parser():
    ap = argparse.ArgumentParser(prog="chiralrmt", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version="chiralrmt " + __version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="spectral density on a grid")
    p.add_argument("--regime", choices=("finite", "micro", "finite-rescaled", "d5-a0"), default="micro")
    p.add_argument("--m", type=float, default=0.0, help="quark mass for d5-a0")
    _common(p, "0:10:101")
    p.set_defaults(func=cmd_density)

    for name, fn, what in (("gap", cmd_gap, "gap probability E0(s)"),
                           ("smallest", cmd_smallest, "smallest-eigenvalue density p1(s)")):
        p = sub.add_parser(name, help=what)
        p.add_argument("--regime", choices=("finite", "micro"), default="micro")
        _common(p, "0:5:51")
        p.set_defaults(func=fn)

    p = sub.add_parser("partition", help="partition function with mass insertions")
    p.add_argument("--regime", choices=("finite", "micro", "micro-degenerate"), default="micro")
    _common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("group-integral", help="unitary group integral, analytic and Haar MC")
    p.add_argument("--nf", type=int, default=2)
    p.add_argument("--nu", type=int, default=0)
    p.add_argument("--m-hat", type=float, default=1.0)
    p.add_argument("--a8", type=float, default=0.0)
    p.add_argument("--samples", type=int, default=0, help="Haar samples (0: analytic only)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--output", "-o")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_group_integral)

    p = sub.add_parser("wilson-z", help="partition function at finite lattice spacing vs m_hat")
    p.add_argument("--nf", type=int, default=1)
    p.add_argument("--nu", type=int, default=0)
    p.add_argument("--a8", type=float, default=0.5)
    p.add_argument("--grid", default="0:3:31", help="m_hat grid min:max:points")
    p.add_argument("--output", "-o")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_wilson_z)

    p = sub.add_parser("mu-density", help="complex density at non-zero chemical potential")
    p.add_argument("--regime", choices=("finite", "micro"), default="micro")
    p.add_argument("--mu-hat", type=float, default=0.5)
    _common(p, "0:8:33,-1:1:9")
    p.set_defaults(func=cmd_mu_density)

    mc = sub.add_parser("mc", help="Monte Carlo sampling and validation")
    msub = mc.add_subparsers(dest="mc_command", required=True)
    p = msub.add_parser("sample", help="draw eigenvalue samples")
    p.add_argument("--model", choices=montecarlo.MODEL_TAGS, default="chgue")
    p.add_argument("--n", type=int, default=1, help="Wilson block size")
    p.add_argument("--a", type=float, default=0.2, help="Wilson lattice spacing")
    p.add_argument("--m", type=float, default=0.0, help="Wilson quark mass")
    p.add_argument("--mu", type=float, default=0.1, help="chemical potential")
    p.add_argument("--mu-hat", type=float, default=None, help="weak-limit mu_hat (overrides --mu)")
    p.add_argument("--smallest", type=int, default=None, help="keep the k smallest-modulus eigenvalues")
    _common(p, fmt=("csv", "json", "binary"))
    _mc_opts(p)
    p.set_defaults(func=cmd_mc_sample)

    p = msub.add_parser("validate", help="compare a Monte Carlo run with the analytic limit")
    p.add_argument("--model", default="chgue")
    p.add_argument("--observable", choices=("density", "smallest", "gap"), default="density")
    p.add_argument("--min-fraction", type=float, default=0.95,
                   help="required fraction of points within 3 sigma")
    _common(p, grid=None)
    p.add_argument("--grid", default=None, help="bin edges (or s values for gap), min:max:points")
    _mc_opts(p)
    p.set_defaults(func=cmd_mc_validate, N=100)

    p = sub.add_parser("selftest", help="run the oracle suite")
    p.add_argument("--filter", default=None, help="only checks whose name or tags contain this")
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_selftest)
    return ap


def _join_grid_values(argv):
    # "--grid -1:1:3" would be read as an option; glue such values to the flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--grid":
            nxt = next(it, None)
            if nxt is None:
                out.append(tok)
            else:
                out.append("--grid=" + nxt)
        else:
            out.append(tok)
    return out


def run(argv=None):
    """Parse argv and execute; returns the exit code."""
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = ap.parse_args(_join_grid_values(argv))
    except SystemExit as exc:   # argparse: 0 for --help/--version, 2 for usage
        return int(exc.code or 0)
    try:
        code = args.func(args)
    except ConvergenceError as exc:
        print("chiralrmt: convergence failure: %s" % exc, file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ValueError, NotImplementedError) as exc:   # includes DomainError and UsageError
        print("chiralrmt: error: %s" % exc, file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK if code is None else code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
