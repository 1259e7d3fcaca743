"""Command-line front end.

Every subcommand resolves a job spec (command, parameters, output directory,
seed), runs it and emits a JSON report that embeds the resolved spec.
Exit codes: 0 success, 1 usage error, 2 numerical failure or
non-convergence, 3 hypothesis violation.
"""

import argparse
import concurrent.futures as cf
import csv
import glob
import itertools
import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_HYPOTHESIS = 0, 1, 2, 3


class UsageError(ValueError):
    pass


class HypothesisViolation(RuntimeError):
    pass


GRID = {"radius": 0.8, "n_r": 32, "n_theta": 64, "beta": 0.4}
SOLVE = {"tol": 1e-8, "max_iter": 40}

COMMANDS = {
    "solve-hitchin": dict(n=2, q={}, **GRID, **SOLVE, path="auto"),
    "solve-chain": dict(gammas=[[1.0]], cyclic=None, **GRID, **SOLVE),
    "solve-curvature": dict(alpha=[1.0], u_bdry="exact", **dict(GRID, radius=0.9), tol=1e-10, max_iter=40),
    "exhaust": dict(n=2, q={}, r0=0.5, n_stages=6, rho_obs=0.5, n_r=48, n_theta=96, **SOLVE),
    "uniqueness": dict(n=2, q={}, eps=0.1, r0=0.5, n_stages=6, rho_obs=0.5, n_r=48, n_theta=96, **SOLVE),
    "classify-ab": dict(f="power:-1", levels=10),
    "gauge-normalize": dict(theta=None, random=0, n=3, max_degree=2),
    "collier": dict(n=2, mu=[1.0], nu=[0.0], q={}, h_m=1.0, boundary="hx", check_rss=False, solve_graded=False,
                    solve_full=False, **dict(GRID, n_r=16, n_theta=32), **SOLVE),
    "gothen": dict(mu=[1.0], nu=[0.0], q2=[0.0], h_l=1.0, check_rss=False, solve_graded=False, solve_full=False,
                   **dict(GRID, n_r=16, n_theta=32), **SOLVE),
    "verify": dict(),
    "sweep": dict(spec=None),
    "report": dict(dir=None),
}

HELP = {
    "solve-hitchin": "Dirichlet problem for the companion field theta(q) with boundary h_X",
    "solve-chain": "Toda system of a line chain with boundary h_X",
    "solve-curvature": "1/4 Lap u = |alpha|^2 e^{2u}",
    "exhaust": "Dirichlet solves on an increasing radius schedule",
    "uniqueness": "exhaustion with h_X and a perturbed boundary family",
    "classify-ab": "class A / A^b verdict for a function on the disk",
    "gauge-normalize": "exact gauge normalization to companion form",
    "collier": "SO(n, n+1) Collier section stages",
    "gothen": "Sp(4, R) Gothen section stages",
    "verify": "quick self-checks of constants and identities",
    "sweep": "run a parameter grid of jobs and aggregate a CSV",
    "report": "summarize the artifacts of an output directory",
}


@dataclass
class JobSpec:
    command: str
    params: dict = field(default_factory=dict)
    out: str = None
    seed: int = 0
    deterministic: bool = False

    def resolved(self):
        """Spec with defaults filled in; unknown parameters are rejected."""
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        defaults = COMMANDS[self.command]
        unknown = sorted(set(self.params) - set(defaults))
        if unknown:
            raise UsageError(f"unknown parameters for {self.command}: {', '.join(unknown)}")
        params = dict(defaults)
        params.update(self.params)
        return JobSpec(self.command, params, self.out, int(self.seed), bool(self.deterministic))


# ---------------------------------------------------------------- helpers


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k != "seconds"}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _coeffs(raw):
    from .bundle import _parse_coeffs

    if isinstance(raw, (int, float)):
        return [complex(raw)]
    return _parse_coeffs(raw)


def _differentials(n, q):
    from .bundle import DifferentialTuple

    return DifferentialTuple(int(n), {int(k): _coeffs(v) for k, v in dict(q).items()})


def _grid(p):
    from .grid import PolarGrid

    return PolarGrid(p["radius"], p["n_r"], p["n_theta"], beta=p["beta"])


def _cfg(p, **kw):
    from .solver import SolverConfig

    return SolverConfig(tol=p["tol"], max_iter=p["max_iter"], **kw)


def _write_scalar_csv(path, grid, values, names):
    R, T = np.meshgrid(grid.r, grid.theta, indexing="ij")
    cols = [R.ravel(), T.ravel()] + [np.asarray(v).ravel() for v in values]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(["r", "theta"] + names), comments="")


# ---------------------------------------------------------------- handlers
# each returns (result dict, exit code, {filename: writer(path)})


def _solve_hitchin(p, seed):
    from .bundle import companion_field
    from .hyperbolic import hx_metric
    from .solver import solve_dirichlet

    n = int(p["n"])
    q = _differentials(n, p["q"])
    g = _grid(p)
    fld, rep = solve_dirichlet(companion_field(q), lambda z: hx_metric(n, z), g, _cfg(p, path=p["path"]))
    bound = n * n * (n * n - 1) / 6.0
    res = rep.to_dict()
    res.update(energy_bound=bound, energy_ok=bool(rep.energy_min >= bound - 1e-2),
               dominated=bool(max(rep.margins_max, default=0.0) <= 1e-3))
    code = EXIT_OK if rep.converged else EXIT_NUMERIC
    return res, code, {"metric.csv": fld.to_csv}


def _solve_chain(p, seed):
    from .hyperbolic import hx_metric
    from .solver import metric_to_toda, solve_toda_chain, toda_to_metric
    from .bundle import _as_poly

    gam = [_as_poly(_coeffs(c)) for c in p["gammas"]]
    cyc = None if p["cyclic"] is None else _as_poly(_coeffs(p["cyclic"]))
    n = len(gam) + 1
    g = _grid(p)
    wb = metric_to_toda(hx_metric(n, g.z_bdry))
    w, rep = solve_toda_chain(gam, wb, g, _cfg(p), cyclic=cyc)
    H = toda_to_metric(w)
    res = rep.to_dict()
    res["w_max"] = w.reshape(n - 1, -1).max(axis=1).tolist()
    res["w_min"] = w.reshape(n - 1, -1).min(axis=1).tolist()
    diag = [H[..., k, k].real for k in range(n)]
    writer = lambda path: _write_scalar_csv(path, g, list(w) + diag, [f"w{k + 1}" for k in range(n - 1)]
                                            + [f"h{k + 1}" for k in range(n)])
    return res, EXIT_OK if rep.converged else EXIT_NUMERIC, {"toda.csv": writer}


def _solve_curvature(p, seed):
    from .analysis import solve_curvature
    from .bundle import _as_poly

    g = _grid(p)
    alpha = _as_poly(_coeffs(p["alpha"]))
    exact = lambda z: -np.log(1 - np.abs(z) ** 2)
    ub = p["u_bdry"]
    if ub == "exact":
        ubv = exact(g.z_bdry)
    elif ub == "zero":
        ubv = np.zeros(g.n_theta)
    else:
        try:
            ubv = np.full(g.n_theta, float(ub))
        except (TypeError, ValueError):
            raise UsageError("u_bdry must be 'exact', 'zero' or a number")
    u, rep = solve_curvature(alpha, g, _cfg(p), ubv)
    res = rep.to_dict()
    res.update(u_min=float(u.min()), u_max=float(u.max()))
    if ub == "exact" and np.allclose(alpha.coef, [1.0]):
        res["max_error_exact"] = float(np.abs(u - exact(g.z)).max())
    writer = lambda path: _write_scalar_csv(path, g, [u], ["u"])
    return res, EXIT_OK if rep.converged else EXIT_NUMERIC, {"u.csv": writer}


def _exhaust_log(log):
    return {k: v for k, v in log.items() if k not in ("last_field", "fields")}


def _exhaust(p, seed):
    from .bundle import companion_field
    from .solver import SolverConfig, exhaust

    n = int(p["n"])
    cfg = SolverConfig(tol=p["tol"], max_iter=p["max_iter"], r0=p["r0"], n_stages=p["n_stages"],
                       rho_obs=p["rho_obs"])
    fld, log = exhaust(companion_field(_differentials(n, p["q"])), cfg, grid_shape=(p["n_r"], p["n_theta"]), n=n)
    res = _exhaust_log(log)
    files = {"observation_metric.csv": fld.to_csv} if fld is not None else {}
    return res, EXIT_OK if log["status"] == "ok" else EXIT_NUMERIC, files


def _uniqueness(p, seed):
    from .bundle import companion_field
    from .hyperbolic import hx_metric
    from .solver import SolverConfig, perturbed_boundary, uniqueness_probe

    n = int(p["n"])
    cfg = SolverConfig(tol=p["tol"], max_iter=p["max_iter"], r0=p["r0"], n_stages=p["n_stages"],
                       rho_obs=p["rho_obs"])
    dist, logs = uniqueness_probe(companion_field(_differentials(n, p["q"])), lambda z: hx_metric(n, z),
                                  perturbed_boundary(n, p["eps"]), cfg, grid_shape=(p["n_r"], p["n_theta"]), n=n)
    res = {"distance": dist, "a": _exhaust_log(logs["a"]), "b": _exhaust_log(logs["b"])}
    res.update({k: logs[k] for k in ("stage_distances", "ratios", "limit_estimate", "decreasing")})
    return res, EXIT_OK, {}


def parse_function(spec):
    """'power:p', 'abspoly:[c0, c1, ...]' or 'radial:<expression in r>'."""
    from .analysis import DiskFunction

    kind, _, arg = str(spec).partition(":")
    if kind == "power":
        return DiskFunction.power(float(arg))
    if kind == "abspoly":
        return DiskFunction.abs_poly_sq(_coeffs(json.loads(arg)))
    if kind == "radial":
        import sympy

        r = sympy.Symbol("r")
        expr = sympy.sympify(arg, locals={"r": r})
        if expr.free_symbols - {r}:
            raise UsageError("radial expressions may only use r")
        fr = sympy.lambdify(r, expr, "numpy")
        return DiskFunction.custom(lambda z: fr(np.abs(z)))
    raise UsageError(f"cannot parse function spec {spec!r}")


def _classify(p, seed):
    from .analysis import class_membership

    try:
        f = parse_function(p["f"])
    except (ValueError, SyntaxError) as e:
        raise UsageError(str(e))
    return class_membership(f, levels=int(p["levels"])), EXIT_OK, {}


def _gauge(p, seed):
    from . import gauge

    if p["theta"] is not None:
        out = gauge.normalize_to_companion(p["theta"])
        res = {"q": {str(j): v for j, v in gauge.q_coefficients(out["q"]).items()},
               "g": gauge.matrix_coefficients(out["g"]),
               "charpoly_equal": bool(gauge.charpoly_equal(gauge.as_domain_matrix(p["theta"]), out["q"]))}
        return res, EXIT_OK, {}
    count = int(p["random"])
    if count <= 0:
        raise UsageError("give --theta or a positive --random count")
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        th = gauge.random_instance(rng, int(p["n"]), max_degree=int(p["max_degree"]))
        out = gauge.normalize_to_companion(th)
        bad += not gauge.charpoly_equal(gauge.as_domain_matrix(th), out["q"])
    return {"instances": count, "charpoly_mismatches": bad}, EXIT_OK if bad == 0 else EXIT_NUMERIC, {}


def _collier(p, seed):
    from . import realforms as rf

    d = rf.SOData(int(p["n"]), _coeffs(p["mu"]), _coeffs(p["nu"]), {int(k): _coeffs(v) for k, v in p["q"].items()},
                  h_M=float(p["h_m"]))
    res, files, code = {}, {}, EXIT_OK
    if p["check_rss"]:
        res["regular_semisimple"] = rf.so_regular_semisimple(d, seed=seed)
    if p["solve_graded"] or p["solve_full"]:
        cond = rf.so_existence_condition(d)
        res["existence_condition"] = {k: v for k, v in cond.items() if k != "weight"}
        if not cond["usable"]:
            raise HypothesisViolation(f"existence condition fails: {cond['verdict']}")
        g = _grid(p)
        graded, rep, defect = rf.collier_graded_solve(d, g, _cfg(p), boundary=p["boundary"])
        res["graded"] = dict(rep.to_dict(), structure_defect=float(defect.max()))
        files["graded_metric.csv"] = graded.to_csv
        code = EXIT_OK if rep.converged else EXIT_NUMERIC
        if p["solve_full"] and rep.converged:
            fld, rep2, defect2, margins = rf.collier_full_solve(d, graded, _cfg(p, path="matrix"))
            res["full"] = dict(rep2.to_dict(), structure_defect=float(defect2.max()),
                               margins_max=margins.reshape(-1, margins.shape[-1]).max(axis=0).tolist())
            files["full_metric.csv"] = fld.to_csv
            code = EXIT_OK if rep2.converged else EXIT_NUMERIC
    return res, code, files


def _gothen(p, seed):
    from . import realforms as rf

    d = rf.Sp4Data(_coeffs(p["mu"]), _coeffs(p["nu"]), _coeffs(p["q2"]), h_L=float(p["h_l"]))
    res, files, code = {}, {}, EXIT_OK
    if p["check_rss"]:
        res["regular_semisimple"] = rf.sp4_regular_semisimple(d)
    if p["solve_graded"] or p["solve_full"]:
        g = _grid(p)
        zero_mu = rf._poly_is_zero(d.mu)
        if zero_mu and rf._poly_is_zero(d.nu):
            H, info = rf.gothen_zero_metric(d, g, _cfg(p))
            res["split_metric"] = dict(info, structure_defect=float(rf.structure_compat_defect(H, "sp4").max()))
            files["split_metric.csv"] = H.to_csv
            return res, code, files
        if zero_mu:
            raise HypothesisViolation("the graded chain needs mu not identically 0")
        graded, rep, defect = rf.sp4_graded_solve(d, g, _cfg(p))
        res["graded"] = dict(rep.to_dict(), structure_defect=float(defect.max()))
        files["graded_metric.csv"] = graded.to_csv
        code = EXIT_OK if rep.converged else EXIT_NUMERIC
        if p["solve_full"] and rep.converged:
            fld, rep2, defect2, margins = rf.sp4_full_solve(d, graded, _cfg(p, path="matrix"))
            res["full"] = dict(rep2.to_dict(), structure_defect=float(defect2.max()),
                               margins_max=margins.reshape(-1, margins.shape[-1]).max(axis=0).tolist())
            files["full_metric.csv"] = fld.to_csv
            code = EXIT_OK if rep2.converged else EXIT_NUMERIC
    return res, code, files


def _verify(p, seed):
    from . import gauge, linalg
    from .analysis import green, mean_log_circle
    from .bundle import DifferentialTuple, companion_field
    from .grid import PolarGrid
    from .hyperbolic import a_kn, hx_field
    from .realforms import block_charpoly_defect
    from .solver import hitchin_residual, residual_norm

    rng = np.random.default_rng(seed)
    checks = {}
    checks["a_12"] = abs(a_kn(1, 2) - np.sqrt(2)) < 1e-14
    checks["green"] = abs(green(0.5, 0.25) - np.log(3.5)) < 1e-12
    z = rng.uniform(-0.9, 0.9, 20) + 1j * rng.uniform(-0.9, 0.9, 20)
    r = rng.uniform(0.05, 0.95, 20)
    checks["mean_log_circle"] = bool(np.all([abs(mean_log_circle(a, b) - np.log(max(abs(a), b))) < 1e-6
                                             for a, b in zip(z, r)]))
    P = np.triu(rng.normal(size=(4, 4))) + 4 * np.eye(4)
    checks["triangular_inverse"] = bool(np.abs(linalg.triangular_inverse(P) @ P - np.eye(4)).max() < 1e-10)
    A, B = rng.normal(size=(3, 2)), rng.normal(size=(2, 3))
    checks["block_charpoly"] = bool(block_charpoly_defect(A, B, rng.normal(size=3)).max() < 1e-10)
    out = gauge.normalize_to_companion([[[0, 2], 1], [1, [0, -2]]])
    checks["gauge_n2"] = gauge.q_coefficients(out["q"])[2][:3] == [1, 0, 4]
    g = PolarGrid(0.8, 32, 64)
    R = hitchin_residual(hx_field(g, 2), companion_field(DifferentialTuple.zero(2)))
    checks["hx_residual"] = residual_norm(R) < 5e-3
    checks = {k: bool(v) for k, v in checks.items()}
    return {"checks": checks, "all_passed": all(checks.values())}, EXIT_OK if all(checks.values()) else EXIT_NUMERIC, {}


HANDLERS = {
    "solve-hitchin": _solve_hitchin,
    "solve-chain": _solve_chain,
    "solve-curvature": _solve_curvature,
    "exhaust": _exhaust,
    "uniqueness": _uniqueness,
    "classify-ab": _classify,
    "gauge-normalize": _gauge,
    "collier": _collier,
    "gothen": _gothen,
    "verify": _verify,
}


# ---------------------------------------------------------------- run / sweep / report


def run(job, stream=None):
    """Run a job spec; returns (exit code, report dict).  Writes artifacts when job.out is set."""
    from .bundle import PDViolation

    try:
        spec = job.resolved()
    except UsageError as e:
        return EXIT_USAGE, {"error": str(e), "exit_code": EXIT_USAGE}
    if spec.command in ("sweep", "report"):
        return EXIT_USAGE, {"error": f"{spec.command} is not a single job", "exit_code": EXIT_USAGE}
    files = {}
    try:
        result, code, files = HANDLERS[spec.command](spec.params, spec.seed)
        report = {"job": asdict(spec), "result": result, "exit_code": code}
    except HypothesisViolation as e:
        code, report = EXIT_HYPOTHESIS, {"job": asdict(spec), "error": str(e), "exit_code": EXIT_HYPOTHESIS}
    except (PDViolation, ArithmeticError, np.linalg.LinAlgError) as e:
        code, report = EXIT_NUMERIC, {"job": asdict(spec), "error": str(e), "exit_code": EXIT_NUMERIC}
    except (UsageError, ValueError, TypeError, KeyError) as e:
        code, report = EXIT_USAGE, {"job": asdict(spec), "error": f"{type(e).__name__}: {e}", "exit_code": EXIT_USAGE}
    if spec.deterministic:
        report = _strip_timing(report)
    text = json.dumps(report, default=_json_default, indent=2, sort_keys=True)
    if spec.out:
        os.makedirs(spec.out, exist_ok=True)
        with open(os.path.join(spec.out, f"{spec.command}.json"), "w") as fh:
            fh.write(text + "\n")
        for name, writer in files.items():
            writer(os.path.join(spec.out, name))
    if stream is not None:
        stream.write(text + "\n")
    return code, json.loads(text)


def _threads():
    try:
        return max(1, int(os.environ.get("HITCHIN_LAB_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def _run_row(args):
    i, command, params, out, seed = args
    job_out = os.path.join(out, f"job{i:03d}") if out else None
    code, rep = run(JobSpec(command, params, job_out, seed, deterministic=True))
    res = rep.get("result", {})
    row = {"job": i, "exit_code": code, "error": rep.get("error", "")}
    row.update({k: json.dumps(v) for k, v in params.items()})
    row["residual"] = res.get("residual", "")
    row["energy_min"] = res.get("energy_min", "")
    row["margins_max"] = max(res["margins_max"]) if res.get("margins_max") else ""
    row["distance"] = res.get("distance", "")
    return row


def sweep(spec, out=None, seed=0):
    """Run the product of ``spec["grid"]`` over ``spec["base"]``; returns the rows (one per job).

    spec = {"command": ..., "base": {...}, "grid": {param: [values, ...]}}.
    Failures are recorded per row and do not stop the sweep.
    """
    command = spec.get("command")
    if command not in HANDLERS:
        raise UsageError(f"sweep needs a job command, got {command!r}")
    unknown = set(spec) - {"command", "base", "grid"}
    if unknown:
        raise UsageError(f"unknown sweep fields: {', '.join(sorted(unknown))}")
    base = dict(spec.get("base", {}))
    grid = dict(spec.get("grid", {}))
    keys = sorted(grid)
    jobs = []
    for i, combo in enumerate(itertools.product(*(grid[k] for k in keys))):
        params = dict(base)
        params.update(zip(keys, combo))
        jobs.append((i, command, params, out, seed))
    workers = min(_threads(), len(jobs)) or 1
    if workers == 1:
        rows = [_run_row(j) for j in jobs]
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_row, jobs))
    if out:
        os.makedirs(out, exist_ok=True)
        names = list(rows[0]) if rows else []
        for r in rows:
            names += [k for k in r if k not in names]
        with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=names)
            w.writeheader()
            w.writerows(rows)
    return rows


def report(directory):
    """Text summary of the JSON reports in ``directory``; writes gnuplot data next to CSV fields.

    Raises FileNotFoundError listing what is missing.
    """
    from .hyperbolic import a_kn

    if not directory or not os.path.isdir(directory):
        raise FileNotFoundError(f"missing directory: {directory}")
    reports = sorted(glob.glob(os.path.join(directory, "**", "*.json"), recursive=True))
    csvs = sorted(glob.glob(os.path.join(directory, "**", "*.csv"), recursive=True))
    if not reports and not csvs:
        raise FileNotFoundError(f"no artifacts in {directory}: expected *.json reports and *.csv fields")
    lines = ["constants a_{k,n}", "n   " + "  ".join(f"k={k:<8d}" for k in range(1, 7))]
    for n in range(2, 7):
        lines.append(f"{n:<3d} " + "  ".join(f"{a_kn(k, n):<10.6f}" for k in range(1, n + 1)))
    for path in reports:
        with open(path) as fh:
            rep = json.load(fh)
        rel = os.path.relpath(path, directory)
        res = rep.get("result", {})
        lines += ["", f"{rel}: command {rep.get('job', {}).get('command')} exit {rep.get('exit_code')}"]
        if "error" in rep:
            lines.append(f"  error: {rep['error']}")
        for key in ("residual", "iterations", "converged", "energy_min", "margins_max", "distance", "verdict",
                    "max_error_exact", "all_passed"):
            if key in res:
                lines.append(f"  {key}: {res[key]}")
        if "d" in res:
            lines.append("  m  radius    d_m")
            for m, (rad, dm) in enumerate(zip(res["radii"][1:], res["d"]), start=2):
                lines.append(f"  {m:<2d} {rad:<9.6f} {dm:.3e}")
            lines.append(f"  d_m strictly decreasing: {res.get('monotone')}")
    for path in csvs:
        if os.path.basename(path) == "sweep.csv":
            continue
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        with open(path) as fh:
            header = fh.readline().strip().replace(",", " ")
        dat = path[:-4] + ".dat"
        np.savetxt(dat, data, header=header)
        lines.append(f"gnuplot data: {os.path.relpath(dat, directory)}")
    text = "\n".join(lines) + "\n"
    with open(os.path.join(directory, "summary.txt"), "w") as fh:
        fh.write(text)
    return text


# ---------------------------------------------------------------- argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _json_or_str(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser():
    parser = _Parser(prog="hitchin-lab", description="Harmonic metrics of Higgs bundles on the disk.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, defaults in COMMANDS.items():
        sp = sub.add_parser(name, help=HELP[name])
        if name not in ("sweep", "report"):
            sp.add_argument("--out", default=None, help="output directory for the report and CSV fields")
            sp.add_argument("--seed", type=int, default=0)
            sp.add_argument("--deterministic", action="store_true", help="omit wall-clock timings")
            sp.add_argument("--job", default=None, help="JSON file with parameters (flags override)")
        else:
            sp.add_argument("--out", default=None)
            sp.add_argument("--seed", type=int, default=0)
        for key, val in defaults.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(val, bool):
                sp.add_argument(flag, dest=key, action="store_true", default=None)
            elif isinstance(val, int):
                sp.add_argument(flag, dest=key, type=int, default=None)
            elif isinstance(val, float):
                sp.add_argument(flag, dest=key, type=float, default=None)
            else:
                sp.add_argument(flag, dest=key, type=_json_or_str, default=None)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    given = {k: v for k, v in vars(args).items() if k in COMMANDS[args.command] and v is not None}
    if args.command == "sweep":
        try:
            with open(given["spec"]) as fh:
                spec = json.load(fh)
            rows = sweep(spec, out=args.out, seed=args.seed)
        except (KeyError, OSError, json.JSONDecodeError, UsageError) as e:
            sys.stderr.write(f"hitchin-lab sweep: {e}\n")
            return EXIT_USAGE
        sys.stdout.write(json.dumps({"jobs": len(rows), "failed": sum(r["exit_code"] != 0 for r in rows)}) + "\n")
        return EXIT_OK
    if args.command == "report":
        try:
            sys.stdout.write(report(given.get("dir")))
        except FileNotFoundError as e:
            sys.stderr.write(f"hitchin-lab report: {e}\n")
            return EXIT_USAGE
        return EXIT_OK
    params = {}
    if args.job:
        try:
            with open(args.job) as fh:
                params = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            sys.stderr.write(f"hitchin-lab: cannot read job file: {e}\n")
            return EXIT_USAGE
    params.update(given)
    code, _ = run(JobSpec(args.command, params, args.out, args.seed, args.deterministic), stream=sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
