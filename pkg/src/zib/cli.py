"""Command-line front end: ``zib fit | posterior | simulate``.

Exit codes: 0 success, 2 argument or parse error, 3 data validation error,
4 convergence failure. Every failure prints one line starting with
``error:`` on stderr. Output files are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import analytic, simulation
from .mcmc import ChainConfig, fit_covariate
from .model import Dataset, ModelError, PriorConfig, SigmaMode, SufficientStats

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
RHAT_MAX = 1.1


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message, EXIT_USAGE)


# ---------------------------------------------------------------------------
# argument helpers

def _float_pair(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from None
    return lo, hi


def _names(text):
    return [c.strip() for c in text.split(",") if c.strip()]


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("sample sizes must be positive")
    return values


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _add_shared(p, data_required=True):
    p.add_argument("--data", required=data_required, help="input CSV path")
    p.add_argument("--outcome", required=data_required, help="binary outcome column")
    p.add_argument("--zi-cols", type=_names, default=[], help="covariates of the zero-inflated part")
    p.add_argument("--nzi-cols", type=_names, default=[], help="covariates of the event part")
    p.add_argument("--omega-prior", type=_float_pair, default=(0.0, 0.5), metavar="LO,HI")
    p.add_argument("--p-prior", type=_float_pair, default=(0.5, 1.0), metavar="LO,HI")
    p.add_argument("--coef-sigma", type=float, default=5.0)
    p.add_argument("--sigma-mode", choices=["fixed", "hyper"], default="fixed")
    p.add_argument("--chains", type=_positive_int, default=4)
    p.add_argument("--iter", type=_positive_int, default=2000)
    p.add_argument("--warmup", type=_positive_int, default=1000)
    p.add_argument("--thin", type=_positive_int, default=1)
    p.add_argument("--seed", type=_seed, default=None, help=f"default {ChainConfig.seed}")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["json", "csv"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zib", description="Bayesian zero-inflated Bernoulli models")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit a model to CSV data")
    _add_shared(fit)

    post = sub.add_parser("posterior", help="prior/posterior density grids (no covariates)")
    _add_shared(post)
    post.add_argument("--points", type=_positive_int, default=2049)

    sim = sub.add_parser("simulate", help="run a simulation grid")
    _add_shared(sim, data_required=False)
    sim.add_argument("--mode", choices=["nocov", "cov"], default=None)
    sim.add_argument("--grid", choices=["study"], help="use the published parameter lists")
    sim.add_argument("--config", help="JSON file with grid settings")
    sim.add_argument("--n", type=_int_list, default=None)
    sim.add_argument("--replicates", type=_positive_int, default=None)
    for name in ("omega", "p", "beta0", "beta1", "beta2", "theta0", "theta1", "theta2"):
        sim.add_argument(f"--{name}", type=_float_list, default=None)
    return parser


# ---------------------------------------------------------------------------
# I/O

def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def dump_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def read_dataset(path, outcome: str, zi_cols, nzi_cols) -> Dataset:
    """Read a headed, comma-separated UTF-8 file into a :class:`Dataset`."""
    p = Path(path)
    if not p.is_file():
        raise CliError(f"data file not found: {path}", EXIT_USAGE)
    try:
        with p.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (UnicodeDecodeError, csv.Error) as exc:
        raise CliError(f"malformed CSV {path}: {exc}", EXIT_USAGE) from None
    if not rows:
        raise CliError(f"malformed CSV {path}: missing header row", EXIT_USAGE)
    header = [h.strip() for h in rows[0]]
    body, lines = [], []
    for i, r in enumerate(rows[1:], start=2):
        if any(cell.strip() for cell in r):
            body.append(r)
            lines.append(i)
    for i, r in enumerate(rows[1:], start=2):
        if any(cell.strip() for cell in r) and len(r) != len(header):
            raise CliError(f"malformed CSV {path}: line {i} has {len(r)} fields, "
                           f"header has {len(header)}", EXIT_USAGE)
    for col in [outcome, *zi_cols, *nzi_cols]:
        if col not in header:
            raise CliError(f"unknown column {col!r} (available: {', '.join(header)})", EXIT_DATA)
    if not body:
        raise CliError("at least one observation required", EXIT_DATA)

    def column(name, binary=False):
        j = header.index(name)
        values = np.empty(len(body))
        for i, r in enumerate(body):
            cell = r[j].strip()
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if binary and v not in (0.0, 1.0):
                raise CliError(f"row {i + 1} (line {lines[i]}), column {name!r}: "
                               f"outcome must be 0 or 1, got {cell!r}",
                               EXIT_DATA)
            if not math.isfinite(v):
                raise CliError(f"row {i + 1} (line {lines[i]}), column {name!r}: "
                               f"not a finite number: {cell!r}",
                               EXIT_DATA)
            values[i] = v
        return values

    y = column(outcome, binary=True).astype(np.int64)
    X = np.column_stack([column(c) for c in zi_cols]) if zi_cols else np.zeros((len(body), 0))
    Z = np.column_stack([column(c) for c in nzi_cols]) if nzi_cols else np.zeros((len(body), 0))
    return Dataset(y, X, Z, tuple(zi_cols), tuple(nzi_cols))


def _prior(args) -> PriorConfig:
    try:
        return PriorConfig(
            omega_lo=args.omega_prior[0], omega_hi=args.omega_prior[1],
            p_lo=args.p_prior[0], p_hi=args.p_prior[1],
            coef_sigma_theta=args.coef_sigma, coef_sigma_beta=args.coef_sigma,
            sigma_mode=SigmaMode.HYPERPRIOR if args.sigma_mode == "hyper" else SigmaMode.FIXED,
        )
    except ModelError as exc:
        raise CliError(f"invalid prior: {exc}", EXIT_USAGE) from None


def _chain_config(args) -> ChainConfig:
    try:
        return ChainConfig(n_chains=args.chains, iterations=args.iter, warmup=args.warmup,
                           seed=ChainConfig.seed if args.seed is None else args.seed,
                           thin=args.thin)
    except ValueError as exc:
        raise CliError(f"invalid chain settings: {exc}", EXIT_USAGE) from None


def _prior_doc(prior: PriorConfig) -> dict:
    return {"omega": list(prior.omega_box), "p": list(prior.p_box),
            "coef_sigma_theta": prior.coef_sigma_theta, "coef_sigma_beta": prior.coef_sigma_beta,
            "sigma_mode": prior.sigma_mode.value}


def _table_csv(header, rows) -> str:
    import io
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def cmd_fit(args) -> int:
    data = read_dataset(args.data, args.outcome, args.zi_cols, args.nzi_cols)
    prior = _prior(args)
    fmt = args.format or "json"
    if not args.zi_cols and not args.nzi_cols:
        stats = data.stats()
        fit = analytic.fit_nocov(stats, prior)
        params = {"omega": fit.omega_summary.as_dict(), "p": fit.p_summary.as_dict()}
        doc = {"method": "analytic", "n": stats.n, "s": stats.s, "prior": _prior_doc(prior),
               "parameters": params}
        if fmt == "json":
            _emit(dump_json(doc), args.out)
        else:
            rows = [[k, v["median"], v["q025"], v["q975"], v["mean"]] for k, v in params.items()]
            _emit(_table_csv(["param", "median", "q025", "q975", "mean"], rows), args.out)
        return EXIT_OK

    config = _chain_config(args)
    fit = fit_covariate(data, prior, config, n_jobs=args.threads)
    diag = fit.diagnostics
    params = {}
    for name, summ in fit.summaries.items():
        entry = summ.as_dict()
        entry.update(rhat=diag.rhat[name], ess=diag.ess[name])
        params[name] = entry
    converged = all(r <= RHAT_MAX for r in diag.rhat.values())
    doc = {
        "method": "mcmc", "n": data.n, "prior": _prior_doc(prior),
        "chains": {"n_chains": config.n_chains, "iterations": config.iterations,
                   "warmup": config.warmup, "thin": config.thin, "seed": config.seed},
        "parameters": params,
        "diagnostics": {"acceptance": [float(a) for a in fit.draws.accept_rate],
                        "stuck_chains": diag.divergent_or_stuck,
                        "max_rhat": max(diag.rhat.values()),
                        "min_ess": min(diag.ess.values()),
                        "converged": converged},
    }
    if fmt == "json":
        _emit(dump_json(doc), args.out)
    else:
        rows = [[k, v["median"], v["q025"], v["q975"], v["mean"], v["rhat"], v["ess"]]
                for k, v in params.items()]
        _emit(_table_csv(["param", "median", "q025", "q975", "mean", "rhat", "ess"], rows), args.out)
    if not converged:
        worst = max(diag.rhat, key=diag.rhat.get)
        raise CliError(f"convergence failure: rhat[{worst}] = {diag.rhat[worst]:.3f} > {RHAT_MAX}",
                       EXIT_CONVERGENCE)
    return EXIT_OK


def cmd_posterior(args) -> int:
    if args.zi_cols or args.nzi_cols:
        raise CliError("posterior grids are only available without covariates", EXIT_USAGE)
    data = read_dataset(args.data, args.outcome, [], [])
    prior = _prior(args)
    rows = analytic.density_grids_for_plotting(data.stats(), prior, points=args.points)
    _emit(_table_csv(["param", "value", "prior_density", "posterior_density"],
                     [[r[0], repr(r[1]), repr(r[2]), repr(r[3])] for r in rows]), args.out)
    return EXIT_OK


_COV_KEYS = ("beta0", "beta1", "beta2", "theta0", "theta1", "theta2")
_NOCOV_KEYS = ("omega", "p")


def _grid_settings(args) -> dict:
    settings: dict = {}
    if args.config:
        try:
            settings.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except FileNotFoundError:
            raise CliError(f"config file not found: {args.config}", EXIT_USAGE) from None
        except json.JSONDecodeError as exc:
            raise CliError(f"malformed config {args.config}: {exc}", EXIT_USAGE) from None
    if args.grid == "study":
        settings.setdefault("n", simulation.STUDY_SAMPLE_SIZES)
        mode = args.mode or settings.get("mode", "nocov")
        base = simulation.STUDY_COV_GRID if mode == "cov" else simulation.STUDY_NOCOV_GRID
        for k, v in base.items():
            settings.setdefault(k, v)
    for key in ("mode", "n", "replicates", *_COV_KEYS, *_NOCOV_KEYS):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    settings.setdefault("replicates", 100)
    settings.setdefault("mode", "nocov")
    return settings


def _build_grid(settings, seed):
    mode = settings["mode"]
    if mode not in ("nocov", "cov"):
        raise CliError(f"unknown mode {mode!r}", EXIT_USAGE)
    n = settings.get("n")
    if not n:
        raise CliError("--n is required", EXIT_USAGE)
    n = n if isinstance(n, list) else [n]
    reps = settings["replicates"]
    if not isinstance(reps, int) or reps < 1:
        raise CliError("replicates must be a positive integer", EXIT_USAGE)
    keys = _COV_KEYS if mode == "cov" else _NOCOV_KEYS
    lists = {}
    for k in keys:
        v = settings.get(k)
        if v is None:
            raise CliError(f"--{k} is required in {mode} mode", EXIT_USAGE)
        v = v if isinstance(v, list) else [v]
        if not v:
            raise CliError(f"empty value list for {k}", EXIT_USAGE)
        if any(not isinstance(x, (int, float)) or not math.isfinite(x) for x in v):
            raise CliError(f"non-numeric value in {k}", EXIT_USAGE)
        if mode == "nocov" and any(not 0.0 <= x <= 1.0 for x in v):
            raise CliError(f"{k} values must lie in [0, 1]", EXIT_USAGE)
        lists[k] = [float(x) for x in v]
    if mode == "cov":
        return simulation.covariate_grid(n=n, replicates=reps, seed=seed, **lists)
    return simulation.nocov_grid(n=n, replicates=reps, seed=seed, **lists)


def cmd_simulate(args) -> int:
    settings = _grid_settings(args)
    seed = args.seed if args.seed is not None else settings.get("seed", ChainConfig.seed)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise CliError(f"seed must be a 64-bit unsigned integer, got {seed!r}", EXIT_USAGE)
    grid = _build_grid(settings, seed)
    prior = _prior(args)
    config = _chain_config(args)
    total = len(grid)

    def progress(c, res):
        sc = res.scenario
        truth = " ".join(f"{k}={v:g}" for k, v in sc.true_values.items())
        print(f"cell {c + 1}/{total} done: n={sc.n} {truth} n_failed={res.n_failed}",
              file=sys.stderr, flush=True)

    results = simulation.run_grid(grid, config, prior, workers=args.threads, progress=progress)
    if args.format == "json":
        doc = [{"mode": r.scenario.mode, "n": r.scenario.n, "replicates": r.scenario.replicates,
                "truth": r.scenario.true_values, "avg_median": r.avg_median,
                "avg_q025": r.avg_q025, "avg_q975": r.avg_q975, "coverage95": r.coverage95,
                "n_failed": r.n_failed} for r in results]
        _emit(dump_json(doc), args.out)
    else:
        _emit(simulation.results_to_csv(results), args.out)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "posterior": cmd_posterior, "simulate": cmd_simulate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
