"""Command-line entry point: ``qhahn <subcommand> [flags]``.

Exit codes: 0 success or all checks passed, 1 a check failed, 2 usage or
parameter error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .distributions import as_stream
from .duality import (
    CHECKS,
    DUALITY_TOL,
    IDENTITY_TOL,
    TASEP_TOL,
    _random_x,
    _random_y,
    evolution_check,
    heine_identity_check,
    main_identity_check,
    push_duality_check,
    rational_identity_check,
    run_suite,
    tasep_duality_check,
)
from .errors import ParameterError, QHahnError
from .kernel import TABLE_TAIL, PushParams, kernel_table
from .limits import KERNEL_LIMIT_CASES, KERNEL_LIMIT_PARAMS, kernel_limit_check, moment_bridge_check, qpoch_ratio_limit_check
from .moments import (
    MomentDivergenceWarning,
    MomentSpec,
    beta_moment_integral,
    mc_beta_moment,
    mc_push_moment,
    mc_tasep_moment,
    push_moment_integral,
    tasep_moment_integral,
)
from .processes import (
    BetaParams,
    ParticleConfig,
    TasepParams,
    Trajectory,
    push_simulate,
    q0_push_step,
    tasep_simulate,
    z_simulate,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
Z_SCORE_LIMIT = 3.0

DEFAULTS = {
    "process": "push",
    "particles": 5,
    "steps": 10,
    "paths": 10**5,
    "workers": 1,
    "t": 1,
    "n": "1",
    "method": "contour",
    "ell": 0,
    "g": 0,
    "tail": TABLE_TAIL,
    "kernel_method": "auto",
    "count": 20,
    "N": 2,
    "k": 1,
    "eps": "0.01,0.001",
}


class UsageError(Exception):
    """Bad flag combination; reported with exit code 2."""


@dataclass
class RunConfig:
    """Resolved options: explicit flags override the JSON config file, which overrides defaults."""

    subcommand: str
    options: dict = field(default_factory=dict)

    def get(self, key: str, required: bool = False):
        val = self.options.get(key)
        if val is None:
            val = DEFAULTS.get(key)
        if val is None and required:
            raise UsageError(f"missing required option --{key.replace('_', '-')}")
        return val

    def seed(self) -> int:
        val = self.options.get("seed")
        if val is None:
            env = os.environ.get("QHAHN_SEED")
            if env is None:
                return 0
            try:
                return int(env)
            except ValueError:
                raise UsageError(f"QHAHN_SEED={env!r} is not an integer") from None
        return int(val)


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    if isinstance(text, int):
        return (text,)
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def _float_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated float list, got {text!r}") from None


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(text: str, cfg: RunConfig) -> None:
    out = cfg.get("output")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# parameter sets


def _push_params(cfg: RunConfig) -> PushParams:
    q, mu, nu = (cfg.get(key, required=True) for key in ("q", "mu", "nu"))
    if cfg.get("unchecked"):
        return PushParams.unchecked(q, mu, nu)
    return PushParams(q, mu, nu)


def _tasep_params(cfg: RunConfig) -> TasepParams:
    return TasepParams(*(cfg.get(key, required=True) for key in ("q", "mu", "nu")))


def _beta_params(cfg: RunConfig) -> BetaParams:
    return BetaParams(cfg.get("mu_bar", required=True), cfg.get("nu_bar", required=True))


def _params_for(process: str, cfg: RunConfig):
    if process == "push":
        return _push_params(cfg)
    if process == "tasep":
        return _tasep_params(cfg)
    if process == "beta":
        return _beta_params(cfg)
    raise UsageError(f"unknown process {process!r}")


# ---------------------------------------------------------------------------
# subcommands


def _simulate(cfg: RunConfig) -> int:
    process = cfg.get("process")
    N, T, seed = int(cfg.get("particles")), int(cfg.get("steps")), cfg.seed()
    if N < 1 or T < 0:
        raise UsageError("--particles must be >= 1 and --steps >= 0")
    if process == "push":
        params = _push_params(cfg)
        traj = push_simulate(N, T, params, seed)
        meta_params = params.as_dict()
    elif process == "tasep":
        params = _tasep_params(cfg)
        traj = tasep_simulate(N, T, params, seed)
        meta_params = params.as_dict()
    elif process == "q0push":
        mu, nu = cfg.get("mu", required=True), cfg.get("nu", required=True)
        stream = as_stream(seed)
        config = ParticleConfig.step(N)
        rows = [config.positions]
        for t in range(1, T + 1):
            config = q0_push_step(config, mu, nu, stream.spawn(t))
            rows.append(config.positions)
        traj = Trajectory(np.arange(T + 1), np.array(rows, dtype=np.int64).reshape(T + 1, N))
        meta_params = {"q": 0.0, "mu": mu, "nu": nu}
    elif process == "beta":
        params = _beta_params(cfg)
        values = z_simulate(N, T, params, seed, tie="limit")
        traj = Trajectory(np.arange(T + 1), values, label="Z")
        meta_params = params.as_dict()
    else:
        raise UsageError(f"unknown process {process!r}")
    # the deterministic initial row is omitted: one row per particle per step
    keep = traj.times > 0
    traj = Trajectory(traj.times[keep], traj.values[keep], traj.label)
    text = traj.to_csv()
    meta = {
        "process": process,
        "params": meta_params,
        "particles": N,
        "steps": T,
        "seed": seed,
        "rows": int(traj.values.size),
        "columns": ["t", "i", traj.label],
        "initial_condition": "step: x_i(0) = -i" if traj.label == "x" else "Z(i,0) = 1",
        "version": __version__,
    }
    _emit(text, cfg)
    out = cfg.get("output")
    if out:
        with open(out + ".json", "w", encoding="utf-8") as fh:
            fh.write(_dumps(meta))
    else:
        sys.stderr.write(_dumps(meta))
    return EXIT_OK


def _kernel(cfg: RunConfig) -> int:
    params = _push_params(cfg)
    table = kernel_table(params, int(cfg.get("ell")), int(cfg.get("g")), float(cfg.get("tail")), cfg.get("kernel_method"))
    data = table.to_dict()
    data["total"] = table.total()
    data["min_value"] = float(table.values.min())
    data["in_range"] = params.in_range
    _emit(_dumps(data), cfg)
    return EXIT_OK


def _verify_params(cfg: RunConfig) -> PushParams:
    # the identities are algebraic in (q, mu, nu): nu <= min(mu, sqrt(q)) only
    # guarantees nonnegative probabilities, so only the basic ranges are gated
    q, mu, nu = (cfg.get(key, required=True) for key in ("q", "mu", "nu"))
    if not cfg.get("unchecked"):
        if not 0 < q < 1:
            raise ParameterError(f"q={q} violates 0 < q < 1")
        if not 0 < mu < 1:
            raise ParameterError(f"mu={mu} violates 0 < mu < 1")
        if not nu > -1:
            raise ParameterError(f"nu={nu} violates nu > -1")
    return PushParams.unchecked(q, mu, nu)


def _verify_instance(check: str, cfg: RunConfig, rng: np.random.Generator):
    tol = cfg.get("tol")
    N, k = int(cfg.get("N")), int(cfg.get("k"))
    x = _int_list(cfg.get("x")) if cfg.get("x") is not None else _random_x(rng, N)
    y = _int_list(cfg.get("y")) if cfg.get("y") is not None else _random_y(rng, len(x), k)
    if check == "push-duality":
        return push_duality_check(x, y, _verify_params(cfg), DUALITY_TOL if tol is None else tol)
    if check == "tasep-duality":
        return tasep_duality_check(x, y, _tasep_params(cfg), TASEP_TOL if tol is None else tol)
    if check == "evolution":
        return evolution_check(y, int(cfg.get("t")), _verify_params(cfg), IDENTITY_TOL if tol is None else tol)
    if check in ("main-identity", "rational-identity", "heine-form"):
        fn = {"main-identity": main_identity_check, "rational-identity": rational_identity_check, "heine-form": heine_identity_check}[check]
        ell, g = int(cfg.get("ell")), int(cfg.get("g"))
        return fn(ell, g, k, _verify_params(cfg), IDENTITY_TOL if tol is None else tol)
    raise UsageError(f"check {check!r} has no single-instance form; omit the parameters to run its random suite")


def _verify(cfg: RunConfig) -> int:
    checks = [c.strip() for c in str(cfg.get("check", required=True)).split(",") if c.strip()]
    for c in checks:
        if c not in CHECKS:
            raise UsageError(f"--check {c!r} is not one of {', '.join(CHECKS)}")
    seed = cfg.seed()
    instance_mode = cfg.get("q") is not None
    reports = []
    for c in checks:
        if instance_mode:
            reports.append(_verify_instance(c, cfg, np.random.default_rng(seed)))
        else:
            reports.extend(run_suite(c, int(cfg.get("count")), seed))
    passed = all(r.passed for r in reports)
    _emit(_dumps({"passed": passed, "reports": [r.to_dict() for r in reports]}), cfg)
    return EXIT_OK if passed else EXIT_FAIL


def _moment_result(cfg: RunConfig, method: str) -> dict:
    process = cfg.get("process")
    params = _params_for(process, cfg)
    spec = MomentSpec(_int_list(cfg.get("n")), int(cfg.get("t")))
    paths, seed, workers = int(cfg.get("paths")), cfg.seed(), int(cfg.get("workers"))
    result = {"process": process, "params": params.as_dict(), "spec": spec.as_dict(), "seed": seed, "method": method}
    if method in ("contour", "both"):
        integral = {"push": push_moment_integral, "tasep": tasep_moment_integral, "beta": beta_moment_integral}[process]
        result["contour_value"] = integral(spec, params)
    if method in ("mc", "both"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", MomentDivergenceWarning)
            if process == "push":
                est = mc_push_moment(spec, params, paths, seed, workers)
            elif process == "tasep":
                est = mc_tasep_moment(spec, params, paths, seed, workers)
            else:
                est = mc_beta_moment(spec, params, paths, seed)
        result["warnings"] = [str(w.message) for w in caught]
        result.update({"mc_estimate": est.estimate, "mc_stderr": est.standard_error, "paths": est.paths})
        if "contour_value" in result:
            result["z_score"] = est.z_score(result["contour_value"])
    return result


def _moments(cfg: RunConfig) -> int:
    method = cfg.get("method")
    if method not in ("contour", "mc", "both"):
        raise UsageError(f"--method must be contour, mc or both, got {method!r}")
    _emit(_dumps(_moment_result(cfg, method)), cfg)
    return EXIT_OK


def _compare(cfg: RunConfig) -> int:
    result = _moment_result(cfg, "both")
    result["passed"] = bool(abs(result["z_score"]) <= Z_SCORE_LIMIT)
    _emit(_dumps(result), cfg)
    return EXIT_OK if result["passed"] else EXIT_FAIL


def _limits(cfg: RunConfig) -> int:
    eps_list = _float_list(cfg.get("eps"))
    params = _beta_params(cfg) if cfg.get("mu_bar") is not None else KERNEL_LIMIT_PARAMS
    rows = []
    for eps in eps_list:
        for drop, gap, t in KERNEL_LIMIT_CASES:
            rows.append((eps, kernel_limit_check(drop, gap, t, params, eps)))
        for n in ((1,), (2,)):
            for t in (1, 2):
                rows.append((eps, moment_bridge_check(MomentSpec(n, t), params, eps)))
        rows.append((eps, qpoch_ratio_limit_check(0.5, 1.2, 0.4, math.exp(-eps))))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "eps", "instance", "exact", "limit", "rel_err", "tolerance", "passed"])
    for eps, r in rows:
        inst = {k: v for k, v in r.instance.items() if k != "eps"}
        w.writerow([r.check, repr(eps), json.dumps(inst, sort_keys=True), repr(r.exact), repr(r.limit), repr(r.rel_err), r.tolerance, r.passed])
    _emit(buf.getvalue(), cfg)
    # tolerances apply at the finest eps; coarser rows show the convergence
    finest = min(eps_list)
    return EXIT_OK if all(r.passed for eps, r in rows if eps == finest) else EXIT_FAIL


COMMANDS = {
    "simulate": _simulate,
    "kernel": _kernel,
    "verify": _verify,
    "moments": _moments,
    "compare": _compare,
    "limits": _limits,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file supplying option defaults")
    p.add_argument("--seed", type=int, help="master seed (falls back to $QHAHN_SEED, then 0)")
    p.add_argument("--output", "-o", help="output path (default stdout)")
    p.add_argument("--q", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--mu-bar", dest="mu_bar", type=float)
    p.add_argument("--nu-bar", dest="nu_bar", type=float)
    p.add_argument("--unchecked", action="store_true", default=None, help="skip parameter range validation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qhahn", description="q-Hahn PushTASEP simulation, kernels, dualities and moments")
    parser.add_argument("--version", action="version", version=f"qhahn {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("simulate", help="simulate a process from step initial data; CSV output")
    _add_common(p)
    p.add_argument("--process", choices=["push", "tasep", "q0push", "beta"])
    p.add_argument("--particles", type=int)
    p.add_argument("--steps", type=int)

    p = sub.add_parser("kernel", help="tabulate one row of the PushTASEP update kernel; JSON output")
    _add_common(p)
    p.add_argument("--ell", type=int)
    p.add_argument("--g", type=int)
    p.add_argument("--tail", type=float)
    p.add_argument("--method", dest="kernel_method", choices=["auto", "sum", "phi87", "cross-checked"])

    p = sub.add_parser("verify", help="check dualities and identities; exit 0 iff all pass")
    _add_common(p)
    p.add_argument("--check", help=f"comma-separated list from: {', '.join(CHECKS)}")
    p.add_argument("--count", type=int, help="random instances per check (suite mode)")
    p.add_argument("--N", type=int, help="number of particles for a random instance")
    p.add_argument("--k", type=int, help="total Boson occupation for a random instance")
    p.add_argument("--x", help="particle positions, comma-separated")
    p.add_argument("--y", help="Boson occupations y_0..y_N, comma-separated")
    # identity checks use --ell, --g and --k (the Boson level y)
    p.add_argument("--ell", type=int)
    p.add_argument("--g", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--tol", type=float, help="override the check tolerance")

    for name, help_text in (("moments", "nested contour integral and/or Monte Carlo moment; JSON output"),
                            ("compare", "contour vs Monte Carlo; exit 0 iff |z| <= 3")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.add_argument("--process", choices=["push", "tasep", "beta"])
        if name == "moments":
            p.add_argument("--method", choices=["contour", "mc", "both"])
        p.add_argument("--n", help="moment labels n_1 >= ... >= n_k, comma-separated")
        p.add_argument("--t", type=int)
        p.add_argument("--paths", type=int)
        p.add_argument("--workers", type=int)

    p = sub.add_parser("limits", help="q -> 1 convergence tables; CSV output")
    _add_common(p)
    p.add_argument("--eps", help="comma-separated list of eps values")
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    options = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("--config: the JSON file must contain an object")
        options.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key, val in vars(args).items():
        if key in ("config", "subcommand"):
            continue
        if val is not None:
            options[key] = val
    return RunConfig(args.subcommand, options)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = _resolve(args)
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        sys.stderr.write(f"qhahn {args.subcommand}: usage error: {exc}\n")
        return EXIT_USAGE
    except QHahnError as exc:
        sys.stderr.write(f"qhahn {args.subcommand}: parameter error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
