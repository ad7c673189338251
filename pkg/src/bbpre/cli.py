"""Command-line front end.

Subcommands: simulate, coupled, audit, experiment, limit-law,
lemma-sweep.  Exit codes: 0 success, 1 configuration error, 2 runtime
error (overflow-dominated runs, excess censoring).  Errors additionally
emit one machine-readable JSON line on stderr:
``{"error": "configuration"|"runtime", "message": "..."}``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .config import MODEL_PRESETS, build_model_triple, load_config_file
from .errors import BbpreError, ConfigurationError, ExcessCensoringError, OverflowGuardError
from .limit_law import FirstPassageLaw
from .model import audit_conditions
from .rng import derive_stream
from .stats import (
    AUDIT_STREAM_KEY,
    ExperimentConfig,
    LemmaSweepConfig,
    lemma_bound_sweep,
    run_experiment,
    run_extinction_records,
    run_replicates,
    write_replicates_csv,
    write_sweep_csv,
    write_trajectories_csv,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; config errors are exit 1
        raise ConfigurationError(message)


def _positive_int(flag: str, minimum: int = 1):
    def parse(text: str) -> int:
        try:
            v = int(float(text)) if ("e" in text or "E" in text or "." in text) else int(text)
        except ValueError:
            raise ConfigurationError(f"{flag} expects an integer >= {minimum}, got {text!r}")
        if v < minimum:
            raise ConfigurationError(f"{flag} expects an integer >= {minimum}, got {text!r}")
        return v

    return parse


def _positive_float(flag: str, minimum: float = 0.0, inclusive: bool = False):
    def parse(text: str) -> float:
        try:
            v = float(text)
        except ValueError:
            raise ConfigurationError(f"{flag} expects a real > {minimum}, got {text!r}")
        ok = v >= minimum if inclusive else v > minimum
        if not (math.isfinite(v) and ok):
            cmp = ">=" if inclusive else ">"
            raise ConfigurationError(f"{flag} expects a finite real {cmp} {minimum}, got {text!r}")
        return v

    return parse


def _parse_grid(text: str) -> tuple:
    try:
        return tuple(int(float(p)) for p in text.split(","))
    except ValueError:
        raise ConfigurationError(f"--n-grid expects comma-separated counts, got {text!r}")


def _parse_table(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError(f"--table expects start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigurationError(f"--table expects start:stop:count, got {text!r}")
    if not (start > 0 and stop > start and count >= 2):
        raise ConfigurationError(f"--table needs 0 < start < stop and count >= 2, got {text!r}")
    return np.linspace(start, stop, count)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=sorted(MODEL_PRESETS), default="canonical",
                   help="offspring preset: canonical (critical) or shifted (+0.1 drift)")
    p.add_argument("--rule", choices=["monogamous", "polygamous", "asexual"], default=None,
                   help="mating rule (default: monogamous or the config file value)")
    p.add_argument("--sigma-env", type=_positive_float("--sigma-env", 0.0, inclusive=True), default=None,
                   help="environment std-dev, >= 0 (default 0.5)")
    p.add_argument("--alpha", type=_positive_float("--alpha"), default=None,
                   help="residual exponent in (0, 1), must satisfy 1/alpha < beta (default 0.5)")
    p.add_argument("--beta", type=_positive_float("--beta", 1.0), default=None,
                   help="moment parameter > 1; sets the hitting threshold exponent 2/(1+beta) (default 3)")
    p.add_argument("--d", type=_positive_int("--d"), default=None,
                   help="monogamous pairing capacity, positive integer (default 1)")
    p.add_argument("--config", type=Path, default=None, help="JSON config file; flags override its values")


def _add_run_flags(p: argparse.ArgumentParser, replicates_default: int) -> None:
    p.add_argument("--replicates", type=_positive_int("--replicates"), default=replicates_default,
                   help=f"replicate count >= 1 (default {replicates_default})")
    p.add_argument("--seed", type=int, default=42, help="64-bit master seed; fixes all outputs (default 42)")
    p.add_argument("--threads", type=_positive_int("--threads"), default=1,
                   help="worker process cap >= 1; does not change results (default 1)")
    p.add_argument("--max-steps", type=_positive_int("--max-steps"), default=None,
                   help="censoring cap in steps (default: ceil(50 ln^2 N))")
    p.add_argument("--out", type=Path, default=None, help="output path (CSV) or prefix (experiment)")


def build_parser() -> _Parser:
    parser = _Parser(prog="bbpre", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="extinction-time replicates for one initial count")
    _add_model_flags(p)
    _add_run_flags(p, 1000)
    p.add_argument("--n0", type=_positive_int("--n0"), default=100_000, help="initial couple count >= 1")
    p.add_argument("--recording", choices=["terminal", "sparse", "full"], default="terminal",
                   help="trajectory recording mode (default terminal)")

    p = sub.add_parser("coupled", help="process and walk on one environment sequence per replicate")
    _add_model_flags(p)
    _add_run_flags(p, 1000)
    p.add_argument("--n0", type=_positive_int("--n0", 3), default=100_000, help="initial couple count >= 3")
    p.add_argument("--epsilon", type=_positive_float("--epsilon"), default=1.0,
                   help="window scale: k = floor(epsilon ln^2 N) (default 1.0)")
    p.add_argument("--recording", choices=["terminal", "sparse", "full"], default="terminal")

    p = sub.add_parser("audit", help="run the condition checks and moment audits")
    _add_model_flags(p)
    p.add_argument("--replicates", type=_positive_int("--replicates", 100), default=100_000,
                   help="Monte Carlo sample count >= 100 (default 100000)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", type=Path, default=None, help="write the full report as JSON")

    p = sub.add_parser("experiment", help="replicate sweep over an N grid with KS summaries")
    _add_model_flags(p)
    _add_run_flags(p, 2000)
    p.add_argument("--n-grid", type=_parse_grid, default=(1000, 100_000, 100_000_000),
                   help="comma-separated strictly increasing counts >= 3 (default 1000,100000,100000000)")
    p.add_argument("--epsilon", type=_positive_float("--epsilon"), default=1.0)
    p.add_argument("--recording", choices=["terminal", "sparse", "full"], default="terminal")

    p = sub.add_parser("limit-law", help="tabulate the reference law to CSV")
    p.add_argument("--sigma", type=_positive_float("--sigma"), default=1.0,
                   help="scale parameter > 0 (std of one walk increment)")
    p.add_argument("--table", type=_parse_table, default=None, help="t grid start:stop:count (t > 0)")
    p.add_argument("--quantiles", type=str, default=None, help="comma-separated levels in (0,1)")
    p.add_argument("--out", type=Path, default=None, help="CSV output path (default: stdout)")

    p = sub.add_parser("lemma-sweep", help="frozen-bundle ratio diagnostics and slope fits")
    _add_model_flags(p)
    p.add_argument("--n0", type=_positive_int("--n0"), default=10_000)
    p.add_argument("--paths", type=_positive_int("--paths"), default=20, help="frozen environment paths (default 20)")
    p.add_argument("--replicates", type=_positive_int("--replicates", 2), default=10_000,
                   help="offspring randomizations per path (default 10000)")
    p.add_argument("--max-steps", type=_positive_int("--max-steps"), default=50,
                   help="per-path step horizon (default 50)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--threads", type=_positive_int("--threads"), default=1)
    p.add_argument("--out", type=Path, default=None, help="ratio table CSV path")

    return parser


def _models_from_args(args):
    cfg = load_config_file(args.config) if args.config else None
    return build_model_triple(
        file_config=cfg,
        preset=args.model,
        sigma_env=args.sigma_env,
        rule_kind=args.rule,
        alpha=args.alpha,
        beta=args.beta,
        d=args.d,
    )


def _cmd_simulate(args) -> int:
    env, offspring, rule = _models_from_args(args)
    keep_steps = args.recording != "terminal"
    result = run_extinction_records(
        env, offspring, rule, args.n0, args.replicates, args.max_steps, args.seed, args.threads,
        args.recording, return_trajectories=keep_steps,
    )
    records, trajectories = result if keep_steps else (result, [])
    if args.out:
        write_replicates_csv(args.out, records)
        if trajectories:
            steps_path = args.out.parent / (args.out.stem + "_trajectories.csv")
            write_trajectories_csv(steps_path, trajectories)
    censored = sum(1 for r in records if r.censored)
    print(f"simulate: n0={args.n0} replicates={len(records)} censored={censored} out={args.out or '-'}")
    return 0


def _cmd_coupled(args) -> int:
    env, offspring, rule = _models_from_args(args)
    config = ExperimentConfig(
        env=env,
        offspring=offspring,
        rule=rule,
        n_grid=(args.n0,),
        replicates=args.replicates,
        epsilon=args.epsilon,
        beta=args.beta if args.beta is not None else 3.0,
        master_seed=args.seed,
        threads=args.threads,
        max_steps=args.max_steps,
        recording=args.recording,
    )
    records = run_replicates(config, 0)
    if args.out:
        write_replicates_csv(args.out, records)
    censored = sum(1 for r in records if r.censored)
    theta_cens = sum(1 for r in records if r.theta is None)
    print(
        f"coupled: n0={args.n0} replicates={len(records)} tau_censored={censored} "
        f"theta_censored={theta_cens} out={args.out or '-'}"
    )
    return 0


def _cmd_audit(args) -> int:
    env, offspring, rule = _models_from_args(args)
    report = audit_conditions(rule, env, offspring, args.replicates, derive_stream(args.seed, AUDIT_STREAM_KEY))
    payload = report.to_dict()
    for name in sorted(payload["conditions"]):
        entry = payload["conditions"][name]
        print(f"{name}: {entry['verdict']}")
        for w in entry["witnesses"]:
            print(f"  witness: {tuple(w)}")
    m = payload["moment_estimates"]
    print(
        "moments: mean_xi={mean_xi:.6g} (se {mean_xi_se:.2g}) var_xi={var_xi:.6g} (se {var_xi_se:.2g})".format(**m)
    )
    print(
        "         omega1={omega1_mean:.6g} omega2={omega2_mean:.6g} omega3={omega3_mean:.6g}".format(**m)
    )
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, allow_nan=False) + "\n")
    return 0


def _cmd_experiment(args) -> int:
    env, offspring, rule = _models_from_args(args)
    config = ExperimentConfig(
        env=env,
        offspring=offspring,
        rule=rule,
        n_grid=args.n_grid,
        replicates=args.replicates,
        epsilon=args.epsilon,
        beta=args.beta if args.beta is not None else 3.0,
        master_seed=args.seed,
        threads=args.threads,
        max_steps=args.max_steps,
        recording=args.recording,
    )
    t0 = time.monotonic()
    report = run_experiment(config, out_prefix=args.out)
    elapsed = time.monotonic() - t0
    print(f"sigma={report.sigma!r} ({report.sigma_source})")
    for row in report.rows:
        print(
            f"N={row.n0}: ks_tau={_fmt(row.ks_tau)} ks_theta={_fmt(row.ks_theta)} "
            f"frac_N_theta_pos={_fmt(row.frac_n_theta_pos)} frac_N_theta_k_pos={_fmt(row.frac_n_theta_k_pos)} "
            f"censored={row.censored_count}/{row.replicates}"
        )
    print(f"total steps={report.total_steps} elapsed={elapsed:.1f}s", file=sys.stderr)
    return 0


def _fmt(v) -> str:
    return "-" if v is None else f"{v:.4f}"


def _cmd_limit_law(args) -> int:
    law = FirstPassageLaw(args.sigma)
    lines = []
    if args.quantiles:
        try:
            qs = [float(q) for q in args.quantiles.split(",")]
        except ValueError:
            raise ConfigurationError(f"--quantiles expects comma-separated reals in (0,1), got {args.quantiles!r}")
        lines.append("q,quantile")
        for q in qs:
            lines.append(f"{q!r},{law.quantile(q)!r}")
    else:
        grid = args.table if args.table is not None else np.linspace(0.1, 10.0, 100)
        lines.append("t,pdf,cdf")
        for t in grid:
            lines.append(f"{float(t)!r},{law.pdf(float(t))!r},{law.cdf(float(t))!r}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"limit-law: wrote {len(lines) - 1} rows to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_lemma_sweep(args) -> int:
    env, offspring, rule = _models_from_args(args)
    config = LemmaSweepConfig(
        env=env,
        offspring=offspring,
        rule=rule,
        n0_grid=(args.n0,),
        paths=args.paths,
        replicates=args.replicates,
        steps=args.max_steps,
        master_seed=args.seed,
        threads=args.threads,
    )
    sweep = lemma_bound_sweep(config)
    if args.out:
        write_sweep_csv(args.out, sweep)
    print(f"lemma-sweep: rows={len(sweep.rows)} r3_hard_violations={sweep.r3_hard_violations}")
    for name, per_n0 in sweep.slopes.items():
        if isinstance(per_n0, dict):
            for n0, (slope, se) in per_n0.items():
                print(f"  {name}[N={n0}]: slope={slope:.4f} se={se:.4f}")
        else:
            slope, se = per_n0
            print(f"  {name}: slope={slope:.4f} se={se:.4f}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "coupled": _cmd_coupled,
    "audit": _cmd_audit,
    "experiment": _cmd_experiment,
    "limit-law": _cmd_limit_law,
    "lemma-sweep": _cmd_lemma_sweep,
}


def _emit_error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigurationError as exc:
        _emit_error("configuration", str(exc))
        return 1
    except (ExcessCensoringError, OverflowGuardError) as exc:
        _emit_error("runtime", str(exc))
        return 2
    except BbpreError as exc:
        _emit_error("runtime", str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
