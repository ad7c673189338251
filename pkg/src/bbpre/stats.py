"""Experiment orchestration and inference.

Runs coupled replicate sweeps over a grid of initial couple counts,
compares the scaled extinction and hitting times against the
first-passage reference law via one-sample Kolmogorov-Smirnov
distances, tabulates the hitting-window survival frequencies, and
aggregates the frozen-bundle ratio diagnostics.

Censoring: runs that hit the step cap are right-censored.  They are
counted, never dropped: the empirical distribution function uses the
total replicate count in its denominator and jumps only at uncensored
values, so it is exact on [0, cap] and the KS distance is the exact
sup-distance over that window.  The reference law itself is heavy
tailed (no mean), so for sigma near 0.5 about a fifth of the limit mass
lies beyond the default cap of 50 ln^2 N; an experiment aborts only
when observed censoring exceeds the law-implied tail mass plus slack.

Determinism: every replicate's streams are keyed by (master seed, grid
index, replicate index); aggregation is an order-independent merge, so
reruns and thread-count changes reproduce outputs byte for byte.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ExcessCensoringError
from .limit_law import FirstPassageLaw
from .model import (
    EnvironmentModel,
    MatingRule,
    OffspringModel,
    analytic_sigma_xi,
    audit_conditions,
    walk_increments,
)
from .rng import derive_stream
from .simulator import (
    CoupledRun,
    bundle_diagnostics,
    run_coupled,
    run_frozen_bundle,
    run_until_extinction,
)

__all__ = [
    "EmpiricalCdf",
    "empirical_cdf",
    "ks_statistic",
    "ReplicateRecord",
    "ExperimentConfig",
    "SummaryRow",
    "SummaryReport",
    "run_experiment",
    "run_replicates",
    "run_extinction_records",
    "write_replicates_csv",
    "LemmaSweepConfig",
    "LemmaSweep",
    "lemma_bound_sweep",
    "loglog_slope",
    "default_max_steps",
]

AUDIT_STREAM_KEY = 2**31
SIGMA_STREAM_KEY = 2**31 + 1
CENSORING_SLACK = 0.05


def default_max_steps(n0: int) -> int:
    return int(math.ceil(50.0 * math.log(n0) ** 2))


# ---------------------------------------------------------------------------
# Empirical CDF and KS distance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous step function with jumps 1/n at the order statistics."""

    values: np.ndarray
    n: int

    def __call__(self, t):
        idx = np.searchsorted(self.values, t, side="right")
        out = idx / self.n
        return float(out) if np.ndim(t) == 0 else out

    @property
    def jump_points(self) -> np.ndarray:
        return self.values


def empirical_cdf(samples: Sequence[float]) -> EmpiricalCdf:
    """Empirical distribution function of a nonempty sample."""
    arr = np.sort(np.asarray(samples, dtype=float))
    if arr.size == 0:
        raise ValueError("empirical_cdf needs a nonempty sample")
    return EmpiricalCdf(values=arr, n=arr.size)


def ks_statistic(samples: Sequence[float], law: FirstPassageLaw, n_total: Optional[int] = None) -> float:
    """One-sample KS distance, evaluated exactly at the jump points.

    With ``n_total`` larger than the sample size the samples are treated
    as the uncensored part of a right-censored sample of ``n_total``
    observations, all censored values exceeding the largest sample; the
    result is then the exact sup-distance on the observed range.
    """
    xs = np.sort(np.asarray(samples, dtype=float))
    if xs.size == 0:
        raise ValueError("ks_statistic needs a nonempty sample")
    n = xs.size if n_total is None else int(n_total)
    if n < xs.size:
        raise ValueError("n_total cannot be smaller than the number of samples")
    f = np.asarray(law.cdf(xs), dtype=float)
    i = np.arange(1, xs.size + 1, dtype=float)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def loglog_slope(x: np.ndarray, y: np.ndarray, y_se=None) -> tuple[float, float]:
    """Slope and standard error of log(y) on log(x), NaN-safe.

    Without ``y_se``: OLS with the residual-based error (needs several
    points).  With ``y_se`` (standard errors of the y values): weighted
    least squares whose slope error comes from the propagated variances,
    which stays meaningful even for a three-point grid.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if y_se is not None:
        y_se = np.asarray(y_se, dtype=float)
        keep &= np.isfinite(y_se) & (y_se > 0)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    m = lx.size
    if m < 3:
        return math.nan, math.nan
    if y_se is None:
        mx = lx.mean()
        sxx = float(np.sum((lx - mx) ** 2))
        if sxx == 0.0:
            return math.nan, math.nan
        slope = float(np.sum((lx - mx) * (ly - ly.mean())) / sxx)
        resid = ly - (ly.mean() + slope * (lx - mx))
        se = math.sqrt(float(np.sum(resid**2)) / (m - 2) / sxx)
        return slope, se
    w = (y[keep] / y_se[keep]) ** 2  # var(ln y) ~ (se/y)^2
    mx = float(np.sum(w * lx) / np.sum(w))
    sxx = float(np.sum(w * (lx - mx) ** 2))
    if sxx == 0.0:
        return math.nan, math.nan
    slope = float(np.sum(w * (lx - mx) * ly) / sxx)
    return slope, math.sqrt(1.0 / sxx)


# ---------------------------------------------------------------------------
# Coupled replicate sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicateRecord:
    """Flat per-replicate outcome row (the CSV schema)."""

    replicate_id: int
    n0: int
    tau: Optional[int]
    censored: bool
    theta: Optional[int]
    n_theta: Optional[int]
    n_theta_plus_k: Optional[int]
    steps_run: int
    overflow: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition: model triple, N grid, replicate count, seeds, outputs."""

    env: EnvironmentModel
    offspring: OffspringModel
    rule: MatingRule
    n_grid: tuple
    replicates: int = 2000
    epsilon: float = 1.0
    beta: float = 3.0
    master_seed: int = 42
    threads: int = 1
    max_steps: Optional[int] = None
    recording: str = "terminal"
    sigma_xi: Optional[float] = None
    audit_samples: int = 100_000
    sigma_mc_samples: int = 1_000_000

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        if not grid or any(n < 3 for n in grid) or list(grid) != sorted(set(grid)):
            raise ConfigurationError(f"n_grid entries must be >= 3 and strictly increasing, got {self.n_grid}")
        if self.replicates < 1:
            raise ConfigurationError(f"replicates must be >= 1, got {self.replicates}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")
        if self.epsilon <= 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if not self.beta > 1:
            raise ConfigurationError(f"beta must exceed 1, got {self.beta}")


def _record_from_run(run: CoupledRun, replicate_id: int) -> ReplicateRecord:
    traj = run.trajectory
    return ReplicateRecord(
        replicate_id=replicate_id,
        n0=traj.n0,
        tau=traj.tau,
        censored=traj.tau is None and not traj.overflow,
        theta=run.theta,
        n_theta=run.n_at_theta,
        n_theta_plus_k=run.n_at_theta_plus_k,
        steps_run=traj.steps_run,
        overflow=traj.overflow,
    )


def _coupled_chunk(args) -> list[ReplicateRecord]:
    (env, offspring, rule, n0, beta, epsilon, max_steps, master_seed, grid_index, start, stop) = args
    out = []
    for rep in range(start, stop):
        stream = derive_stream(master_seed, grid_index, rep)
        run = run_coupled(rule, env, offspring, n0, beta, epsilon, max_steps, stream)
        out.append(_record_from_run(run, rep))
    return out


def _run_chunked(task_args: list, worker, threads: int) -> list:
    if threads <= 1 or len(task_args) <= 1:
        chunks = [worker(a) for a in task_args]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(worker, task_args))
    merged = []
    for c in chunks:
        merged.extend(c)
    return merged


def run_replicates(config: ExperimentConfig, grid_index: int) -> list[ReplicateRecord]:
    """All coupled replicates for one grid point, merged in replicate order."""
    n0 = config.n_grid[grid_index]
    max_steps = config.max_steps or default_max_steps(n0)
    chunk = max(1, math.ceil(config.replicates / (config.threads * 8)))
    tasks = [
        (
            config.env,
            config.offspring,
            config.rule,
            n0,
            config.beta,
            config.epsilon,
            max_steps,
            config.master_seed,
            grid_index,
            start,
            min(start + chunk, config.replicates),
        )
        for start in range(0, config.replicates, chunk)
    ]
    records = _run_chunked(tasks, _coupled_chunk, config.threads)
    records.sort(key=lambda r: r.replicate_id)
    return records


def _extinction_chunk(args) -> list[tuple]:
    env, offspring, rule, n0, max_steps, master_seed, start, stop, recording = args
    out = []
    for rep in range(start, stop):
        stream = derive_stream(master_seed, 0, rep)
        traj = run_until_extinction(rule, env, offspring, n0, max_steps, stream, recording)
        rec = ReplicateRecord(
            replicate_id=rep,
            n0=n0,
            tau=traj.tau,
            censored=traj.censored,
            theta=None,
            n_theta=None,
            n_theta_plus_k=None,
            steps_run=traj.steps_run,
            overflow=traj.overflow,
        )
        out.append((rec, traj if recording != "terminal" else None))
    return out


def run_extinction_records(
    env: EnvironmentModel,
    offspring: OffspringModel,
    rule: MatingRule,
    n0: int,
    replicates: int,
    max_steps: Optional[int],
    master_seed: int,
    threads: int = 1,
    recording: str = "terminal",
    return_trajectories: bool = False,
):
    """Extinction-only replicate sweep (the ``simulate`` subcommand's engine).

    Returns the record list, or ``(records, [(replicate_id, Trajectory),
    ...])`` when ``return_trajectories`` is set (requires a recording
    mode that keeps steps).
    """
    if replicates < 1:
        raise ConfigurationError(f"replicates must be >= 1, got {replicates}")
    if threads < 1:
        raise ConfigurationError(f"threads must be >= 1, got {threads}")
    ms = max_steps or default_max_steps(max(n0, 3))
    chunk = max(1, math.ceil(replicates / (threads * 8)))
    tasks = [
        (env, offspring, rule, n0, ms, master_seed, start, min(start + chunk, replicates), recording)
        for start in range(0, replicates, chunk)
    ]
    pairs = _run_chunked(tasks, _extinction_chunk, threads)
    pairs.sort(key=lambda pair: pair[0].replicate_id)
    records = [rec for rec, _ in pairs]
    if not return_trajectories:
        return records
    return records, [(rec.replicate_id, traj) for rec, traj in pairs if traj is not None]


@dataclass
class SummaryRow:
    """Per-N summary of a replicate sweep."""

    n0: int
    replicates: int
    censored_count: int
    theta_censored_count: int
    overflow_count: int
    k: int
    max_steps: int
    ks_tau: Optional[float]
    ks_theta: Optional[float]
    frac_n_theta_pos: Optional[float]
    frac_n_theta_k_pos: Optional[float]
    n_theta_observed: int
    n_theta_k_observed: int
    mean_tau_scaled: Optional[float]
    median_tau_scaled: Optional[float]
    total_steps: int

    def to_dict(self) -> dict:
        return {
            "N": self.n0,
            "replicates": self.replicates,
            "censored_count": self.censored_count,
            "theta_censored_count": self.theta_censored_count,
            "overflow_count": self.overflow_count,
            "k": self.k,
            "max_steps": self.max_steps,
            "ks_tau": self.ks_tau,
            "ks_theta": self.ks_theta,
            "frac_N_theta_pos": self.frac_n_theta_pos,
            "frac_N_theta_k_pos": self.frac_n_theta_k_pos,
            "n_theta_observed": self.n_theta_observed,
            "n_theta_k_observed": self.n_theta_k_observed,
            "mean_tau_scaled": self.mean_tau_scaled,
            "median_tau_scaled": self.median_tau_scaled,
            "total_steps": self.total_steps,
        }


@dataclass
class SummaryReport:
    """Full experiment output: per-N rows plus global diagnostics."""

    rows: list
    sigma: float
    sigma_source: str
    sigma_se: Optional[float]
    condition_report: dict
    total_replicates: int
    total_steps: int
    master_seed: int
    epsilon: float
    beta: float

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "global": {
                "sigma": self.sigma,
                "sigma_source": self.sigma_source,
                "sigma_se": self.sigma_se,
                "condition_report": self.condition_report,
                "master_seed": self.master_seed,
                "epsilon": self.epsilon,
                "beta": self.beta,
                "work": {
                    "total_replicates": self.total_replicates,
                    "total_steps": self.total_steps,
                },
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False, sort_keys=False)


def _scaled_sorted(values: list, scale: float) -> np.ndarray:
    return np.sort(np.asarray(values, dtype=float)) / scale


def _censored_median(sorted_scaled: np.ndarray, n_total: int) -> Optional[float]:
    # exact right-censored median: defined whenever half the mass is observed
    rank = math.ceil(n_total / 2)
    if sorted_scaled.size < rank:
        return None
    return float(sorted_scaled[rank - 1])


def resolve_sigma(config: ExperimentConfig) -> tuple[float, str, Optional[float]]:
    """The reference-law sigma: configured, analytic, or Monte Carlo."""
    if config.sigma_xi is not None:
        return float(config.sigma_xi), "configured", None
    exact = analytic_sigma_xi(config.rule, config.env, config.offspring)
    if exact is not None:
        if exact <= 0:
            raise ConfigurationError("walk increment is degenerate (sigma = 0); no reference law exists")
        return float(exact), "analytic", None
    stream = derive_stream(config.master_seed, SIGMA_STREAM_KEY)
    eta = np.asarray(config.env.sample(stream, size=config.sigma_mc_samples), dtype=float)
    xs = walk_increments(config.rule, config.offspring, eta)
    sd = float(xs.std(ddof=1))
    if sd <= 0:
        raise ConfigurationError("walk increment is degenerate (sigma = 0); no reference law exists")
    se = sd / math.sqrt(2.0 * (xs.size - 1))
    return sd, "monte_carlo", se


def summarize_records(
    records: list[ReplicateRecord],
    n0: int,
    k: int,
    max_steps: int,
    law: FirstPassageLaw,
) -> SummaryRow:
    scale = math.log(n0) ** 2
    usable = [r for r in records if not r.overflow]
    n_total = len(usable)
    overflow_count = len(records) - n_total
    taus = [r.tau for r in usable if r.tau is not None]
    thetas = [r.theta for r in usable if r.theta is not None]
    censored = n_total - len(taus)
    theta_censored = n_total - len(thetas)

    expected_tail = 1.0 - law.cdf(max_steps / scale)
    if n_total and censored / n_total > expected_tail + CENSORING_SLACK:
        raise ExcessCensoringError(
            f"N={n0}: censored fraction {censored / n_total:.3f} exceeds the law-implied "
            f"tail {expected_tail:.3f} plus slack {CENSORING_SLACK}"
        )

    tau_scaled = _scaled_sorted(taus, scale) if taus else np.array([])
    theta_scaled = _scaled_sorted(thetas, scale) if thetas else np.array([])
    ks_tau = ks_statistic(tau_scaled, law, n_total=n_total) if taus else None
    ks_theta = ks_statistic(theta_scaled, law, n_total=n_total) if thetas else None

    obs_theta = [r for r in usable if r.n_theta is not None]
    obs_k = [r for r in usable if r.n_theta_plus_k is not None]
    frac_pos = (sum(1 for r in obs_theta if r.n_theta > 0) / len(obs_theta)) if obs_theta else None
    frac_k_pos = (sum(1 for r in obs_k if r.n_theta_plus_k > 0) / len(obs_k)) if obs_k else None

    # censored replicates contribute the cap: a documented lower bound on
    # the uncensorable mean (the limit law itself has no mean)
    mean_tau = (
        float((sum(taus) + censored * max_steps) / n_total / scale) if n_total else None
    )
    median_tau = _censored_median(tau_scaled, n_total) if n_total else None

    return SummaryRow(
        n0=n0,
        replicates=len(records),
        censored_count=censored,
        theta_censored_count=theta_censored,
        overflow_count=overflow_count,
        k=k,
        max_steps=max_steps,
        ks_tau=ks_tau,
        ks_theta=ks_theta,
        frac_n_theta_pos=frac_pos,
        frac_n_theta_k_pos=frac_k_pos,
        n_theta_observed=len(obs_theta),
        n_theta_k_observed=len(obs_k),
        mean_tau_scaled=mean_tau,
        median_tau_scaled=median_tau,
        total_steps=sum(r.steps_run for r in records),
    )


def run_experiment(config: ExperimentConfig, out_prefix: Optional[Path] = None) -> SummaryReport:
    """Full sweep: per-N coupled replicates, KS distances, window frequencies.

    When ``out_prefix`` is given, writes ``<prefix>_replicates.csv``,
    one ``<prefix>_ecdf_tau_N<count>.csv`` per grid point, and
    ``<prefix>_summary.json``.
    """
    sigma, sigma_source, sigma_se = resolve_sigma(config)
    law = FirstPassageLaw(sigma)
    audit = audit_conditions(
        config.rule,
        config.env,
        config.offspring,
        config.audit_samples,
        derive_stream(config.master_seed, AUDIT_STREAM_KEY),
    )
    rows = []
    all_records: list[ReplicateRecord] = []
    for gi, n0 in enumerate(config.n_grid):
        max_steps = config.max_steps or default_max_steps(n0)
        k = int(math.floor(config.epsilon * math.log(n0) ** 2))
        records = run_replicates(config, gi)
        rows.append(summarize_records(records, n0, k, max_steps, law))
        all_records.extend(records)
    report = SummaryReport(
        rows=rows,
        sigma=sigma,
        sigma_source=sigma_source,
        sigma_se=sigma_se,
        condition_report=audit.to_dict(),
        total_replicates=sum(r.replicates for r in rows),
        total_steps=sum(r.total_steps for r in rows),
        master_seed=config.master_seed,
        epsilon=config.epsilon,
        beta=config.beta,
    )
    if out_prefix is not None:
        out_prefix = Path(out_prefix)
        out_prefix.parent.mkdir(parents=True, exist_ok=True)
        write_replicates_csv(Path(f"{out_prefix}_replicates.csv"), all_records)
        for row in rows:
            recs = [r for r in all_records if r.n0 == row.n0 and not r.overflow]
            taus = sorted(r.tau for r in recs if r.tau is not None)
            if taus:
                write_ecdf_csv(
                    Path(f"{out_prefix}_ecdf_tau_N{row.n0}.csv"),
                    np.asarray(taus, dtype=float) / math.log(row.n0) ** 2,
                    len(recs),
                    law,
                )
        Path(f"{out_prefix}_summary.json").write_text(report.to_json() + "\n")
    return report


# ---------------------------------------------------------------------------
# CSV writers (deterministic formatting: repr for floats, blank for missing)
# ---------------------------------------------------------------------------

REPLICATE_COLUMNS = (
    "replicate_id",
    "N0",
    "tau",
    "censored_flag",
    "theta",
    "N_theta",
    "N_theta_plus_k",
    "steps_run",
)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_replicates_csv(path: Path, records: Sequence[ReplicateRecord]) -> None:
    lines = [",".join(REPLICATE_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                _cell(v)
                for v in (
                    r.replicate_id,
                    r.n0,
                    r.tau,
                    r.tau is None,
                    r.theta,
                    r.n_theta,
                    r.n_theta_plus_k,
                    r.steps_run,
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_ecdf_csv(path: Path, sorted_scaled: np.ndarray, n_total: int, law: FirstPassageLaw) -> None:
    lines = ["t,F_empirical,F_chi"]
    f_law = np.asarray(law.cdf(sorted_scaled), dtype=float)
    for i, t in enumerate(sorted_scaled, start=1):
        lines.append(f"{t!r},{i / n_total!r},{float(f_law[i - 1])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


TRAJECTORY_COLUMNS = ("replicate_id", "n", "eta", "F_total", "M_total", "N", "xi", "S", "R")


def write_trajectories_csv(path: Path, trajectories: Sequence[tuple]) -> None:
    """One row per recorded step; ``trajectories`` pairs (replicate_id, Trajectory)."""
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for rep_id, traj in trajectories:
        for s in traj.steps:
            lines.append(
                f"{rep_id},{s.n},{s.eta!r},{s.f_total},{s.m_total},{s.n_pairs},"
                f"{s.increment!r},{s.walk_sum!r},{s.residual!r}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Ratio-bound sweep over frozen-environment bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LemmaSweepConfig:
    """Frozen-bundle sweep: paths x replicates x steps per grid point."""

    env: EnvironmentModel
    offspring: OffspringModel
    rule: MatingRule
    n0_grid: tuple = (10_000,)
    paths: int = 20
    replicates: int = 10_000
    steps: int = 50
    master_seed: int = 42
    threads: int = 1

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n0_grid)
        object.__setattr__(self, "n0_grid", grid)
        if self.paths < 1 or self.replicates < 2 or self.steps < 1:
            raise ConfigurationError("sweep needs paths >= 1, replicates >= 2, steps >= 1")


@dataclass
class LemmaSweep:
    """Sweep output: per (n0, path, n) ratio rows plus slope fits.

    ``r3_hard_violations`` counts steps with r3 above 1 + 4 SE.  Slopes
    are OLS fits of log mean ratio against log step (per grid point) and
    against log n0 (across the grid); a nonpositive slope within noise
    is the boundedness check.
    """

    rows: list
    r3_hard_violations: int
    slopes: dict

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "n0": n0,
                    "path": path,
                    "n": int(n),
                    "r2": r2,
                    "r3": r3,
                    "r3_se": se,
                    "r4": r4,
                }
                for (n0, path, n, r2, r3, se, r4) in self.rows
            ],
            "r3_hard_violations": self.r3_hard_violations,
            "slopes": self.slopes,
        }


def _bundle_chunk(args) -> list[tuple]:
    env, offspring, rule, n0, steps, replicates, master_seed, grid_index, path_index = args
    stream = derive_stream(master_seed, grid_index, path_index)
    bundle = run_frozen_bundle(rule, env, offspring, n0, steps, replicates, stream)
    table = bundle_diagnostics(bundle, rule, offspring)
    return [
        (
            n0,
            path_index,
            int(table.n[i]),
            float(table.r2[i]),
            float(table.r3[i]),
            float(table.r3_se[i]),
            float(table.r4[i]),
        )
        for i in range(table.n.size)
    ]


def lemma_bound_sweep(config: LemmaSweepConfig) -> LemmaSweep:
    """Aggregate bundle diagnostics over paths and grid points."""
    tasks = [
        (
            config.env,
            config.offspring,
            config.rule,
            n0,
            config.steps,
            config.replicates,
            config.master_seed,
            gi,
            p,
        )
        for gi, n0 in enumerate(config.n0_grid)
        for p in range(config.paths)
    ]
    rows = _run_chunked(tasks, _bundle_chunk, config.threads)
    rows.sort(key=lambda r: (r[0], r[1], r[2]))

    hard = 0
    for (_, _, _, _, r3, se, _) in rows:
        if not math.isnan(r3) and r3 > 1.0 + 4.0 * se:
            hard += 1

    slopes: dict = {"r2_vs_n": {}, "r4_vs_n": {}}
    grid_means = {"r2": [], "r4": []}
    grid_ses = {"r2": [], "r4": []}
    for n0 in config.n0_grid:
        sub = [r for r in rows if r[0] == n0]
        ns = sorted({r[2] for r in sub})
        ns_arr = np.asarray(ns, dtype=float)
        # growth in n: per-step means pooled across paths, residual-based SE
        mean_r2 = np.array([np.nanmean([r[3] for r in sub if r[2] == n]) for n in ns])
        mean_r4 = np.array([np.nanmean([r[6] for r in sub if r[2] == n]) for n in ns])
        slopes["r2_vs_n"][n0] = loglog_slope(ns_arr, mean_r2)
        slopes["r4_vs_n"][n0] = loglog_slope(ns_arr, mean_r4)
        # growth in N: independent paths give the sampling error of each
        # grid point's mean, propagated through a weighted fit
        for key, col in (("r2", 3), ("r4", 6)):
            per_path = np.array(
                [np.nanmean([r[col] for r in sub if r[1] == p]) for p in range(config.paths)]
            )
            per_path = per_path[np.isfinite(per_path)]
            grid_means[key].append(float(per_path.mean()))
            grid_ses[key].append(
                float(per_path.std(ddof=1) / math.sqrt(per_path.size)) if per_path.size > 1 else math.nan
            )
    if len(config.n0_grid) >= 3:
        g = np.asarray(config.n0_grid, dtype=float)
        slopes["r2_vs_N"] = loglog_slope(g, np.asarray(grid_means["r2"]), y_se=np.asarray(grid_ses["r2"]))
        slopes["r4_vs_N"] = loglog_slope(g, np.asarray(grid_means["r4"]), y_se=np.asarray(grid_ses["r4"]))
    return LemmaSweep(rows=rows, r3_hard_violations=hard, slopes=slopes)


def write_sweep_csv(path: Path, sweep: LemmaSweep) -> None:
    lines = ["N0,path,n,r2,r3,r3_se,r4"]
    for (n0, p, n, r2, r3, se, r4) in sweep.rows:
        lines.append(f"{n0},{p},{n},{r2!r},{r3!r},{se!r},{r4!r}")
    Path(path).write_text("\n".join(lines) + "\n")
