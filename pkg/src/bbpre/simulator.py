"""Process evolution, extinction times, and coupled process/walk runs.

A replicate evolves the couple counts step by step: sample the
environment, sample the two offspring totals, mate.  Zero couples is
absorbing.  Counts are Python ints, so they never wrap; offspring means
beyond the sampling guard abort the replicate with an overflow tag.

``run_coupled`` drives the process and the associated walk from one
environment sequence (two child streams per replicate: one for the
environment, one for offspring noise, so the walk's law is unaffected
by how much offspring randomness a path consumes).  It records the
hitting step, the couple counts at the hitting step and ``k`` steps
later with ``k = floor(epsilon * ln^2 N)``, and the extinction step.

``run_frozen_bundle`` runs many offspring randomizations over a single
frozen environment path; the bundle diagnostics estimate the
environment-conditional ratios behind the step-residual, conditional-
mean, and accumulated-error bounds,

    r2_n = E|R_n|^(1+delta) / (e^zeta_n  E N_{n-1}),
    r3_n = E N_n / (e^xi_n  E N_{n-1}),
    r4_n = E|N_n - N0 e^{S_n}|^(1+delta)
           / (n^delta N0 e^{S_n} sum_{i<=n} e^{zeta_i - xi_i + delta (S_n - S_i)}),

where R_n = N_n - N_{n-1} e^{xi_n} uses the model's analytic increment,
never realized offspring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DegenerateModelError, OverflowGuardError
from .model import (
    EnvironmentModel,
    MatingRule,
    OffspringModel,
    mate_array,
    walk_increment,
    walk_increments,
    _log_noise_scales,
)
from .walk import HittingSpec

__all__ = [
    "StepRecord",
    "Trajectory",
    "CoupledRun",
    "evolve_step",
    "run_until_extinction",
    "run_coupled",
    "run_with_environment",
    "FrozenBundle",
    "run_frozen_bundle",
    "DiagnosticTable",
    "bundle_diagnostics",
    "residual_diagnostics",
]

RECORDING_MODES = ("terminal", "sparse", "full")


@dataclass(frozen=True)
class StepRecord:
    """One recorded step: counts, walk values, and the step residual."""

    n: int
    eta: float
    f_total: int
    m_total: int
    n_pairs: int
    increment: float
    walk_sum: float
    residual: float


@dataclass
class Trajectory:
    """One realized path: recorded steps, extinction step, and censoring state."""

    n0: int
    recording: str
    steps: list = field(default_factory=list)
    tau: Optional[int] = None
    steps_run: int = 0
    final_n: int = 0
    overflow: bool = False

    @property
    def censored(self) -> bool:
        return self.tau is None and not self.overflow


@dataclass
class CoupledRun:
    """Process and walk driven by one environment sequence.

    ``theta`` is None when the walk never reached the threshold within
    the step cap; the comparison counts are None when unobserved (theta
    censored, or theta + k beyond the cap while the process was still
    alive).  ``k`` is exactly ``floor(epsilon * ln^2 n0)``.
    """

    trajectory: Trajectory
    epsilon: float
    k: int
    theta: Optional[int] = None
    S_theta: float = math.nan
    xi_theta: float = math.nan
    n_at_theta: Optional[int] = None
    n_at_theta_plus_k: Optional[int] = None


def evolve_step(
    rule: MatingRule,
    offspring_model: OffspringModel,
    n_prev: int,
    eta: float,
    stream: np.random.Generator,
) -> tuple[int, int, int]:
    """One generation: totals sampled, then mated. Zero couples stay zero."""
    if n_prev < 0:
        raise ValueError("couple count must be nonnegative")
    if n_prev == 0:
        return 0, 0, 0
    f_total, m_total = offspring_model.sample_totals(n_prev, eta, stream)
    return rule.mate(f_total, m_total, eta), f_total, m_total


def _increment_or_neg_inf(rule: MatingRule, offspring_model: OffspringModel, eta: float) -> float:
    # extinction-only runs tolerate a vanishing approximant: the growth
    # factor e^xi is then exactly 0, which keeps the residual identity valid
    try:
        return walk_increment(rule, offspring_model, eta)
    except DegenerateModelError:
        return -math.inf


def _record_stride(n0: int, recording: str) -> Optional[int]:
    if recording == "full":
        return 1
    if recording == "sparse":
        return max(1, math.ceil(math.log(max(n0, 2))))
    return None


class _Recorder:
    """Collects step records honoring the recording mode."""

    def __init__(self, n0: int, recording: str):
        if recording not in RECORDING_MODES:
            raise ConfigurationError(f"unknown recording mode {recording!r} (choose from {RECORDING_MODES})")
        self.stride = _record_stride(n0, recording)
        self.steps: list[StepRecord] = []

    def record(self, rec: StepRecord, terminal: bool = False) -> None:
        if self.stride is None:
            return
        if terminal or rec.n % self.stride == 0:
            if self.steps and self.steps[-1].n == rec.n:
                return
            self.steps.append(rec)


def run_until_extinction(
    rule: MatingRule,
    env_model: EnvironmentModel,
    offspring_model: OffspringModel,
    n0: int,
    max_steps: int,
    stream: np.random.Generator,
    recording: str = "terminal",
) -> Trajectory:
    """Evolve until the couple count hits zero or the step cap censors the run."""
    if n0 < 1:
        raise ConfigurationError(f"n0 must be >= 1, got {n0}")
    if max_steps < 1:
        raise ConfigurationError(f"max_steps must be >= 1, got {max_steps}")
    env_rng, off_rng = stream.spawn(2)
    rec = _Recorder(n0, recording)
    traj = Trajectory(n0=n0, recording=recording)
    n_cur = n0
    s = 0.0
    for n in range(1, max_steps + 1):
        eta = float(env_model.sample(env_rng))
        try:
            n_next, f_total, m_total = evolve_step(rule, offspring_model, n_cur, eta, off_rng)
        except OverflowGuardError:
            traj.overflow = True
            traj.steps_run = n
            traj.final_n = n_cur
            return traj
        xi = _increment_or_neg_inf(rule, offspring_model, eta)
        s += xi
        residual = n_next - n_cur * math.exp(xi)
        n_cur = n_next
        dead = n_cur == 0
        rec.record(
            StepRecord(n, eta, f_total, m_total, n_cur, xi, s, residual),
            terminal=dead or n == max_steps,
        )
        traj.steps_run = n
        if dead:
            traj.tau = n
            break
    traj.final_n = n_cur
    traj.steps = rec.steps
    return traj


def run_coupled(
    rule: MatingRule,
    env_model: EnvironmentModel,
    offspring_model: OffspringModel,
    n0: int,
    beta: float,
    epsilon: float,
    max_steps: Optional[int],
    stream: np.random.Generator,
    recording: str = "terminal",
) -> CoupledRun:
    """One environment sequence drives both the process and the walk.

    The walk keeps moving after extinction (environment draws continue)
    until the hitting step is resolved or the cap is reached; once the
    process is extinct, counts at later steps are zero by absorption, so
    the comparison count at ``theta + k`` never needs extra simulation.
    """
    if n0 < 3:
        raise ConfigurationError(f"coupled runs need n0 >= 3, got {n0}")
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    spec = HittingSpec(n0=n0, beta=beta, max_steps=max_steps)
    k = int(math.floor(epsilon * spec.log2_n0))
    env_rng, off_rng = stream.spawn(2)
    rec = _Recorder(n0, recording)
    traj = Trajectory(n0=n0, recording=recording)
    run = CoupledRun(trajectory=traj, epsilon=epsilon, k=k)

    n_cur = n0
    s = 0.0
    n = 0
    while n < spec.max_steps:
        tau_open = traj.tau is None and not traj.overflow and n_cur > 0
        theta_open = run.theta is None
        window_open = run.theta is not None and run.n_at_theta_plus_k is None
        if not (tau_open or theta_open or window_open):
            break
        n += 1
        eta = float(env_model.sample(env_rng))
        f_total = m_total = 0
        n_prev = n_cur
        if n_cur > 0:
            try:
                n_cur, f_total, m_total = evolve_step(rule, offspring_model, n_cur, eta, off_rng)
            except OverflowGuardError:
                traj.overflow = True
                traj.steps_run = n
                traj.final_n = n_cur
                return run
            if n_cur == 0:
                traj.tau = n
        xi = walk_increment(rule, offspring_model, eta)
        s += xi
        residual = n_cur - n_prev * math.exp(xi)
        rec.record(
            StepRecord(n, eta, f_total, m_total, n_cur, xi, s, residual),
            terminal=(traj.tau == n) or n == spec.max_steps,
        )
        traj.steps_run = n
        if run.theta is None and s <= spec.threshold:
            run.theta = n
            run.S_theta = s
            run.xi_theta = xi
            run.n_at_theta = n_cur
            if k == 0:
                run.n_at_theta_plus_k = n_cur
        elif run.theta is not None and run.n_at_theta_plus_k is None and n == run.theta + k:
            run.n_at_theta_plus_k = n_cur
        if (
            run.theta is not None
            and run.n_at_theta_plus_k is None
            and traj.tau is not None
            and run.theta + k >= traj.tau
        ):
            run.n_at_theta_plus_k = 0
    traj.final_n = n_cur
    traj.steps = rec.steps
    return run


def run_with_environment(
    rule: MatingRule,
    offspring_model: OffspringModel,
    n0: int,
    eta_path: np.ndarray,
    stream: np.random.Generator,
) -> Trajectory:
    """Run the full horizon of a frozen environment path with full recording.

    Unlike ``run_until_extinction`` the trajectory continues (as zeros)
    after extinction so bundles over one path stay step-aligned.
    """
    if n0 < 1:
        raise ConfigurationError(f"n0 must be >= 1, got {n0}")
    eta_path = np.asarray(eta_path, dtype=float)
    xi_path = walk_increments(rule, offspring_model, eta_path)
    traj = Trajectory(n0=n0, recording="full")
    n_cur = n0
    s = 0.0
    for i, (eta, xi) in enumerate(zip(eta_path, xi_path)):
        n = i + 1
        n_next, f_total, m_total = evolve_step(rule, offspring_model, n_cur, float(eta), stream)
        s += float(xi)
        residual = n_next - n_cur * math.exp(float(xi))
        if n_next == 0 and n_cur > 0:
            traj.tau = n
        n_cur = n_next
        traj.steps.append(StepRecord(n, float(eta), f_total, m_total, n_cur, float(xi), s, residual))
    traj.steps_run = eta_path.size
    traj.final_n = n_cur
    return traj


# ---------------------------------------------------------------------------
# Frozen-environment bundles and ratio diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrozenBundle:
    """Many offspring randomizations of one frozen environment path.

    ``counts`` has shape (replicates, steps + 1) with column 0 equal to
    the initial couple count; extinct replicates stay at zero.
    """

    n0: int
    eta: np.ndarray
    xi: np.ndarray
    walk_sum: np.ndarray
    counts: np.ndarray


def run_frozen_bundle(
    rule: MatingRule,
    env_model: EnvironmentModel,
    offspring_model: OffspringModel,
    n0: int,
    steps: int,
    replicates: int,
    stream: np.random.Generator,
) -> FrozenBundle:
    """Draw one environment path, then evolve ``replicates`` processes on it.

    Vectorized across replicates (int64 counts), which bounds the usable
    scale: the largest requested offspring mean must stay below 1e15.
    """
    if replicates < 2:
        raise ConfigurationError("frozen bundles need at least 2 replicates")
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    env_rng, off_rng = stream.spawn(2)
    eta = np.asarray(env_model.sample(env_rng, size=steps), dtype=float)
    xi = walk_increments(rule, offspring_model, eta)
    counts = np.zeros((replicates, steps + 1), dtype=np.int64)
    counts[:, 0] = n0
    for j in range(1, steps + 1):
        e = float(eta[j - 1])
        prev = counts[:, j - 1]
        alive = prev > 0
        if not alive.any():
            break
        mf = float(offspring_model.mean_f(e))
        mm = float(offspring_model.mean_m(e))
        lam_f = prev[alive] * mf
        lam_m = prev[alive] * mm
        if max(lam_f.max(initial=0.0), lam_m.max(initial=0.0)) > 1e15:
            raise OverflowGuardError("bundle scale too large for vectorized int64 counts")
        if offspring_model.kind == "poisson":
            f = off_rng.poisson(lam_f)
            m = off_rng.poisson(lam_m)
        else:
            f = np.rint(lam_f).astype(np.int64)
            m = np.rint(lam_m).astype(np.int64)
        counts[alive, j] = mate_array(rule, f.astype(np.int64), m.astype(np.int64), e)
    return FrozenBundle(n0=n0, eta=eta, xi=xi, walk_sum=np.cumsum(xi), counts=counts)


@dataclass(frozen=True)
class DiagnosticTable:
    """Per-step diagnostic ratios over one frozen-environment bundle."""

    n0: int
    n: np.ndarray
    r2: np.ndarray
    r3: np.ndarray
    r3_se: np.ndarray
    r4: np.ndarray
    replicates: int


def bundle_diagnostics(
    bundle: FrozenBundle,
    rule: MatingRule,
    offspring_model: OffspringModel,
) -> DiagnosticTable:
    """Diagnostic ratio estimates from a frozen bundle.

    Steps where the bundle-average parent count hits zero yield NaN
    ratios (nothing left to condition on).  The r3 standard error is the
    linearized ratio-estimator error.
    """
    counts = bundle.counts.astype(float)
    reps, cols = counts.shape
    if reps < 2:
        raise ConfigurationError("diagnostics need at least 2 replicates per frozen environment")
    steps = cols - 1
    delta = rule.delta
    p = 1.0 + delta
    zeta = _log_noise_scales(rule, offspring_model, bundle.eta)
    xi = bundle.xi
    S = bundle.walk_sum
    r2 = np.full(steps, np.nan)
    r3 = np.full(steps, np.nan)
    r3_se = np.full(steps, np.nan)
    r4 = np.full(steps, np.nan)
    for j in range(1, steps + 1):
        prev = counts[:, j - 1]
        cur = counts[:, j]
        mean_prev = prev.mean()
        if mean_prev <= 0.0:
            continue
        growth = math.exp(float(xi[j - 1]))
        resid = cur - prev * growth
        r2[j - 1] = float(np.mean(np.abs(resid) ** p)) / (math.exp(float(zeta[j - 1])) * mean_prev)
        ratio = cur.mean() / (growth * mean_prev)
        r3[j - 1] = ratio
        dev = cur - ratio * growth * prev
        r3_se[j - 1] = math.sqrt(float(np.mean(dev**2)) / reps) / (growth * mean_prev)
        acc = float(np.sum(np.exp(zeta[:j] - xi[:j] + delta * (S[j - 1] - S[:j]))))
        err = cur - bundle.n0 * math.exp(float(S[j - 1]))
        denom = (j**delta) * bundle.n0 * math.exp(float(S[j - 1])) * acc
        r4[j - 1] = float(np.mean(np.abs(err) ** p)) / denom
    return DiagnosticTable(
        n0=bundle.n0,
        n=np.arange(1, steps + 1),
        r2=r2,
        r3=r3,
        r3_se=r3_se,
        r4=r4,
        replicates=reps,
    )


def residual_diagnostics(
    trajectories: Sequence[Trajectory],
    rule: MatingRule,
    offspring_model: OffspringModel,
) -> DiagnosticTable:
    """Diagnostic ratios from fully recorded trajectories sharing one environment.

    Validates that at least two replicates are present, that recording is
    full, and that all trajectories carry the identical environment
    sequence, then reduces to the bundle computation.
    """
    if len(trajectories) < 2:
        raise ConfigurationError("diagnostics need at least 2 replicates per frozen environment")
    ref = trajectories[0]
    if ref.recording != "full" or any(t.recording != "full" for t in trajectories):
        raise ConfigurationError("diagnostics need full recording")
    steps = len(ref.steps)
    if steps < 1 or any(len(t.steps) != steps for t in trajectories):
        raise ConfigurationError("trajectories must share one fully recorded horizon")
    eta = np.array([s.eta for s in ref.steps])
    for t in trajectories[1:]:
        other = np.array([s.eta for s in t.steps])
        if not np.array_equal(eta, other):
            raise ConfigurationError("trajectories do not share a frozen environment sequence")
    xi = np.array([s.increment for s in ref.steps])
    counts = np.zeros((len(trajectories), steps + 1), dtype=np.int64)
    counts[:, 0] = ref.n0
    for r, t in enumerate(trajectories):
        counts[r, 1:] = [s.n_pairs for s in t.steps]
    bundle = FrozenBundle(n0=ref.n0, eta=eta, xi=xi, walk_sum=np.cumsum(xi), counts=counts)
    return bundle_diagnostics(bundle, rule, offspring_model)
