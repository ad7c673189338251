"""Random environment, conditional offspring law, and mating rules.

One model triple ``(EnvironmentModel, OffspringModel, MatingRule)``
defines the process: at each generation every couple independently
produces a (female, male) offspring pair whose law depends on the
current environment value, and the next generation's couple count is
the mating function applied to the two offspring totals.

Built-in mating rules:

* ``monogamous(d)`` -- limited by the scarcer sex,
  ``L(x, y, z) = min(x, y * d(z))`` with ``d`` a positive-integer map;
* ``polygamous()``  -- one male suffices, ``L(x, y, z) = x * min(1, y)``;
* ``asexual()``     -- second component ignored, ``L(x, y, z) = x``,
  which reduces the dynamics to a simple (one-sex) branching process.

Every rule carries a real-valued approximant ``g`` that is Lipschitz
and positively homogeneous in its first two arguments, the Lipschitz
scale ``lipschitz(z)``, a residual scale ``rho(z)`` bounding
``|L - g| <= rho(z) (x + y)^alpha``, and the exponent ``alpha`` in
(0, 1).  The associated random walk increment is

    walk_increment(eta) = ln g(mean_f(eta), mean_m(eta), eta),

and the per-step noise scale entering the residual diagnostics is

    zeta = ln+ (omega1 + omega2 + omega3),
    omega1 = lipschitz(eta)^(1+delta) + rho(eta)^(1+delta),
    omega2 = mean_f(eta) + mean_m(eta),
    omega3 = centered absolute moments of order 1+delta of both
             offspring components,

with ``delta = 1/alpha - 1``.

The executable condition checks (superadditivity, Lipschitz bound,
homogeneity, residual bound, moment and criticality audits) report
pass/fail verdicts with concrete witness tuples, or Monte Carlo
estimates with standard errors where exact decision is impossible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .errors import ConfigurationError, DegenerateModelError, OverflowGuardError

__all__ = [
    "ConstantMap",
    "TableMap",
    "ExpMeanMap",
    "ConstantMeanMap",
    "EnvironmentModel",
    "OffspringModel",
    "MatingRule",
    "monogamous",
    "polygamous",
    "asexual",
    "mate_array",
    "approximant_array",
    "walk_increment",
    "walk_increments",
    "noise_components",
    "log_noise_scale",
    "analytic_sigma_xi",
    "ConditionCheck",
    "ConditionReport",
    "check_superadditivity",
    "check_lipschitz",
    "check_homogeneity",
    "check_approximation",
    "audit_conditions",
]

# Offspring means above this raise OverflowGuardError instead of degrading
# silently; counts themselves are Python ints and never wrap.
MEAN_GUARD = 1e300
# numpy's rejection sampler is exact here; above, the normal approximation
# has relative error below 1e-6 per draw and cannot produce negatives.
POISSON_EXACT_MAX = 1e12


# ---------------------------------------------------------------------------
# Parameter maps (picklable callables used by built-in rules and mean maps)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantMap:
    """z -> value, ignoring z. Array-aware."""

    value: float

    def __call__(self, z):
        if isinstance(z, np.ndarray):
            return np.full(z.shape, self.value, dtype=float)
        return self.value


@dataclass(frozen=True)
class TableMap:
    """Piecewise-constant map of z: value[i] on [breakpoints[i-1], breakpoints[i])."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        if len(self.values) != len(self.breakpoints) + 1:
            raise ConfigurationError("TableMap needs len(values) == len(breakpoints) + 1")
        if list(self.breakpoints) != sorted(self.breakpoints):
            raise ConfigurationError("TableMap breakpoints must be sorted")

    def __call__(self, z):
        idx = np.searchsorted(np.asarray(self.breakpoints), z, side="right")
        vals = np.asarray(self.values, dtype=float)
        out = vals[idx]
        return out if isinstance(z, np.ndarray) else float(out)


@dataclass(frozen=True)
class ExpMeanMap:
    """eta -> scale * exp(eta + shift); slope one in eta, so the walk
    increment of every built-in rule reduces to eta plus a constant."""

    scale: float = 1.0
    shift: float = 0.0

    def __call__(self, eta):
        if isinstance(eta, np.ndarray):
            with np.errstate(over="ignore"):
                return self.scale * np.exp(eta.astype(float) + self.shift)
        x = eta + self.shift
        if x > 709.0:  # math.exp raises past the double range; inf trips the guard instead
            return math.inf if self.scale > 0 else 0.0
        return self.scale * math.exp(x)

    def log(self, eta):
        if self.scale <= 0.0:
            return np.full(np.shape(eta), -np.inf) if isinstance(eta, np.ndarray) else -math.inf
        return math.log(self.scale) + (np.asarray(eta, dtype=float) if isinstance(eta, np.ndarray) else eta) + self.shift


@dataclass(frozen=True)
class ConstantMeanMap:
    """eta -> value, ignoring the environment."""

    value: float

    def __call__(self, eta):
        if isinstance(eta, np.ndarray):
            return np.full(eta.shape, self.value, dtype=float)
        return self.value

    def log(self, eta):
        lv = math.log(self.value) if self.value > 0.0 else -math.inf
        if isinstance(eta, np.ndarray):
            return np.full(eta.shape, lv)
        return lv


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvironmentModel:
    """I.i.d. law of the environment values.

    ``normal`` is the built-in family; all absolute moments are finite,
    so every moment audit is well defined.  ``std = 0`` is the allowed
    degenerate point mass.
    """

    kind: str = "normal"
    mean: float = 0.0
    std: float = 0.5

    def __post_init__(self):
        if self.kind != "normal":
            raise ConfigurationError(f"unknown environment family {self.kind!r} (supported: normal)")
        if not (math.isfinite(self.mean) and math.isfinite(self.std)) or self.std < 0:
            raise ConfigurationError(f"normal environment needs finite mean and std >= 0, got mean={self.mean}, std={self.std}")

    def sample(self, stream: np.random.Generator, size=None):
        """Draw environment values; deterministic given the stream state."""
        if size is None:
            return self.mean + self.std * stream.standard_normal()
        return self.mean + self.std * stream.standard_normal(size)


# ---------------------------------------------------------------------------
# Offspring law
# ---------------------------------------------------------------------------


def _poisson_total(lam: float, stream: np.random.Generator) -> int:
    if not (lam >= 0.0):
        raise ValueError(f"negative or NaN offspring mean {lam!r}")
    if lam > MEAN_GUARD:
        raise OverflowGuardError(f"requested offspring mean {lam:.3e} exceeds guard {MEAN_GUARD:.1e}")
    if lam == 0.0:
        return 0
    if lam <= POISSON_EXACT_MAX:
        return int(stream.poisson(lam))
    return int(round(lam + math.sqrt(lam) * stream.standard_normal()))


def _poisson_centered_abs_moment(lam: float, order: float) -> float:
    """E|X - lam|^order for X ~ Poisson(lam), by truncated series.

    The truncation point makes the geometric tail bound below 1e-12 of
    the accumulated sum; ``order == 2`` returns the exact variance.
    """
    if lam < 0:
        raise ValueError("negative Poisson mean")
    if lam == 0.0:
        return 0.0
    if order == 2.0:
        return float(lam)
    k_max = int(max(lam + 12.0 * math.sqrt(lam) + 20.0, 2.0 * lam + 10.0 * order + 20.0))
    while True:
        k = np.arange(0, k_max + 1, dtype=float)
        terms = np.abs(k - lam) ** order * np.exp(k * math.log(lam) - lam - gammaln(k + 1.0))
        total = float(terms.sum())
        # beyond 2*lam + 10*order + 20 the term ratio is < 0.56, so the
        # remaining tail is < 1.3 * last term
        if 1.3 * float(terms[-1]) <= 1e-12 * max(total, 1e-300):
            return total
        k_max *= 2


def _poisson_centered_abs_moment_array(lams: np.ndarray, order: float) -> np.ndarray:
    if order == 2.0:
        return lams.astype(float)
    out = np.zeros(lams.shape, dtype=float)
    lam_max = float(lams.max(initial=0.0))
    if lam_max <= 1e4:
        pos = lams > 0
        if pos.any():
            lp = lams[pos].astype(float)
            k_max = int(max(lam_max + 12.0 * math.sqrt(lam_max) + 20.0, 2.0 * lam_max + 10.0 * order + 20.0))
            k = np.arange(0, k_max + 1, dtype=float)
            logp = k[None, :] * np.log(lp)[:, None] - lp[:, None] - gammaln(k + 1.0)[None, :]
            terms = np.abs(k[None, :] - lp[:, None]) ** order * np.exp(logp)
            out[pos] = terms.sum(axis=1)
        return out
    return np.array([_poisson_centered_abs_moment(float(l), order) for l in lams])


@dataclass(frozen=True)
class OffspringModel:
    """Conditional bivariate law of one couple's (female, male) offspring.

    ``poisson``: components conditionally independent Poisson with means
    ``mean_f(eta)`` and ``mean_m(eta)``; totals over ``n_pairs`` couples
    are sampled exactly as single Poisson draws with mean
    ``n_pairs * mean`` (additivity), so the cost is independent of the
    couple count.  ``deterministic``: every couple produces exactly
    ``mean_f(eta)`` / ``mean_m(eta)`` offspring (integer-valued maps).
    """

    kind: str = "poisson"
    mean_f: Callable = ExpMeanMap()
    mean_m: Callable = ExpMeanMap()
    beta: float = 3.0
    moment_order: float = 2.0

    def __post_init__(self):
        if self.kind not in ("poisson", "deterministic"):
            raise ConfigurationError(f"unknown offspring family {self.kind!r} (supported: poisson, deterministic)")
        if not self.beta > 1.0:
            raise ConfigurationError(f"beta must exceed 1, got {self.beta}")
        if not self.moment_order > 1.0:
            raise ConfigurationError(f"moment_order must exceed 1, got {self.moment_order}")

    # conditional means -----------------------------------------------------

    def conditional_mean_f(self, eta):
        return self.mean_f(eta)

    def conditional_mean_m(self, eta):
        return self.mean_m(eta)

    def log_mean_f(self, eta):
        if hasattr(self.mean_f, "log"):
            return self.mean_f.log(eta)
        v = self.mean_f(eta)
        return math.log(v) if v > 0 else -math.inf

    def log_mean_m(self, eta):
        if hasattr(self.mean_m, "log"):
            return self.mean_m.log(eta)
        v = self.mean_m(eta)
        return math.log(v) if v > 0 else -math.inf

    # sampling --------------------------------------------------------------

    def sample_totals(self, n_pairs: int, eta: float, stream: np.random.Generator) -> tuple[int, int]:
        """Totals of ``n_pairs`` i.i.d. conditional offspring vectors."""
        if n_pairs < 0:
            raise ValueError("n_pairs must be nonnegative")
        if n_pairs == 0:
            return 0, 0
        mf = float(self.mean_f(eta))
        mm = float(self.mean_m(eta))
        if mf < 0 or mm < 0:
            raise ConfigurationError(f"negative conditional mean at eta={eta}: ({mf}, {mm})")
        if self.kind == "poisson":
            return _poisson_total(n_pairs * mf, stream), _poisson_total(n_pairs * mm, stream)
        f1, m1 = round(mf), round(mm)
        if abs(mf - f1) > 1e-9 or abs(mm - m1) > 1e-9:
            raise ConfigurationError(f"deterministic offspring needs integer means, got ({mf}, {mm}) at eta={eta}")
        return n_pairs * int(f1), n_pairs * int(m1)

    # moments ---------------------------------------------------------------

    def centered_abs_moments(self, eta, order: Optional[float] = None) -> tuple[float, float]:
        """Conditional E|F - EF|^order and E|M - EM|^order at ``eta``."""
        p = self.moment_order if order is None else order
        if self.kind == "deterministic":
            return 0.0, 0.0
        return (
            _poisson_centered_abs_moment(float(self.mean_f(eta)), p),
            _poisson_centered_abs_moment(float(self.mean_m(eta)), p),
        )

    def centered_abs_moments_array(self, eta: np.ndarray, order: Optional[float] = None):
        p = self.moment_order if order is None else order
        if self.kind == "deterministic":
            z = np.zeros(eta.shape)
            return z, z.copy()
        lf = np.asarray(self.mean_f(eta), dtype=float)
        lm = np.asarray(self.mean_m(eta), dtype=float)
        return (
            _poisson_centered_abs_moment_array(lf, p),
            _poisson_centered_abs_moment_array(lm, p),
        )


# ---------------------------------------------------------------------------
# Mating rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _MonogamousL:
    d: Callable

    def __call__(self, x, y, z):
        yd = y * int(self.d(z))
        return x if x <= yd else yd


@dataclass(frozen=True)
class _MonogamousG:
    d: Callable

    def __call__(self, x, y, z):
        return min(float(x), float(y) * float(self.d(z)))


@dataclass(frozen=True)
class _MonogamousLogG:
    d: Callable

    def __call__(self, lx, ly, z):
        dv = float(self.d(z))
        return min(lx, ly + (math.log(dv) if dv > 0 else -math.inf))


@dataclass(frozen=True)
class _MaxOneOf:
    d: Callable

    def __call__(self, z):
        v = self.d(z)
        if isinstance(v, np.ndarray):
            return np.maximum(1.0, v.astype(float))
        return max(1.0, float(v))


def _polygamous_l(x, y, z):
    return x if y >= 1 else 0


def _polygamous_g(x, y, z):
    return float(x)


def _first_log(lx, ly, z):
    return lx


def _asexual_l(x, y, z):
    return x


@dataclass(frozen=True)
class MatingRule:
    """Mating function with its approximation metadata.

    ``L`` maps (count, count, env) to a count; ``g`` is the real-valued
    approximant; ``lipschitz(z)`` its Lipschitz scale; ``rho(z)`` the
    residual scale; ``alpha`` the residual exponent in (0, 1), with
    ``delta = 1/alpha - 1``.  ``log_g``, when present, evaluates
    ``g`` in the log domain and keeps the walk increments exact for the
    built-in rules.  ``d`` is the monogamous pairing capacity map.
    """

    kind: str
    L: Callable
    g: Callable
    lipschitz: Callable
    rho: Callable
    alpha: float = 0.5
    d: Optional[Callable] = None
    log_g: Optional[Callable] = None

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")

    @property
    def delta(self) -> float:
        return 1.0 / self.alpha - 1.0

    def mate(self, f: int, m: int, eta: float) -> int:
        """Couples formed by ``f`` females and ``m`` males at ``eta``."""
        return int(self.L(f, m, eta))

    def approximant(self, x: float, y: float, eta: float) -> float:
        """Approximant ``g`` on nonnegative reals."""
        return float(self.g(x, y, eta))


def monogamous(d=1, alpha: float = 0.5) -> MatingRule:
    """min(x, y * d(z)); the approximant is the same map on the reals."""
    if isinstance(d, (int, float)):
        if int(d) != d or int(d) < 1:
            raise ConfigurationError("monogamous capacity d must be a positive integer")
        dmap = ConstantMap(float(int(d)))
    else:
        dmap = d
    return MatingRule(
        kind="monogamous",
        L=_MonogamousL(dmap),
        g=_MonogamousG(dmap),
        lipschitz=_MaxOneOf(dmap),
        rho=ConstantMap(1.0),
        alpha=alpha,
        d=dmap,
        log_g=_MonogamousLogG(dmap),
    )


def polygamous(alpha: float = 0.5) -> MatingRule:
    """x * min(1, y); approximated by g(x, y, z) = x."""
    return MatingRule(
        kind="polygamous",
        L=_polygamous_l,
        g=_polygamous_g,
        lipschitz=ConstantMap(1.0),
        rho=ConstantMap(1.0),
        alpha=alpha,
        log_g=_first_log,
    )


def asexual(alpha: float = 0.5) -> MatingRule:
    """L(x, y, z) = x: ignores males, reducing to a one-sex process."""
    return MatingRule(
        kind="asexual",
        L=_asexual_l,
        g=_polygamous_g,
        lipschitz=ConstantMap(1.0),
        rho=ConstantMap(1.0),
        alpha=alpha,
        log_g=_first_log,
    )


def mate_array(rule: MatingRule, f: np.ndarray, m: np.ndarray, eta) -> np.ndarray:
    """Vectorized ``L`` for the built-in rules (python loop otherwise)."""
    if rule.kind == "monogamous":
        d = rule.d(eta)
        return np.minimum(f, m * np.asarray(d, dtype=np.int64))
    if rule.kind == "polygamous":
        return np.where(m >= 1, f, 0)
    if rule.kind == "asexual":
        return f.copy()
    zs = np.broadcast_to(np.asarray(eta, dtype=float), f.shape)
    return np.array([rule.L(int(a), int(b), float(z)) for a, b, z in zip(f, m, zs)])


def approximant_array(rule: MatingRule, x: np.ndarray, y: np.ndarray, eta) -> np.ndarray:
    """Vectorized ``g`` for the built-in rules (python loop otherwise)."""
    if rule.kind == "monogamous":
        return np.minimum(x, y * np.asarray(rule.d(eta), dtype=float))
    if rule.kind in ("polygamous", "asexual"):
        return np.asarray(x, dtype=float).copy()
    zs = np.broadcast_to(np.asarray(eta, dtype=float), np.shape(x))
    return np.array([rule.g(float(a), float(b), float(z)) for a, b, z in zip(x, y, zs)])


# ---------------------------------------------------------------------------
# Walk increments and noise scales
# ---------------------------------------------------------------------------


def walk_increment(rule: MatingRule, model: OffspringModel, eta: float) -> float:
    """ln g evaluated at the conditional offspring means.

    Uses the log-domain form of ``g`` when available, which keeps the
    identity ``walk_increment(eta) == eta`` exact for the canonical
    model instead of round-tripping through exp/log.
    """
    if rule.log_g is not None:
        v = rule.log_g(model.log_mean_f(eta), model.log_mean_m(eta), eta)
    else:
        gv = rule.g(model.conditional_mean_f(eta), model.conditional_mean_m(eta), eta)
        if not gv > 0.0:
            raise DegenerateModelError(f"g at the conditional means is {gv!r} at eta={eta}; ln g undefined")
        v = math.log(gv)
    if not math.isfinite(v):
        raise DegenerateModelError(f"walk increment is {v!r} at eta={eta}")
    return float(v)


def walk_increments(rule: MatingRule, model: OffspringModel, eta: np.ndarray) -> np.ndarray:
    """Vectorized walk increments over an environment array."""
    eta = np.asarray(eta, dtype=float)
    if rule.kind in ("monogamous", "polygamous", "asexual") and hasattr(model.mean_f, "log"):
        lf = np.asarray(model.mean_f.log(eta), dtype=float)
        if rule.kind == "monogamous":
            lm = np.asarray(model.mean_m.log(eta), dtype=float)
            d = np.asarray(rule.d(eta), dtype=float)
            with np.errstate(divide="ignore"):
                out = np.minimum(lf, lm + np.log(d))
        else:
            out = lf
    else:
        out = np.array([walk_increment(rule, model, float(e)) for e in eta])
    if not np.all(np.isfinite(out)):
        raise DegenerateModelError("walk increment is non-finite for some sampled environment values")
    return out


def noise_components(rule: MatingRule, model: OffspringModel, eta: float) -> tuple[float, float, float]:
    """The three components whose log forms the per-step noise scale."""
    p = 1.0 + rule.delta
    w1 = float(rule.lipschitz(eta)) ** p + float(rule.rho(eta)) ** p
    w2 = float(model.conditional_mean_f(eta)) + float(model.conditional_mean_m(eta))
    cf, cm = model.centered_abs_moments(eta, p)
    return w1, w2, cf + cm


def log_noise_scale(rule: MatingRule, model: OffspringModel, eta: float) -> float:
    """zeta = ln+ of the summed noise components at ``eta``."""
    w1, w2, w3 = noise_components(rule, model, eta)
    return max(0.0, math.log(w1 + w2 + w3))


def _log_noise_scales(rule: MatingRule, model: OffspringModel, eta: np.ndarray) -> np.ndarray:
    p = 1.0 + rule.delta
    lip = np.asarray(rule.lipschitz(eta), dtype=float)
    rho = np.asarray(rule.rho(eta), dtype=float)
    w1 = np.broadcast_to(lip**p + rho**p, eta.shape)
    w2 = np.asarray(model.mean_f(eta), dtype=float) + np.asarray(model.mean_m(eta), dtype=float)
    cf, cm = model.centered_abs_moments_array(eta, p)
    return np.maximum(0.0, np.log(w1 + w2 + cf + cm))


def analytic_sigma_xi(rule: MatingRule, env: EnvironmentModel, model: OffspringModel) -> Optional[float]:
    """Exact std of the walk increment when it is eta plus a constant.

    That holds for exponential mean maps with unit slope under any
    built-in rule (monogamous needs a constant capacity map); returns
    None when no analytic form applies and Monte Carlo is required.
    """
    if env.kind != "normal":
        return None
    if not (isinstance(model.mean_f, ExpMeanMap) and model.mean_f.scale > 0):
        return None
    if rule.kind == "monogamous":
        if not (isinstance(model.mean_m, ExpMeanMap) and model.mean_m.scale > 0):
            return None
        if not isinstance(rule.d, ConstantMap) or rule.d.value <= 0:
            return None
    elif rule.kind not in ("polygamous", "asexual"):
        return None
    return env.std


# ---------------------------------------------------------------------------
# Condition checks and audit report
# ---------------------------------------------------------------------------

_MAX_WITNESSES = 10


@dataclass
class ConditionCheck:
    """Verdict for one condition: pass, fail (with witnesses), or estimated."""

    condition: str
    verdict: str
    witnesses: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("pass", "fail", "estimated"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "fail" and not self.witnesses:
            raise ValueError("a fail verdict must carry at least one witness tuple")


@dataclass
class ConditionReport:
    """Per-condition verdicts plus the Monte Carlo moment estimates."""

    checks: dict
    moment_estimates: dict

    def verdict(self, condition: str) -> str:
        return self.checks[condition].verdict

    def witnesses(self, condition: str) -> list:
        return self.checks[condition].witnesses

    def to_dict(self) -> dict:
        return {
            "conditions": {
                name: {
                    "verdict": chk.verdict,
                    "witnesses": [[_py(v) for v in w] for w in chk.witnesses],
                    "detail": {k: _py(v) for k, v in chk.detail.items()},
                }
                for name, chk in sorted(self.checks.items())
            },
            "moment_estimates": {k: _py(v) for k, v in self.moment_estimates.items()},
        }


def _py(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _env_draws(env_model, stream, size):
    if env_model is None:
        return stream.standard_normal(size)
    return np.asarray(env_model.sample(stream, size=size), dtype=float)


def check_superadditivity(
    rule: MatingRule,
    trials: int,
    count_range: int,
    stream: np.random.Generator,
    env_model: Optional[EnvironmentModel] = None,
) -> ConditionCheck:
    """Sampled superadditivity check L(x+u, y+v, z) >= L(x,y,z) + L(u,v,z)."""
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    pts = stream.integers(0, count_range + 1, size=(trials, 4))
    z = _env_draws(env_model, stream, trials)
    x, y, u, v = (pts[:, i].astype(np.int64) for i in range(4))
    lhs = mate_array(rule, x + u, y + v, z)
    rhs = mate_array(rule, x, y, z) + mate_array(rule, u, v, z)
    bad = np.where(lhs < rhs)[0]
    witnesses = [
        (int(x[i]), int(y[i]), int(u[i]), int(v[i]), float(z[i]), int(lhs[i]), int(rhs[i]))
        for i in bad[:_MAX_WITNESSES]
    ]
    return ConditionCheck(
        condition="C1",
        verdict="fail" if bad.size else "pass",
        witnesses=witnesses,
        detail={"trials": trials, "count_range": count_range, "violations": int(bad.size)},
    )


def check_lipschitz(
    rule: MatingRule,
    trials: int,
    stream: np.random.Generator,
    env_model: Optional[EnvironmentModel] = None,
    box: float = 100.0,
) -> ConditionCheck:
    """Sampled check |g(x,y,z) - g(u,v,z)| <= lipschitz(z) (|x-u| + |y-v|)."""
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    pts = stream.uniform(0.0, box, size=(trials, 4))
    z = _env_draws(env_model, stream, trials)
    x, y, u, v = (pts[:, i] for i in range(4))
    lhs = np.abs(approximant_array(rule, x, y, z) - approximant_array(rule, u, v, z))
    lam = np.broadcast_to(np.asarray(rule.lipschitz(z), dtype=float), lhs.shape)
    rhs = lam * (np.abs(x - u) + np.abs(y - v))
    bad = np.where(lhs > rhs + 1e-12 * (1.0 + rhs))[0]
    witnesses = [
        (float(x[i]), float(y[i]), float(u[i]), float(v[i]), float(z[i]), float(lhs[i]), float(rhs[i]))
        for i in bad[:_MAX_WITNESSES]
    ]
    return ConditionCheck(
        condition="C2",
        verdict="fail" if bad.size else "pass",
        witnesses=witnesses,
        detail={"trials": trials, "box": box, "violations": int(bad.size)},
    )


def check_homogeneity(
    rule: MatingRule,
    trials: int,
    stream: np.random.Generator,
    env_model: Optional[EnvironmentModel] = None,
    box: float = 100.0,
) -> ConditionCheck:
    """Sampled positive-homogeneity check g(t x, t y, z) == t g(x, y, z)."""
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    x = stream.uniform(0.0, box, size=trials)
    y = stream.uniform(0.0, box, size=trials)
    t = stream.uniform(0.0, 10.0, size=trials)
    z = _env_draws(env_model, stream, trials)
    tg = t * approximant_array(rule, x, y, z)
    lhs = np.abs(approximant_array(rule, t * x, t * y, z) - tg)
    bad = np.where(lhs > 1e-12 * (1.0 + np.abs(tg)))[0]
    witnesses = [
        (float(x[i]), float(y[i]), float(t[i]), float(z[i]), float(lhs[i]))
        for i in bad[:_MAX_WITNESSES]
    ]
    return ConditionCheck(
        condition="C3",
        verdict="fail" if bad.size else "pass",
        witnesses=witnesses,
        detail={"trials": trials, "box": box, "violations": int(bad.size)},
    )


def check_approximation(
    rule: MatingRule,
    grid: int,
    stream: np.random.Generator,
    env_model: Optional[EnvironmentModel] = None,
    count_range: int = 1000,
) -> ConditionCheck:
    """Sampled residual check |L - g| <= rho(z) (x + y)^alpha on x + y >= 1.

    The ratio is undefined at the origin and the bound trivial there, so
    sampling is restricted to x + y >= 1.
    """
    if grid < 1:
        raise ConfigurationError("grid must be >= 1")
    x = stream.integers(0, count_range + 1, size=grid).astype(np.int64)
    y = stream.integers(0, count_range + 1, size=grid).astype(np.int64)
    y[(x + y) == 0] = 1
    z = _env_draws(env_model, stream, grid)
    resid = np.abs(mate_array(rule, x, y, z).astype(float) - approximant_array(rule, x.astype(float), y.astype(float), z))
    scale = (x + y).astype(float) ** rule.alpha
    ratio = resid / scale
    bound = np.broadcast_to(np.asarray(rule.rho(z), dtype=float), ratio.shape)
    bad = np.where(ratio > bound * (1.0 + 1e-12))[0]
    witnesses = [
        (int(x[i]), int(y[i]), float(z[i]), float(resid[i]), float(bound[i] * scale[i]))
        for i in bad[:_MAX_WITNESSES]
    ]
    return ConditionCheck(
        condition="C4",
        verdict="fail" if bad.size else "pass",
        witnesses=witnesses,
        detail={
            "grid": grid,
            "count_range": count_range,
            "violations": int(bad.size),
            "max_ratio": float(ratio.max()) if grid else 0.0,
        },
    )


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return mean, se


def audit_conditions(
    rule: MatingRule,
    env_model: EnvironmentModel,
    offspring_model: OffspringModel,
    samples: int,
    stream: np.random.Generator,
) -> ConditionReport:
    """Run every executable condition check and the moment audits.

    C1-C4 are sampled pass/fail checks with witnesses; C5 is decided
    analytically for the built-in offspring families; C6 reports Monte
    Carlo moment estimates with standard errors (finiteness itself is
    not decidable by sampling, so the verdict is ``estimated``); C7 is
    the criticality verdict |mean| <= 4 SE on the walk increment.
    """
    if samples < 100:
        raise ConfigurationError(f"audit needs samples >= 100, got {samples}")
    sampled = min(samples, 100_000)
    checks = {
        "C1": check_superadditivity(rule, sampled, 50, stream, env_model),
        "C2": check_lipschitz(rule, sampled, stream, env_model),
        "C3": check_homogeneity(rule, sampled, stream, env_model),
        "C4": check_approximation(rule, sampled, stream, env_model),
    }
    checks["C5"] = ConditionCheck(
        condition="C5",
        verdict="pass",
        detail={
            "beta": offspring_model.beta,
            "family": offspring_model.kind,
            "reason": "all conditional moments of the built-in offspring families are finite",
        },
    )

    eta = np.asarray(env_model.sample(stream, size=samples), dtype=float)
    xi = walk_increments(rule, offspring_model, eta)
    p_beta = 1.0 + offspring_model.beta
    mean_xi, se_mean = _mean_se(xi)
    centered2 = (xi - mean_xi) ** 2
    var_xi = float(centered2.mean())
    se_var = float(np.sqrt(max(float((centered2**2).mean()) - var_xi**2, 0.0) / samples))
    abs_xi, se_abs_xi = _mean_se(np.abs(xi) ** p_beta)

    # zeta needs per-eta centered moments; cap the subsample when the
    # moment order forces the series evaluation
    p = 1.0 + rule.delta
    zeta_n = samples if p == 2.0 else min(samples, 20_000)
    eta_z = eta[:zeta_n]
    zeta = _log_noise_scales(rule, offspring_model, eta_z)
    abs_zeta, se_abs_zeta = _mean_se(np.abs(zeta) ** p_beta)
    lip = np.broadcast_to(np.asarray(rule.lipschitz(eta_z), dtype=float), eta_z.shape)
    rho = np.broadcast_to(np.asarray(rule.rho(eta_z), dtype=float), eta_z.shape)
    w1 = lip**p + rho**p
    w2 = np.asarray(offspring_model.mean_f(eta_z), dtype=float) + np.asarray(offspring_model.mean_m(eta_z), dtype=float)
    cf, cm = offspring_model.centered_abs_moments_array(eta_z, p)
    w3 = cf + cm

    checks["C6"] = ConditionCheck(
        condition="C6",
        verdict="estimated",
        detail={
            "samples": samples,
            "zeta_samples": zeta_n,
            "abs_xi_moment": abs_xi,
            "abs_xi_moment_se": se_abs_xi,
            "abs_zeta_moment": abs_zeta,
            "abs_zeta_moment_se": se_abs_zeta,
            "moment_order": p_beta,
        },
    )

    critical = abs(mean_xi) <= 4.0 * se_mean
    checks["C7"] = ConditionCheck(
        condition="C7",
        verdict="pass" if critical else "fail",
        witnesses=[] if critical else [(mean_xi, 4.0 * se_mean)],
        detail={"mean_xi": mean_xi, "se": se_mean},
    )

    moments = {
        "mean_xi": mean_xi,
        "mean_xi_se": se_mean,
        "var_xi": var_xi,
        "var_xi_se": se_var,
        "abs_xi_moment": abs_xi,
        "abs_xi_moment_se": se_abs_xi,
        "abs_zeta_moment": abs_zeta,
        "abs_zeta_moment_se": se_abs_zeta,
        "omega1_mean": float(w1.mean()),
        "omega2_mean": float(w2.mean()),
        "omega3_mean": float(w3.mean()),
        "moment_order": p_beta,
    }
    return ConditionReport(checks=checks, moment_estimates=moments)
