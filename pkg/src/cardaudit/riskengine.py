"""Sequential risk measurement: the ALPHA supermartingale over samples drawn
without replacement, with pluggable bet estimators.

The test tracks T_j = prod_{i<=j} [x_i*eta_i/mu_i + (u-x_i)(u-eta_i)/(u-mu_i)]/u
in the log domain, where mu_j is the mean the remaining population must have
for the null (population mean <= 1/2) to hold.  T is a nonnegative
supermartingale under the null, so p = min(1, 1/max_j T_j) is a sequentially
valid p-value and an assertion certifies as soon as T >= 1/alpha.

Estimators for eta:

* shrink_trunc: a truncated shrinkage estimate anchored at eta0 with weight
  d, kept above the null mean by a guardrail c/sqrt(d+j) and (optionally)
  below the upper bound by the mirrored guardrail, so early draws can
  neither kill the test nor overcommit it.
* fixed: a constant bet.
* cobra: the bet maximizing expected log growth under assumed rates of
  2-vote and 1-vote overstatements, for comparison audits; optionally
  adaptive, re-estimating the rates from the sample as it grows.

Trajectories are computed vectorized over a whole draw order; the per-draw
scalar operations (null_mean, alpha_step) use the same formulas, and the
live audit service replays trajectories through the identical code path so
simulation, live audits and offline replay agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .assorters import (
    Assertion,
    AssertionSet,
    assorter_margin,
    mismatch_upper,
    overstatement_upper,
    overstatement_value,
    plurality_assorter,
)
from .electiondata import LinkedInstance, Vote
from .margins import MarginReport

_ETA_EPS = 1e-12


class AuditSetupError(ValueError):
    """The audit cannot start (degenerate margin, bad config)."""


# ---------------------------------------------------------------------------
# Estimator configurations


@dataclass(frozen=True)
class ShrinkTrunc:
    """Truncated shrinkage estimator config.

    ``c`` defaults to 0.1*(u - 1/2) at evaluation time; the mirror
    guardrail uses the same scale.
    """

    eta0: float
    d: float = 100.0
    c: Optional[float] = None
    mirror_guardrail: bool = True

    def scale(self, u: float) -> float:
        return self.c if self.c is not None else 0.1 * (u - 0.5)


@dataclass(frozen=True)
class FixedEta:
    eta: float


@dataclass(frozen=True)
class Cobra:
    """COBRA-style bet for comparison audits.

    ``p2``/``p1`` are the assumed rates of 2-vote and 1-vote
    overstatements.  With ``adapt`` set, the rates are re-estimated each
    draw as (d*p + observed count)/(d + j), which lets the bet recover when
    the true error rates differ by orders of magnitude from the assumption.
    """

    p2: float = 1e-5
    p1: float = 0.0
    adapt: bool = False
    d: float = 100.0


EstimatorConfig = Union[ShrinkTrunc, FixedEta, Cobra]


def default_mismatch_eta0(v_prime: float) -> float:
    """Initial bet 0.999/(2-2v'), an assumed mismatch rate of 10^-3."""
    return 0.999 / (2 - 2 * v_prime)


def default_mismatch_estimator(v_prime: float) -> ShrinkTrunc:
    return ShrinkTrunc(eta0=default_mismatch_eta0(v_prime))


# ---------------------------------------------------------------------------
# Scalar state and per-draw operations


@dataclass
class TestState:
    """ALPHA state after j draws: log T, running sum S, and the population facts."""

    N: int
    u: float
    t: float = 0.5
    j: int = 0
    S: float = 0.0
    log_t_stat: float = 0.0  # log T_j
    log_t_max: float = 0.0  # running max of log T (for the running-min p)
    dead: bool = False  # mu exceeded u: certification impossible

    @property
    def p_value(self) -> float:
        """Sequential p-value: running minimum of min(1, 1/T)."""
        return min(1.0, math.exp(-self.log_t_max))

    @property
    def p_current(self) -> float:
        """min(1, 1/T_j) at the current draw count (may exceed p_value)."""
        if self.dead:
            return 1.0
        return min(1.0, math.exp(-self.log_t_stat))

    def certified(self, alpha: float) -> bool:
        return self.p_value <= alpha


def null_mean(state: TestState) -> float:
    """Mean the remaining population must have for the null to hold.

    Negative means the null is impossible (certify immediately); >= u means
    certification is impossible without a full count.
    """
    if state.j >= state.N:
        raise AuditSetupError("population exhausted")
    return (state.N * state.t - state.S) / (state.N - state.j)


def eta_shrink_trunc(state: TestState, cfg: ShrinkTrunc) -> float:
    """Shrinkage estimate with guardrails, clamped into (mu_j, u)."""
    u = state.u
    mu = null_mean(state)
    e = (cfg.d * cfg.eta0 + state.S) / (cfg.d + state.j)
    offset = cfg.scale(u) / math.sqrt(cfg.d + state.j)
    lo = mu + offset
    hi = (u - offset) if cfg.mirror_guardrail else u * (1 - _ETA_EPS)
    if lo > hi:
        return (mu + u) / 2
    eta = min(max(e, lo), hi)
    return min(max(eta, mu), u * (1 - _ETA_EPS))


def cobra_lambda(p2: float, p1: float, u: float, mu: float = 0.5) -> float:
    """Betting fraction maximizing expected log growth under assumed rates.

    The assumed population puts mass p2 on a 2-vote overstatement (value 0),
    p1 on a 1-vote overstatement (value u/4), and the rest on a match
    (value u/2), with null mean ``mu``.  The objective
    sum_k p_k * log(1 + lambda*(x_k - mu)) is concave in lambda on
    [0, 1/mu]; deterministic bisection on its derivative to relative
    tolerance < 1e-9.
    """
    x2, x1, xm = 0.0, u / 4, u / 2
    pm = 1.0 - p1 - p2
    if pm < 0:
        raise AuditSetupError("p1 + p2 > 1")

    def deriv(lam):
        return (
            p2 * (x2 - mu) / (1 + lam * (x2 - mu))
            + p1 * (x1 - mu) / (1 + lam * (x1 - mu))
            + pm * (xm - mu) / (1 + lam * (xm - mu))
        )

    lo, hi = 0.0, (1 - 1e-12) / mu
    if deriv(lo) <= 0:
        return 0.0
    if deriv(hi) >= 0:
        return hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if deriv(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def eta_cobra(cfg: Cobra, u_assorter: float, nu: float) -> float:
    """Fixed COBRA bet eta for an overstatement assorter with margin nu."""
    if nu <= 0:
        raise AuditSetupError(f"assorter margin {nu} <= 0")
    u_b = 2 * u_assorter / (2 * u_assorter - nu)
    mu = 0.5
    lam = cobra_lambda(cfg.p2, cfg.p1, u_b, mu)
    return mu + lam * mu * (u_b - mu)


def alpha_step(state: TestState, x: float, eta: float) -> TestState:
    """One ALPHA update; mutates and returns the state.

    Precondition: x in [0, u].  mu <= 0 certifies immediately (log T ->
    +inf); mu >= u marks the state dead (p stays 1, audit runs to a full
    count).
    """
    u = state.u
    if not (0 <= x <= u + 1e-12):
        raise AuditSetupError(f"observed value {x} outside [0, {u}]")
    mu = null_mean(state)
    if mu <= 0:
        state.log_t_stat = math.inf
    elif mu >= u or state.dead:
        state.dead = True
        state.log_t_stat = -math.inf
    else:
        eta = min(max(eta, mu), u)
        mult = (x * eta / mu + (u - x) * (u - eta) / (u - mu)) / u
        state.log_t_stat += math.log(mult) if mult > 0 else -math.inf
    state.S += x
    state.j += 1
    state.log_t_max = max(state.log_t_max, state.log_t_stat)
    return state


def exact_multiplier(x: Fraction, eta: Fraction, mu: Fraction, u: Fraction) -> Fraction:
    """The ALPHA multiplier in exact rational arithmetic (for validity checks)."""
    x, eta, mu, u = map(Fraction, (x, eta, mu, u))
    return (x * eta / mu + (u - x) * (u - eta) / (u - mu)) / u


# ---------------------------------------------------------------------------
# Vectorized trajectories


def _null_mean_array(x: np.ndarray, N: int, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    j = np.arange(len(x), dtype=np.float64)
    S = np.concatenate(([0.0], np.cumsum(x)[:-1]))
    mu = (N * t - S) / (N - j)
    return j, S, mu


def _eta_array(
    x: np.ndarray,
    j: np.ndarray,
    S: np.ndarray,
    mu: np.ndarray,
    u: float,
    estimator: EstimatorConfig,
    nu: Optional[float],
) -> np.ndarray:
    if isinstance(estimator, FixedEta):
        return np.full_like(mu, estimator.eta)
    if isinstance(estimator, ShrinkTrunc):
        cfg = estimator
        e = (cfg.d * cfg.eta0 + S) / (cfg.d + j)
        offset = cfg.scale(u) / np.sqrt(cfg.d + j)
        lo = mu + offset
        hi = (u - offset) if cfg.mirror_guardrail else np.full_like(mu, u * (1 - _ETA_EPS))
        eta = np.clip(e, lo, np.maximum(lo, hi))
        eta = np.where(lo > hi, (mu + u) / 2, eta)
        return np.clip(eta, mu, u * (1 - _ETA_EPS))
    if isinstance(estimator, Cobra):
        cfg = estimator
        if nu is None:
            raise AuditSetupError("COBRA estimator needs the assorter margin nu")
        u_b = u  # trajectory already works on the overstatement-assorter scale
        if not cfg.adapt:
            lam = cobra_lambda(cfg.p2, cfg.p1, u_b, 0.5)
            return np.full_like(mu, 0.5 + lam * 0.5 * (u_b - 0.5))
        # running counts of 2-/1-vote overstatements among previous draws
        tol = u_b / 16
        n2 = np.concatenate(([0.0], np.cumsum(np.abs(x) < tol)[:-1]))
        n1 = np.concatenate(([0.0], np.cumsum(np.abs(x - u_b / 4) < tol)[:-1]))
        p2 = (cfg.d * cfg.p2 + n2) / (cfg.d + j)
        p1 = (cfg.d * cfg.p1 + n1) / (cfg.d + j)
        lam = _cobra_lambda_vec(p2, p1, u_b, 0.5)
        return 0.5 + lam * 0.5 * (u_b - 0.5)
    raise AuditSetupError(f"unknown estimator {estimator!r}")


def _cobra_lambda_vec(p2: np.ndarray, p1: np.ndarray, u: float, mu: float) -> np.ndarray:
    """Vectorized bisection for the COBRA bet, one lambda per draw index."""
    x2, x1, xm = 0.0, u / 4, u / 2
    pm = 1.0 - p1 - p2

    def deriv(lam):
        return (
            p2 * (x2 - mu) / (1 + lam * (x2 - mu))
            + p1 * (x1 - mu) / (1 + lam * (x1 - mu))
            + pm * (xm - mu) / (1 + lam * (xm - mu))
        )

    lo = np.zeros_like(p2)
    hi = np.full_like(p2, (1 - 1e-12) / mu)
    at_zero = deriv(lo) <= 0
    at_max = deriv(hi) >= 0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        up = deriv(mid) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    lam = 0.5 * (lo + hi)
    lam[at_zero] = 0.0
    lam[at_max] = (1 - 1e-12) / mu
    return lam


@dataclass
class Trajectory:
    """Per-draw diagnostics of one assertion over a full draw order."""

    log_t: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    x: np.ndarray

    def p_running(self) -> np.ndarray:
        """Running-minimum sequential p-value after each draw."""
        return np.minimum(1.0, np.exp(-np.maximum.accumulate(self.log_t)))

    def stopping_index(self, alpha: float) -> Optional[int]:
        """Number of draws at first certification, or None."""
        hits = self.log_t >= -math.log(alpha)
        idx = int(np.argmax(hits))
        return idx + 1 if hits[idx] else None


def alpha_trajectory(
    x: np.ndarray,
    N: int,
    u: float,
    estimator: EstimatorConfig,
    t: float = 0.5,
    nu: Optional[float] = None,
) -> Trajectory:
    """ALPHA log-T trajectory over an entire draw order.

    Produces exactly the same floats as iterating :func:`alpha_step` with
    the matching per-draw eta, since the cumulative log sum follows the
    same operation order.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) > N:
        raise AuditSetupError("more draws than population members")
    j, S, mu = _null_mean_array(x, N, t)
    eta = _eta_array(x, j, S, mu, u, estimator, nu)
    eta = np.clip(eta, np.minimum(mu, u), u)
    ok = (mu > 0) & (mu < u)
    mu_safe = np.where(ok, mu, 0.5 * u)
    eta_safe = np.where(ok, eta, 0.5 * u)
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = (x * eta_safe / mu_safe + (u - x) * (u - eta_safe) / (u - mu_safe)) / u
        log_terms = np.where(mult > 0, np.log(np.maximum(mult, 1e-300)), -np.inf)
    log_terms = np.where(mu <= 0, np.inf, log_terms)
    # certification becomes impossible from the first mu >= u onward
    dead = np.maximum.accumulate(mu >= u)
    log_t = np.cumsum(np.where(dead, 0.0, log_terms))
    log_t = np.where(dead, -np.inf, log_t)
    return Trajectory(log_t=log_t, eta=eta, mu=mu, x=x)


# ---------------------------------------------------------------------------
# Sampling and whole-audit runs


def sample_plan(seed: int, N: int) -> np.ndarray:
    """Deterministic sampling order: a PCG64 (numpy default_rng) shuffle of [0, N).

    The generator and seed are part of the audit record; the same seed
    yields the same permutation within a release.
    """
    return np.random.default_rng(seed).permutation(N)


@dataclass(frozen=True)
class AuditConfig:
    alpha: float = 0.05
    seed: int = 0
    max_draws: Optional[int] = None  # default: N (full count)

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise AuditSetupError(f"alpha={self.alpha} outside (0, 1)")


@dataclass(frozen=True)
class AuditAssorterSpec:
    """One assertion prepared for an audit run.

    ``values[i]`` is the value the assertion's observed assorter takes on
    canonical card i, given the true ballot votes; ``u`` is its upper
    bound and ``nu`` the reported-CVR assorter margin (where defined).
    """

    label: str
    u: float
    values: np.ndarray
    estimator: EstimatorConfig
    nu: Optional[float] = None


@dataclass
class AssertionOutcome:
    label: str
    certified: bool
    n_draws_to_certify: Optional[int]
    p_value: float


@dataclass
class AuditResult:
    decision: str  # "certified" | "full_count"
    n_draws: int
    assertions: list[AssertionOutcome]
    p_trajectory: Optional[list[float]] = None
    permutation: Optional[np.ndarray] = None


def run_audit(
    instance_size: int,
    specs: Sequence[AuditAssorterSpec],
    config: AuditConfig,
    record_trajectory: bool = True,
) -> AuditResult:
    """Run one full audit: draw in sample_plan order until every assertion
    certifies or the draw budget (default N) is spent.

    All assertions share one sample; each card's values feed every
    assertion; the audit's sample size is the draw count at which the last
    assertion certifies.
    """
    if not specs:
        raise AuditSetupError("no assertions to audit")
    N = instance_size
    max_draws = config.max_draws if config.max_draws is not None else N
    if max_draws > N:
        raise AuditSetupError("max_draws exceeds population size")
    perm = sample_plan(config.seed, N)
    draws = perm[:max_draws]

    trajectories = []
    for spec in specs:
        if spec.nu is not None and spec.nu <= 0:
            raise AuditSetupError(f"assertion {spec.label!r} has margin {spec.nu} <= 0; audit cannot certify")
        trajectories.append(
            alpha_trajectory(spec.values[draws], N, spec.u, spec.estimator, nu=spec.nu)
        )

    alpha = config.alpha
    outcomes = []
    stop_at = 0
    all_certified = True
    for spec, traj in zip(specs, trajectories):
        idx = traj.stopping_index(alpha)
        p_run = traj.p_running()
        if idx is None:
            all_certified = False
            outcomes.append(AssertionOutcome(spec.label, False, None, float(p_run[-1])))
        else:
            stop_at = max(stop_at, idx)
            outcomes.append(AssertionOutcome(spec.label, True, idx, float(p_run[idx - 1])))

    if all_certified:
        decision, n_draws = "certified", stop_at
    else:
        decision, n_draws = "full_count", max_draws

    p_traj = None
    if record_trajectory:
        per_assertion = np.stack([t.p_running() for t in trajectories])
        p_traj = list(np.max(per_assertion, axis=0)[:n_draws])
    return AuditResult(
        decision=decision,
        n_draws=n_draws,
        assertions=outcomes,
        p_trajectory=p_traj,
        permutation=perm,
    )


# ---------------------------------------------------------------------------
# Builders: LinkedInstance + method -> audit assorter specs


def mismatch_audit_spec(
    instance: LinkedInstance,
    margin: MarginReport,
    estimator: Optional[EstimatorConfig] = None,
) -> AuditAssorterSpec:
    """Prepare the mismatch audit of a linked instance against a margin bound."""
    if margin.kind not in ("exact", "lower_bound"):
        raise AuditSetupError(f"margin kind {margin.kind!r} cannot back an audit")
    if margin.V <= 0:
        raise AuditSetupError("V- = 0: mismatch audit cannot certify")
    v_prime = float(margin.v)
    u_c = float(mismatch_upper(Fraction(margin.V, margin.N)))
    if estimator is None:
        estimator = default_mismatch_estimator(v_prime)
    values = np.array([u_c if b == c else 0.0 for _, b, c in instance.pairs])
    return AuditAssorterSpec(
        label=f"mismatch rate < {margin.V}/{margin.N}",
        u=u_c,
        values=values,
        estimator=estimator,
        nu=2 * u_c - 1,  # mismatch-assorter margin on the CVRs (every card matches)
    )


def comparison_audit_specs(
    instance: LinkedInstance,
    winner: str,
    losers: Sequence[str],
    estimator: Optional[EstimatorConfig] = None,
) -> list[AuditAssorterSpec]:
    """Prepare card-level comparison audits of winner-vs-loser assertions."""
    if estimator is None:
        estimator = Cobra(adapt=True)
    specs = []
    for loser in losers:
        a = plurality_assorter(winner, loser)
        cvr_vals = [a(c) for _, _, c in instance.pairs]
        nu = assorter_margin(cvr_vals)
        if nu <= 0:
            raise AuditSetupError(f"assertion {a.label!r} has margin {nu} <= 0 on the CVRs")
        u_b = float(overstatement_upper(a, nu))
        values = np.array(
            [float(overstatement_value(b, c, a, nu).value) for _, b, c in instance.pairs]
        )
        specs.append(
            AuditAssorterSpec(label=a.label, u=u_b, values=values, estimator=estimator, nu=float(nu))
        )
    return specs


def assertion_audit_specs(
    instance: LinkedInstance,
    assertions: AssertionSet,
    estimator: Optional[EstimatorConfig] = None,
) -> list[AuditAssorterSpec]:
    """Prepare comparison audits for a set of IRV assertion assorters."""
    if estimator is None:
        estimator = Cobra(adapt=True)
    specs = []
    for assertion in assertions:
        a = assertion.assorter
        cvr_vals = [a(c) for _, _, c in instance.pairs]
        nu = assorter_margin(cvr_vals)
        if nu <= 0:
            raise AuditSetupError(f"{assertion.describe()} has margin {nu} <= 0 on the CVRs")
        u_b = float(overstatement_upper(a, nu))
        values = np.array(
            [float(overstatement_value(b, c, a, nu).value) for _, b, c in instance.pairs]
        )
        specs.append(
            AuditAssorterSpec(
                label=assertion.describe(), u=u_b, values=values, estimator=estimator, nu=float(nu)
            )
        )
    return specs
