"""Signal generators, correlated-noise sampling and Monte Carlo risk estimation.

Generators place deterministic extremal signals inside a Besov ball: a
single-shell dense signal at the large/small-signal boundary level, a
single-shell spike signal at the sparse/highly-sparse boundary level, a
multi-level spread signal, and the multi-level near-critical configuration.
Every generated signal satisfies membership in its declared ball.

All randomness is driven by integer seeds through numpy SeedSequence;
replicate streams derive from (seed, replicate index), so results are
reproducible and independent of any execution schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky_banded

from .errors import ConfigurationError, ValidationError
from .model import (BesovBall, HyperParams, MultiresSequence, NoiseSpec, Zone,
                    besov_norm, classify_zone, shell_radius)
from .penalty import PenaltyConfig, m_prime, nu_schedule
from .estimator import fit_multiscale, ideal_risk, oracle_constant, per_level_sse
from .rates import j_plus, j_star

SIGNAL_KINDS = ("shell_dense", "shell_sparse", "besov_spread", "critical_prior", "zero")

_JMAX_CAP = 20


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SignalSpec:
    """Description of a deterministic test signal inside a Besov ball.

    epsilon is the nominal noise scale used to locate the boundary levels
    j_star / j_plus; jmax defaults to three levels past the relevant peak,
    capped at 20.  rho1/rho2 choose the level window of the near-critical
    construction and xi0 anchors its spike magnitude.
    """

    kind: str
    gamma: HyperParams
    radius: float
    epsilon: float
    jmax: int | None = None
    placement: str = "even"
    xi0: float = 1.0
    rho1: float = 1.05
    rho2: float = 1.25

    def __post_init__(self):
        _require(self.kind in SIGNAL_KINDS,
                 f"unknown signal kind {self.kind!r}; expected one of {SIGNAL_KINDS}")
        _require(self.radius > 0, f"radius must be > 0, got {self.radius}")
        _require(0 < self.epsilon < self.radius,
                 f"need 0 < epsilon < radius, got epsilon={self.epsilon}, radius={self.radius}")
        _require(self.placement in ("even", "head"),
                 f"placement must be 'even' or 'head', got {self.placement!r}")
        _require(self.xi0 > 0, f"xi0 must be > 0, got {self.xi0}")
        if self.jmax is not None:
            _require(isinstance(self.jmax, int) and 1 <= self.jmax <= _JMAX_CAP,
                     f"jmax must be an integer in 1..{_JMAX_CAP}, got {self.jmax}")
        if self.kind == "critical_prior":
            _require(1.0 < self.rho1 < self.rho2,
                     f"need 1 < rho1 < rho2, got rho1={self.rho1}, rho2={self.rho2}")
            if self.gamma.beta > 0:
                cap = (2.0 * self.gamma.beta + 1.0) / (2.0 * self.gamma.beta)
                _require(self.rho2 < cap,
                         f"rho2 must be < (2*beta+1)/(2*beta) = {cap:.4f}, got {self.rho2}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma.to_dict(),
                "radius": self.radius, "epsilon": self.epsilon, "jmax": self.jmax,
                "placement": self.placement, "xi0": self.xi0,
                "rho1": self.rho1, "rho2": self.rho2}


def _peak_level(spec: SignalSpec) -> float:
    if spec.kind in ("shell_sparse", "critical_prior"):
        return j_plus(spec.gamma, spec.radius, spec.epsilon)
    return j_star(spec.gamma, spec.radius, spec.epsilon)


def resolve_jmax(spec: SignalSpec) -> int:
    """Stored depth: ceil of the relevant peak plus 3, capped at 20."""
    if spec.jmax is not None:
        return spec.jmax
    if spec.kind == "critical_prior":
        # the level window itself may extend past j_plus + 3
        js = _peak_level(spec)
        hi = int(math.ceil(spec.rho2 * _j_star_of(spec)))
        return min(max(int(math.ceil(js)) + 3, hi), _JMAX_CAP)
    return min(int(math.ceil(_peak_level(spec))) + 3, _JMAX_CAP)


def _j_star_of(spec: SignalSpec) -> float:
    return j_star(spec.gamma, spec.radius, spec.epsilon)


def _spike_indices(n: int, m: int, placement: str) -> np.ndarray:
    if placement == "head":
        return np.arange(m)
    return np.floor(np.arange(m) * (n / m)).astype(int)


def _fit_into_ball(levels: list, ball: BesovBall) -> list:
    # Rescale (by at most a few ulps in the intended case) until the weighted
    # norm is <= the radius, so membership holds under exact comparison.
    seq = MultiresSequence(j0=1, levels=tuple(levels))
    norm = besov_norm(seq, ball.gamma)
    if norm == 0.0:
        return levels
    factor = ball.radius / norm
    for _ in range(64):
        scaled = [factor * arr for arr in levels]
        if besov_norm(MultiresSequence(j0=1, levels=tuple(scaled)), ball.gamma) <= ball.radius:
            return scaled
        factor *= 1.0 - 4.0 * np.finfo(float).eps
    raise ConfigurationError("could not normalize signal into the ball")


def make_shell_signal(spec: SignalSpec) -> MultiresSequence:
    """Single-shell extremal signal at the rounded peak level.

    shell_dense spreads equal magnitudes over all n_j coordinates of level
    j = round(j_star); shell_sparse places m = max(1, round(n_j * eta_j^p))
    equal spikes at level j = round(j_plus), eta_j = (C_j/eps_j) * n_j^(-1/p).
    Either way ||theta_j||_p = C_j, so the ball constraint is met with
    equality.
    """
    _require(spec.kind in ("shell_dense", "shell_sparse"),
             f"make_shell_signal handles shell_dense/shell_sparse, got {spec.kind!r}")
    gamma = spec.gamma.validate()
    if spec.kind == "shell_sparse":
        _require(gamma.p < 2, "shell_sparse requires p < 2")
    ball = BesovBall(gamma=gamma, radius=spec.radius)
    jmax = resolve_jmax(spec)
    j = _round_half_up(_peak_level(spec))
    j = max(j, 1)
    if j > jmax:
        raise ConfigurationError(
            f"peak level {j} exceeds jmax={jmax}; increase jmax or epsilon")
    n = 2 ** j
    c_j = shell_radius(ball, j)
    levels = [np.zeros(2 ** jj) for jj in range(1, jmax + 1)]
    if spec.kind == "shell_dense":
        m = n
        idx = np.arange(n)
    else:
        eps_j = spec.epsilon * 2.0 ** (gamma.beta * j)
        eta_p = (c_j / eps_j) ** gamma.p / n
        m = min(max(1, _round_half_up(n * eta_p)), n)
        idx = _spike_indices(n, m, spec.placement)
    levels[j - 1][idx] = c_j * m ** (-1.0 / gamma.p)
    levels = _fit_into_ball(levels, ball)
    return MultiresSequence(j0=1, levels=tuple(levels))


def make_critical_signal(spec: SignalSpec) -> MultiresSequence:
    """Multi-level near-critical signal on levels rho1*j_star < j <= rho2*j_star.

    Per level, n0_j coordinates carry magnitude
    delta0_j = c0 * xi0 * eps_j * sqrt(log2(C/eps)) with
    n0_j = floor(c1 * (C/eps)^p * 2^(-2*beta*j) * (jhi-jlo)^(-p/q)
                 * log2(C/eps)^(-p/2)); the constants start at c0 = c1 = 1
    and the whole signal is scaled down until membership holds.
    """
    _require(spec.kind == "critical_prior",
             f"make_critical_signal requires kind 'critical_prior', got {spec.kind!r}")
    gamma = spec.gamma.validate()
    _require(classify_zone(gamma) is Zone.CRITICAL,
             "critical_prior requires hyper-parameters in the critical zone")
    ball = BesovBall(gamma=gamma, radius=spec.radius)
    js = _j_star_of(spec)
    j_lo = int(math.floor(spec.rho1 * js))
    j_hi = int(math.ceil(spec.rho2 * js))
    jmax = resolve_jmax(spec)
    if j_hi > jmax:
        raise ConfigurationError(f"level window top {j_hi} exceeds jmax={jmax}")
    if j_hi <= j_lo:
        j_hi = j_lo + 1
    span = j_hi - j_lo
    snr = spec.radius / spec.epsilon
    log2_snr = math.log2(snr)
    levels = [np.zeros(2 ** jj) for jj in range(1, jmax + 1)]
    placed = 0
    for j in range(j_lo + 1, j_hi + 1):
        n_j = 2 ** j
        n0 = int(math.floor(snr ** gamma.p * 2.0 ** (-2.0 * gamma.beta * j)
                            * span ** (-gamma.p / gamma.q) * log2_snr ** (-gamma.p / 2.0)))
        n0 = min(n0, n_j)
        if n0 < 1:
            continue
        delta0 = spec.xi0 * spec.epsilon * 2.0 ** (gamma.beta * j) * math.sqrt(log2_snr)
        levels[j - 1][_spike_indices(n_j, n0, spec.placement)] = delta0
        placed += n0
    if placed == 0:
        raise ConfigurationError(
            "critical construction infeasible: no level admits a spike "
            f"(C/eps={snr:.3g}, window {j_lo + 1}..{j_hi})")
    levels = _fit_into_ball(levels, ball)
    return MultiresSequence(j0=1, levels=tuple(levels))


def make_spread_signal(spec: SignalSpec) -> MultiresSequence:
    """Besov-spread signal: every level filled evenly with an equal share
    of the ball budget, so the constraint is met with equality."""
    _require(spec.kind == "besov_spread",
             f"make_spread_signal requires kind 'besov_spread', got {spec.kind!r}")
    gamma = spec.gamma.validate()
    ball = BesovBall(gamma=gamma, radius=spec.radius)
    jmax = resolve_jmax(spec)
    n_levels = jmax
    levels = []
    for j in range(1, jmax + 1):
        budget = shell_radius(ball, j) * n_levels ** (-1.0 / gamma.q)
        levels.append(np.full(2 ** j, budget * (2 ** j) ** (-1.0 / gamma.p)))
    levels = _fit_into_ball(levels, ball)
    return MultiresSequence(j0=1, levels=tuple(levels))


def make_signal(spec: SignalSpec) -> MultiresSequence:
    """Dispatch on spec.kind; 'zero' yields the all-zero sequence."""
    if spec.kind == "zero":
        return MultiresSequence.zeros(1, resolve_jmax(spec))
    if spec.kind in ("shell_dense", "shell_sparse"):
        return make_shell_signal(spec)
    if spec.kind == "critical_prior":
        return make_critical_signal(spec)
    return make_spread_signal(spec)


# -- noise sampling -----------------------------------------------------------

def _tridiagonal_factor(n: int, rho: float) -> np.ndarray:
    """Banded Cholesky factor of the unit-diagonal tridiagonal covariance."""
    ab = np.vstack([np.ones(n), np.full(n, rho)])
    ab[1, -1] = 0.0
    return cholesky_banded(ab, lower=True)


def _sample_level(rng: np.random.Generator, noise: NoiseSpec, n: int) -> np.ndarray:
    g = rng.standard_normal(n)
    if noise.covariance == "identity" or n == 1:
        return g
    lo = _tridiagonal_factor(n, noise.rho)
    z = lo[0] * g
    z[1:] += lo[1, :-1] * g[:-1]
    return z


def _sample_noise_with(rng: np.random.Generator, noise: NoiseSpec,
                       jmax: int, j0: int = 1) -> MultiresSequence:
    levels = []
    for j in range(j0, jmax + 1):
        levels.append(noise.epsilon_at(j) * _sample_level(rng, noise, 2 ** j))
    return MultiresSequence(j0=j0, levels=tuple(levels))


def sample_noise(noise: NoiseSpec, jmax: int, rng_seed: int, j0: int = 1) -> MultiresSequence:
    """Draw eps_j * z_j with z_j ~ N(0, Sigma_j), independent across levels.

    The tridiagonal family is sampled through its (bidiagonal) Cholesky
    factor, an exact factorization at any level size.  Deterministic given
    the seed.
    """
    _require(jmax >= j0, f"jmax must be >= j0, got jmax={jmax}, j0={j0}")
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    return _sample_noise_with(rng, noise, jmax, j0)


# -- Monte Carlo risk ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class McResult:
    """Replicated squared-error summary for one configuration."""

    replicates: int
    mean_sse: float
    stderr_sse: float
    per_level_sse: np.ndarray
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"replicates": self.replicates, "mean_sse": self.mean_sse,
                "stderr_sse": self.stderr_sse,
                "per_level_sse": [float(v) for v in self.per_level_sse],
                "config": self.config}


def _replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(rep,)))


def mc_risk_for_truth(truth: MultiresSequence, cfg: PenaltyConfig, noise: NoiseSpec,
                      replicates: int, seed: int, config_echo: dict | None = None) -> McResult:
    """Monte Carlo risk at a fixed truth: noise draw -> fit -> squared error."""
    _require(replicates >= 2, f"replicates must be >= 2, got {replicates}")
    sses = np.empty(replicates)
    per_level = np.zeros(truth.jmax - truth.j0 + 1)
    for rep in range(replicates):
        rng = _replicate_rng(seed, rep)
        y = truth.add(_sample_noise_with(rng, noise, truth.jmax, truth.j0))
        fit = fit_multiscale(y, cfg, noise)
        level_sse = per_level_sse(fit, truth)
        per_level += level_sse
        sses[rep] = level_sse.sum()
    mean = float(sses.mean())
    stderr = float(sses.std(ddof=1) / math.sqrt(replicates))
    return McResult(replicates=replicates, mean_sse=mean, stderr_sse=stderr,
                    per_level_sse=per_level / replicates,
                    config=config_echo if config_echo is not None else {})


def mc_risk(spec: SignalSpec, cfg: PenaltyConfig, noise: NoiseSpec,
            replicates: int, seed: int) -> McResult:
    """Monte Carlo risk with the truth generated once from spec.

    Replicate r uses the RNG stream derived from (seed, r), so identical
    seeds reproduce the result bit for bit and replicates may be evaluated
    in any order.
    """
    truth = make_signal(spec)
    echo = {"signal": spec.to_dict(), "penalty": cfg.to_dict(),
            "noise": noise.to_dict(), "replicates": replicates, "seed": seed}
    return mc_risk_for_truth(truth, cfg, noise, replicates, seed, config_echo=echo)


def fit_rate_exponent(results) -> tuple:
    """Least squares of log2(mean_sse) on log2(epsilon): (slope, intercept, r_hat).

    Needs at least 4 distinct epsilon values spanning at least 2 octaves;
    r_hat = slope / 2 estimates the rate exponent.
    """
    pts = [(float(e), float(m)) for e, m in results]
    eps = np.array([e for e, _ in pts])
    sse = np.array([m for _, m in pts])
    _require(np.unique(eps).size >= 4, "need at least 4 distinct epsilon values")
    _require(bool(np.all(eps > 0)), "epsilon values must be positive")
    _require(eps.max() / eps.min() >= 4.0, "epsilon grid must span at least 2 octaves")
    _require(bool(np.all(sse > 0)), "mean_sse values must be positive to take logs")
    slope, intercept = np.polyfit(np.log2(eps), np.log2(sse), 1)
    return float(slope), float(intercept), float(slope) / 2.0


def oracle_inequality_check(spec: SignalSpec, cfg: PenaltyConfig, noise: NoiseSpec,
                            replicates: int, seed: int) -> tuple:
    """Monte Carlo check of the risk bound; returns (lhs, rhs, ratio).

    lhs is the Monte Carlo mean of ||theta_hat - theta||^2; rhs is
    D * [2 * sum_j xi1 * M'_{n_j} eps_j^2 + sum_j ideal_risk_j] over the
    stored levels.  ratio = lhs / rhs is expected to be <= 1.
    """
    truth = make_signal(spec)
    mc = mc_risk_for_truth(truth, cfg, noise, replicates, seed)
    rhs = 0.0
    for j, theta_j in truth.iter_levels():
        nu_j = nu_schedule(cfg, noise.epsilon, j)
        eps_j = noise.epsilon_at(j)
        rhs += 2.0 * cfg.xi1 * m_prime(cfg, 2 ** j, nu_j) * eps_j ** 2
        rhs += ideal_risk(theta_j, cfg, eps_j, nu_j)
    rhs *= oracle_constant(cfg.zeta)
    return mc.mean_sse, rhs, mc.mean_sse / rhs
