"""Domain types for the multiresolution Gaussian sequence model.

Observations live on dyadic levels j >= j0 with n_j = 2^j coefficients per
level and level noise scale eps_j = epsilon * 2^(beta*j).  The exponent
beta >= 0 measures how strongly an ill-posed operator inflates fine-scale
noise (beta = 0 is direct estimation).  Signal classes are Besov balls of
coefficient sequences, indexed by smoothness alpha, norm index p, fine
index q and radius C.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError

# Absolute tolerance for detecting the measure-zero critical manifold
# alpha = (2*beta + 1) * (1/p - 1/2).
CRITICAL_ZONE_TOL = 1e-12


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


class Zone(Enum):
    """Rate regime of a hyper-parameter vector."""

    DENSE = "Dense"
    SPARSE = "Sparse"
    CRITICAL = "Critical"
    INVALID = "Invalid"


@dataclass(frozen=True)
class HyperParams:
    """Besov smoothness / ill-posedness parameter vector (alpha, p, q, beta).

    Construction only checks field domains (positivity, finiteness), so that
    vectors violating the compactness or rate hypotheses remain representable
    and classify as Zone.INVALID.  Use :meth:`validate` to enforce the full
    hypotheses as a typed error.
    """

    alpha: float
    p: float
    q: float
    beta: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "p", "q", "beta"):
            v = getattr(self, name)
            _require(isinstance(v, (int, float)) and math.isfinite(float(v)),
                     f"{name} must be a finite number, got {v!r}")
        _require(self.alpha > 0, f"alpha must be > 0, got {self.alpha}")
        _require(self.p > 0, f"p must be > 0, got {self.p}")
        _require(self.q > 0, f"q must be > 0, got {self.q}")
        _require(self.beta >= 0, f"beta must be >= 0, got {self.beta}")

    @property
    def a(self) -> float:
        """Shell-radius decay exponent a = alpha + 1/2 - 1/p."""
        return self.alpha + 0.5 - 1.0 / self.p

    @property
    def sparse_boundary(self) -> float:
        """Critical value (2*beta+1)*(1/p - 1/2)_+ separating dense and sparse."""
        return (2.0 * self.beta + 1.0) * max(1.0 / self.p - 0.5, 0.0)

    def is_compact(self) -> bool:
        """True iff alpha > (1/p - 1/2)_+, i.e. the ball is l2-compact."""
        return self.alpha > max(1.0 / self.p - 0.5, 0.0)

    def satisfies_rate_hypotheses(self) -> bool:
        """Compactness plus alpha + beta > 1/p when p < 2."""
        if not self.is_compact():
            return False
        if self.p < 2.0 and not (self.alpha + self.beta > 1.0 / self.p):
            return False
        return True

    def validate(self) -> "HyperParams":
        """Raise ValidationError unless the rate hypotheses hold."""
        _require(self.is_compact(),
                 f"compactness requires alpha > (1/p - 1/2)_+; got alpha={self.alpha}, p={self.p}")
        _require(self.satisfies_rate_hypotheses(),
                 f"hyper-parameters need alpha + beta > 1/p for p < 2; "
                 f"got alpha={self.alpha}, beta={self.beta}, p={self.p}")
        return self

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "p": self.p, "q": self.q, "beta": self.beta}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        try:
            return cls(alpha=float(d["alpha"]), p=float(d["p"]),
                       q=float(d["q"]), beta=float(d.get("beta", 0.0)))
        except KeyError as exc:
            raise ValidationError(f"gamma is missing field {exc}") from exc


def classify_zone(gamma: HyperParams, declared: Zone | None = None) -> Zone:
    """Classify a hyper-parameter vector into Dense / Sparse / Critical / Invalid.

    Invalid means gamma fails the compactness condition or, for p < 2, the
    additional hypothesis alpha + beta > 1/p.  Equality with the critical
    boundary is detected with absolute tolerance CRITICAL_ZONE_TOL; pass
    ``declared`` to override the detection for a vector known to sit exactly
    on (or off) the boundary.
    """
    if not gamma.satisfies_rate_hypotheses():
        return Zone.INVALID
    if declared is not None:
        return declared
    if gamma.p >= 2.0:
        return Zone.DENSE
    gap = gamma.alpha - gamma.sparse_boundary
    if abs(gap) <= CRITICAL_ZONE_TOL:
        return Zone.CRITICAL
    return Zone.DENSE if gap > 0 else Zone.SPARSE


@dataclass(frozen=True, eq=False)
class MultiresSequence:
    """Ragged coefficient array theta = (theta_j)_{j0 <= j <= jmax}, n_j = 2^j.

    Levels above jmax are implicitly zero.  Instances are immutable: level
    arrays are stored read-only.
    """

    j0: int
    levels: tuple

    def __post_init__(self):
        _require(isinstance(self.j0, int) and self.j0 >= 1,
                 f"j0 must be an integer >= 1, got {self.j0!r}")
        _require(len(self.levels) >= 1, "at least one level is required")
        frozen = []
        for offset, lev in enumerate(self.levels):
            j = self.j0 + offset
            arr = np.asarray(lev, dtype=float)
            _require(arr.ndim == 1,
                     f"level {j} must be one-dimensional, got shape {arr.shape}")
            _require(arr.size == 2 ** j,
                     f"level length mismatch at level {j}: expected {2 ** j}, got {arr.size}")
            _require(bool(np.all(np.isfinite(arr))),
                     f"level {j} contains non-finite coefficients")
            arr = arr.copy()
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "levels", tuple(frozen))

    @property
    def jmax(self) -> int:
        return self.j0 + len(self.levels) - 1

    def level(self, j: int) -> np.ndarray:
        _require(self.j0 <= j <= self.jmax, f"level {j} outside [{self.j0}, {self.jmax}]")
        return self.levels[j - self.j0]

    def iter_levels(self):
        """Yield (j, coefficients) pairs in increasing j."""
        for offset, arr in enumerate(self.levels):
            yield self.j0 + offset, arr

    @property
    def size(self) -> int:
        return sum(arr.size for arr in self.levels)

    @classmethod
    def zeros(cls, j0: int, jmax: int) -> "MultiresSequence":
        _require(jmax >= j0, f"jmax must be >= j0, got j0={j0}, jmax={jmax}")
        return cls(j0=j0, levels=tuple(np.zeros(2 ** j) for j in range(j0, jmax + 1)))

    def add(self, other: "MultiresSequence") -> "MultiresSequence":
        _require(self.j0 == other.j0 and self.jmax == other.jmax,
                 "sequences must share j0 and jmax")
        return MultiresSequence(self.j0, tuple(a + b for a, b in zip(self.levels, other.levels)))

    def scale(self, c: float) -> "MultiresSequence":
        return MultiresSequence(self.j0, tuple(c * a for a in self.levels))

    def to_json_dict(self) -> dict:
        return {"j0": self.j0, "levels": [arr.tolist() for arr in self.levels]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "MultiresSequence":
        _require(isinstance(d, dict) and "j0" in d and "levels" in d,
                 "sequence document must have 'j0' and 'levels' fields")
        j0 = d["j0"]
        _require(isinstance(j0, int), f"j0 must be an integer, got {j0!r}")
        return cls(j0=j0, levels=tuple(d["levels"]))

    @classmethod
    def from_json(cls, text: str) -> "MultiresSequence":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed sequence JSON: {exc}") from exc
        return cls.from_json_dict(doc)


@dataclass(frozen=True)
class BesovBall:
    """Besov ball of sequences with parameters gamma and radius C > 0."""

    gamma: HyperParams
    radius: float

    def __post_init__(self):
        _require(math.isfinite(float(self.radius)) and self.radius > 0,
                 f"radius must be a finite positive number, got {self.radius}")


@dataclass(frozen=True)
class NoiseSpec:
    """Per-level Gaussian noise description.

    eps_j = epsilon * 2^(beta*j); each level draws z_j ~ N(0, Sigma_j) with
    Sigma_j either the identity or the stationary tridiagonal matrix with
    unit diagonal and off-diagonal rho (positive definite iff |rho| < 1/2).
    xi0 and xi1 bound the eigenvalues of Sigma_j uniformly over levels; they
    default to the exact bounds of the chosen family.

    epsilon = 0 is allowed as the degenerate noiseless case.
    """

    epsilon: float
    beta: float = 0.0
    covariance: str = "identity"
    rho: float = 0.0
    xi0: float | None = None
    xi1: float | None = None

    def __post_init__(self):
        _require(math.isfinite(float(self.epsilon)) and self.epsilon >= 0,
                 f"epsilon must be finite and >= 0, got {self.epsilon}")
        _require(self.beta >= 0, f"beta must be >= 0, got {self.beta}")
        _require(self.covariance in ("identity", "tridiagonal"),
                 f"covariance must be 'identity' or 'tridiagonal', got {self.covariance!r}")
        if self.covariance == "identity":
            _require(self.rho == 0.0, "identity covariance requires rho = 0")
            lo, hi = 1.0, 1.0
        else:
            _require(abs(self.rho) < 0.5,
                     f"tridiagonal covariance needs |rho| < 1/2, got rho={self.rho}")
            lo, hi = 1.0 - 2.0 * abs(self.rho), 1.0 + 2.0 * abs(self.rho)
        xi0 = lo if self.xi0 is None else float(self.xi0)
        xi1 = hi if self.xi1 is None else float(self.xi1)
        _require(xi0 > 0, f"xi0 must be > 0, got {xi0}")
        _require(xi1 >= xi0, f"xi1 must be >= xi0, got xi0={xi0}, xi1={xi1}")
        _require(xi0 <= lo + 1e-12 and hi <= xi1 + 1e-12,
                 f"eigenvalue bounds must satisfy xi0 <= {lo} <= {hi} <= xi1; "
                 f"got xi0={xi0}, xi1={xi1}")
        object.__setattr__(self, "xi0", xi0)
        object.__setattr__(self, "xi1", xi1)

    def epsilon_at(self, j: int | float) -> float:
        """Level noise scale eps_j = epsilon * 2^(beta*j)."""
        return self.epsilon * 2.0 ** (self.beta * j)

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "beta": self.beta,
                "covariance": self.covariance, "rho": self.rho,
                "xi0": self.xi0, "xi1": self.xi1}


def _lp_norm(x: np.ndarray, p: float) -> float:
    if x.size == 0:
        return 0.0
    ax = np.abs(x)
    if p == 2.0:
        return float(np.sqrt(np.sum(ax * ax)))
    return float(np.sum(ax ** p) ** (1.0 / p))


def besov_norm(theta: MultiresSequence, gamma: HyperParams) -> float:
    """Weighted level-wise norm ( sum_j 2^(a*q*j) ||theta_j||_p^q )^(1/q).

    The weight exponent a = alpha + 1/2 - 1/p; beta plays no role.  The sum
    runs over the stored levels (levels above jmax are zero by convention).
    """
    total = 0.0
    for j, coeffs in theta.iter_levels():
        lp = _lp_norm(coeffs, gamma.p)
        if lp > 0.0:
            total += 2.0 ** (gamma.a * gamma.q * j) * lp ** gamma.q
    return total ** (1.0 / gamma.q)


def shell_radius(ball: BesovBall, j: int | float) -> float:
    """Radius C_j = C * 2^(-a*j) of the level-j shell of the ball.

    Membership of theta in the ball implies ||theta_j||_p <= C_j for every j.
    """
    return ball.radius * 2.0 ** (-ball.gamma.a * j)


def membership(theta: MultiresSequence, ball: BesovBall) -> bool:
    """True iff besov_norm(theta, ball.gamma) <= ball.radius."""
    return besov_norm(theta, ball.gamma) <= ball.radius
