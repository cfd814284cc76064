"""Command-line front end: config parsing, experiment presets, result emission.

Subcommands:
    estimate      fit one observed sequence, write the fit as JSON
    sweep         Monte Carlo risk over an epsilon grid + rate-exponent fit
    rates         rate report and shell-risk profile for one (gamma, C, eps)
    oracle-check  exhaustive-oracle equivalence batch + risk-bound Monte Carlo

Every experiment is a single JSON config document (or a named preset);
--seed / --replicates / --out override individual fields.  Outputs embed the
fully resolved config and a schema_version field and contain no timestamps,
so reruns produce identical files.

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalError, PenseqError, ValidationError
from .model import HyperParams, MultiresSequence, NoiseSpec, Zone, classify_zone
from .penalty import PenaltyConfig
from .estimator import fit_multiscale, select_k, subset_oracle
from .rates import rate_control, rate_exponent, shell_profile
from .simulate import (SignalSpec, fit_rate_exponent, mc_risk,
                       oracle_inequality_check)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_CHECK_FAILED = 4

PRESETS = {
    "dense": {
        "gamma": {"alpha": 1.0, "p": 2.0, "q": 2.0, "beta": 0.5},
        "radius": 1.0,
        "penalty": {"zeta": 2.0, "nu": 40.0, "xi1": 1.0, "jeps_scale": 1.0},
        "noise": {"covariance": "identity", "rho": 0.0},
        "signal": {"kind": "shell_dense", "placement": "even"},
        "epsilons": [2.0 ** -j for j in range(6, 13)],
        "epsilon": 2.0 ** -8,
        "replicates": 100,
        "seed": 20260811,
    },
    "sparse": {
        "gamma": {"alpha": 0.75, "p": 1.0, "q": 1.0, "beta": 0.5},
        "radius": 1.0,
        "penalty": {"zeta": 2.0, "nu": 40.0, "xi1": 1.0, "jeps_scale": 1.0},
        "noise": {"covariance": "identity", "rho": 0.0},
        "signal": {"kind": "shell_sparse", "placement": "even"},
        "epsilons": [2.0 ** -j for j in range(6, 13)],
        "epsilon": 2.0 ** -8,
        "replicates": 100,
        "seed": 20260811,
    },
    "zero": {
        "gamma": {"alpha": 1.0, "p": 2.0, "q": 2.0, "beta": 0.5},
        "radius": 1.0,
        "penalty": {"zeta": 2.0, "nu": 40.0, "xi1": 1.0, "jeps_scale": 1.0},
        "noise": {"covariance": "identity", "rho": 0.0},
        "signal": {"kind": "zero"},
        "epsilons": [2.0 ** -j for j in range(6, 11)],
        "epsilon": 2.0 ** -8,
        "replicates": 200,
        "seed": 20260811,
    },
    "critical": {
        "gamma": {"alpha": 1.0, "p": 1.0, "q": 2.0, "beta": 0.5},
        "radius": 1.0,
        "penalty": {"zeta": 2.0, "nu": 40.0, "xi1": 1.0, "jeps_scale": 1.0},
        "noise": {"covariance": "identity", "rho": 0.0},
        "signal": {"kind": "critical_prior", "rho1": 1.05, "rho2": 1.25},
        "epsilons": [2.0 ** -j for j in range(6, 13)],
        "epsilon": 2.0 ** -8,
        "replicates": 100,
        "seed": 20260811,
    },
}


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment description (one JSON document)."""

    gamma: HyperParams
    radius: float
    penalty: PenaltyConfig
    noise_covariance: str
    noise_rho: float
    noise_xi0: float | None
    noise_xi1: float | None
    signal_kind: str
    signal_placement: str
    signal_xi0: float
    signal_rho1: float
    signal_rho2: float
    epsilons: tuple
    replicates: int
    seed: int
    jmax: int | None
    epsilon: float | None
    zone: Zone | None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        _require(isinstance(doc, dict), "config must be a JSON object")
        known = {"schema_version", "gamma", "radius", "penalty", "noise", "signal",
                 "epsilons", "replicates", "seed", "jmax", "epsilon", "zone"}
        unknown = set(doc) - known
        _require(not unknown, f"unknown config fields: {sorted(unknown)}")
        _require("gamma" in doc, "config is missing 'gamma'")
        gamma = HyperParams.from_dict(doc["gamma"])
        radius = float(doc.get("radius", 1.0))
        pen_doc = dict(doc.get("penalty", {}))
        pen_doc.setdefault("beta", gamma.beta)
        _require(float(pen_doc["beta"]) == gamma.beta,
                 "penalty beta must match gamma beta")
        penalty = PenaltyConfig.from_dict(pen_doc)
        noise_doc = dict(doc.get("noise", {}))
        nk = set(noise_doc) - {"covariance", "rho", "xi0", "xi1"}
        _require(not nk, f"unknown noise fields: {sorted(nk)}")
        sig_doc = dict(doc.get("signal", {}))
        sk = set(sig_doc) - {"kind", "placement", "xi0", "rho1", "rho2"}
        _require(not sk, f"unknown signal fields: {sorted(sk)}")
        _require("kind" in sig_doc, "signal section is missing 'kind'")
        eps = doc.get("epsilons", [])
        _require(isinstance(eps, (list, tuple)), "'epsilons' must be a list")
        zone = doc.get("zone")
        if zone is not None:
            try:
                zone = Zone(zone)
            except ValueError:
                raise ValidationError(f"unknown zone {zone!r}") from None
        cfg = cls(
            gamma=gamma, radius=radius, penalty=penalty,
            noise_covariance=noise_doc.get("covariance", "identity"),
            noise_rho=float(noise_doc.get("rho", 0.0)),
            noise_xi0=noise_doc.get("xi0"), noise_xi1=noise_doc.get("xi1"),
            signal_kind=sig_doc["kind"],
            signal_placement=sig_doc.get("placement", "even"),
            signal_xi0=float(sig_doc.get("xi0", 1.0)),
            signal_rho1=float(sig_doc.get("rho1", 1.05)),
            signal_rho2=float(sig_doc.get("rho2", 1.25)),
            epsilons=tuple(float(e) for e in eps),
            replicates=int(doc.get("replicates", 100)),
            seed=int(doc.get("seed", 0)),
            jmax=doc.get("jmax"),
            epsilon=None if doc.get("epsilon") is None else float(doc["epsilon"]),
            zone=zone,
        )
        cfg.cross_validate()
        return cfg

    def cross_validate(self) -> None:
        zone = classify_zone(self.gamma, declared=self.zone)
        if self.signal_kind == "shell_sparse":
            _require(self.gamma.p < 2, "shell_sparse signals need p < 2")
        if self.signal_kind == "critical_prior":
            _require(zone is Zone.CRITICAL,
                     f"critical_prior signals need the Critical zone, got {zone.value}")
        for e in self.epsilons:
            _require(0.0 < e < min(self.radius, 1.0),
                     f"every epsilon must lie in (0, min(radius, 1)), got {e}")
        if self.epsilon is not None:
            _require(0.0 < self.epsilon < 1.0,
                     f"epsilon must lie in (0, 1), got {self.epsilon}")
        _require(self.replicates >= 2, "replicates must be >= 2")

    def noise_spec(self, epsilon: float) -> NoiseSpec:
        return NoiseSpec(epsilon=epsilon, beta=self.gamma.beta,
                         covariance=self.noise_covariance, rho=self.noise_rho,
                         xi0=self.noise_xi0, xi1=self.noise_xi1)

    def signal_spec(self, epsilon: float) -> SignalSpec:
        return SignalSpec(kind=self.signal_kind, gamma=self.gamma,
                          radius=self.radius, epsilon=epsilon, jmax=self.jmax,
                          placement=self.signal_placement, xi0=self.signal_xi0,
                          rho1=self.signal_rho1, rho2=self.signal_rho2)

    def single_epsilon(self) -> float:
        if self.epsilon is not None:
            return self.epsilon
        _require(len(self.epsilons) == 1,
                 "this command needs a single 'epsilon' (or a one-entry epsilon grid)")
        return self.epsilons[0]

    def resolved_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "gamma": self.gamma.to_dict(),
            "radius": self.radius,
            "penalty": self.penalty.to_dict(),
            "noise": {"covariance": self.noise_covariance, "rho": self.noise_rho,
                      "xi0": self.noise_xi0, "xi1": self.noise_xi1},
            "signal": {"kind": self.signal_kind, "placement": self.signal_placement,
                       "xi0": self.signal_xi0, "rho1": self.signal_rho1,
                       "rho2": self.signal_rho2},
            "epsilons": list(self.epsilons),
            "replicates": self.replicates,
            "seed": self.seed,
            "jmax": self.jmax,
            "epsilon": self.epsilon,
            "zone": None if self.zone is None else self.zone.value,
        }


def load_config(args) -> ExperimentConfig:
    if getattr(args, "preset", None):
        _require(args.preset in PRESETS,
                 f"unknown preset {args.preset!r}; available: {sorted(PRESETS)}")
        doc = json.loads(json.dumps(PRESETS[args.preset]))
    else:
        _require(getattr(args, "config", None) is not None,
                 "either --config PATH or --preset NAME is required")
        path = Path(args.config)
        _require(path.exists(), f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed config JSON: {exc}") from exc
    if getattr(args, "seed", None) is not None:
        doc["seed"] = args.seed
    if getattr(args, "replicates", None) is not None:
        doc["replicates"] = args.replicates
    return ExperimentConfig.from_dict(doc)


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_estimate(args) -> int:
    config = load_config(args)
    seq_path = Path(args.input)
    _require(seq_path.exists(), f"input sequence not found: {seq_path}")
    y = MultiresSequence.from_json(seq_path.read_text())
    epsilon = config.single_epsilon()
    fit = fit_multiscale(y, config.penalty, config.noise_spec(epsilon))
    doc = {"schema_version": SCHEMA_VERSION, "config": config.resolved_dict(),
           "epsilon": epsilon, "fit": fit.to_json_dict()}
    _write_json(_out_dir(args) / "fit.json", doc)
    return EXIT_OK


def _sweep_point(config: ExperimentConfig, epsilon: float, index: int) -> dict:
    spec = config.signal_spec(epsilon)
    noise = config.noise_spec(epsilon)
    result = mc_risk(spec, config.penalty, noise, config.replicates,
                     seed=config.seed + index)
    return {"epsilon": epsilon, "mean_sse": result.mean_sse,
            "stderr": result.stderr_sse, "replicates": result.replicates}


def _log_correction(config: ExperimentConfig, epsilon: float) -> float:
    zone = classify_zone(config.gamma, declared=config.zone)
    r = rate_exponent(config.gamma)
    logf = 1.0 + math.log(config.radius / epsilon)
    if zone is Zone.SPARSE:
        return logf ** r
    if zone is Zone.CRITICAL:
        return logf ** (r + max(1.0 - config.gamma.p / config.gamma.q, 0.0))
    return 1.0


def cmd_sweep(args) -> int:
    config = load_config(args)
    _require(len(config.epsilons) >= 4, "sweep needs an epsilon grid of >= 4 points")
    order = sorted(range(len(config.epsilons)), key=lambda i: config.epsilons[i])
    threads = max(1, args.threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(
                lambda i: _sweep_point(config, config.epsilons[i], i), order))
    else:
        rows = [_sweep_point(config, config.epsilons[i], i) for i in order]
    corrected = [(row["epsilon"], row["mean_sse"] / _log_correction(config, row["epsilon"]))
                 for row in rows]
    slope, intercept, r_hat = fit_rate_exponent(corrected)
    r_theory = rate_exponent(config.gamma)
    summary = {"slope": slope, "intercept": intercept, "r_hat": r_hat,
               "r_theory": r_theory,
               "relative_error": abs(r_hat - r_theory) / r_theory,
               "log_corrected": any(_log_correction(config, e) != 1.0
                                    for e in config.epsilons)}
    out = _out_dir(args)
    csv_lines = ["epsilon,mean_sse,stderr,replicates"]
    for row in rows:
        csv_lines.append(f"{row['epsilon']:.17g},{row['mean_sse']:.17g},"
                         f"{row['stderr']:.17g},{row['replicates']}")
    (out / "sweep.csv").write_text("\n".join(csv_lines) + "\n")
    _write_json(out / "sweep.json",
                {"schema_version": SCHEMA_VERSION, "config": config.resolved_dict(),
                 "rows": rows, "summary": summary})
    return EXIT_OK


def cmd_rates(args) -> int:
    config = load_config(args)
    zone = classify_zone(config.gamma, declared=config.zone)
    _require(zone is not Zone.INVALID,
             f"invalid hyper-parameters: {config.gamma.to_dict()}")
    epsilon = config.single_epsilon()
    report = rate_control(config.gamma, config.radius, epsilon)
    profile = shell_profile(config.gamma, config.radius, epsilon)
    out = _out_dir(args)
    _write_json(out / "rate_report.json",
                {"schema_version": SCHEMA_VERSION, "config": config.resolved_dict(),
                 "epsilon": epsilon, "report": report.to_json_dict()})
    (out / "shell_profile.csv").write_text(profile.to_csv_text())
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    config = load_config(args)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    instances = args.instances
    mismatches = 0
    checked = 0
    for n in range(1, 13):
        for _ in range(instances // 12 if instances >= 12 else 1):
            y = rng.standard_normal(n)
            fit = select_k(y, config.penalty, 1.0)
            indices, _ = subset_oracle(y, config.penalty, 1.0)
            proj = np.zeros(n)
            proj[list(indices)] = y[list(indices)]
            checked += 1
            if not np.array_equal(proj, fit.estimate):
                mismatches += 1
    epsilon = config.single_epsilon() if (config.epsilon or len(config.epsilons) == 1) \
        else config.epsilons[0]
    lhs, rhs, ratio = oracle_inequality_check(
        config.signal_spec(epsilon), config.penalty, config.noise_spec(epsilon),
        config.replicates, config.seed)
    doc = {"schema_version": SCHEMA_VERSION, "config": config.resolved_dict(),
           "seed": config.seed,
           "equivalence": {"instances": checked, "mismatches": mismatches},
           "oracle_inequality": {"epsilon": epsilon, "lhs": lhs, "rhs": rhs,
                                 "ratio": ratio, "holds": ratio <= 1.0}}
    _write_json(_out_dir(args) / "oracle_check.json", doc)
    if mismatches > 0 or ratio > 1.0:
        print(f"oracle check FAILED: {mismatches} mismatches, ratio={ratio:.4g}",
              file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penseq",
        description="Adaptive complexity-penalized estimation in multiresolution "
                    "Gaussian sequence models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="path to a JSON experiment config")
        p.add_argument("--preset", help=f"named preset: {', '.join(sorted(PRESETS))}")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--replicates", type=int, default=None,
                       help="override config replicate count")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for epsilon-grid points")

    p_est = sub.add_parser("estimate", help="fit one observed sequence")
    p_est.add_argument("input", help="path to a sequence JSON file")
    common(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_sweep = sub.add_parser("sweep", help="Monte Carlo risk over an epsilon grid")
    common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_rates = sub.add_parser("rates", help="rate report and shell-risk profile")
    common(p_rates)
    p_rates.set_defaults(func=cmd_rates)

    p_oracle = sub.add_parser("oracle-check",
                              help="oracle equivalence batch and risk-bound check")
    p_oracle.add_argument("--instances", type=int, default=12000,
                          help="total random instances for the equivalence batch")
    common(p_oracle)
    p_oracle.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PenseqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
