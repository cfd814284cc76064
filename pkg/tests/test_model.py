import json

import numpy as np
import pytest

from penseq import (BesovBall, HyperParams, MultiresSequence, NoiseSpec,
                    ValidationError, Zone, besov_norm, classify_zone,
                    membership, shell_radius)


def random_sequence(rng, j0=1, jmax=5):
    return MultiresSequence(
        j0=j0, levels=tuple(rng.standard_normal(2 ** j) for j in range(j0, jmax + 1)))


class TestHyperParams:
    def test_field_validation(self):
        with pytest.raises(ValidationError):
            HyperParams(alpha=0.0, p=2.0, q=2.0)
        with pytest.raises(ValidationError):
            HyperParams(alpha=1.0, p=-1.0, q=2.0)
        with pytest.raises(ValidationError):
            HyperParams(alpha=1.0, p=2.0, q=0.0)
        with pytest.raises(ValidationError):
            HyperParams(alpha=1.0, p=2.0, q=2.0, beta=-0.1)
        with pytest.raises(ValidationError):
            HyperParams(alpha=float("nan"), p=2.0, q=2.0)

    def test_validate_raises_on_rate_hypotheses(self):
        # compactness failure
        g = HyperParams(alpha=0.3, p=1.0, q=1.0, beta=2.0)
        with pytest.raises(ValidationError):
            g.validate()
        # alpha + beta <= 1/p with p < 2
        g = HyperParams(alpha=0.6, p=1.0, q=1.0, beta=0.2)
        with pytest.raises(ValidationError):
            g.validate()
        HyperParams(alpha=1.0, p=2.0, q=2.0, beta=0.5).validate()

    def test_shell_exponent(self):
        g = HyperParams(alpha=1.0, p=2.0, q=2.0)
        assert g.a == 1.0


class TestBesovNorm:
    def test_zero_sequence(self):
        theta = MultiresSequence.zeros(1, 4)
        assert besov_norm(theta, HyperParams(1.0, 2.0, 2.0)) == 0.0

    def test_single_level_hand_value(self):
        # one level j=1 with theta = (1, 0): weight 2^(a*q*j) = 4, norm = 2
        theta = MultiresSequence(j0=1, levels=(np.array([1.0, 0.0]),))
        g = HyperParams(alpha=1.0, p=2.0, q=2.0, beta=0.0)
        assert besov_norm(theta, g) == pytest.approx(2.0, rel=1e-15)

    def test_beta_does_not_enter(self):
        rng = np.random.default_rng(11)
        theta = random_sequence(rng)
        g0 = HyperParams(alpha=0.8, p=1.5, q=1.2, beta=0.0)
        g1 = HyperParams(alpha=0.8, p=1.5, q=1.2, beta=1.7)
        assert besov_norm(theta, g0) == besov_norm(theta, g1)

    def test_absolutely_homogeneous(self):
        rng = np.random.default_rng(12)
        theta = random_sequence(rng)
        g = HyperParams(alpha=1.0, p=1.0, q=3.0, beta=0.5)
        base = besov_norm(theta, g)
        for c in (0.0, 0.25, 3.0):
            assert besov_norm(theta.scale(c), g) == pytest.approx(c * base, rel=1e-12)

    def test_nonfinite_rejected_at_construction(self):
        with pytest.raises(ValidationError):
            MultiresSequence(j0=1, levels=(np.array([np.nan, 0.0]),))
        with pytest.raises(ValidationError):
            MultiresSequence(j0=1, levels=(np.array([np.inf, 0.0]),))


class TestShellRadius:
    def test_boundary_exponent_zero(self):
        # alpha = 1/p - 1/2 exactly: a = 0, C_j constant
        g = HyperParams(alpha=0.5, p=1.0, q=1.0, beta=0.0)
        ball = BesovBall(gamma=g, radius=1.0)
        for j in (0, 3, 17):
            assert shell_radius(ball, j) == 1.0

    def test_hand_value(self):
        g = HyperParams(alpha=1.0, p=2.0, q=2.0, beta=0.0)
        ball = BesovBall(gamma=g, radius=4.0)
        assert shell_radius(ball, 2) == pytest.approx(1.0, rel=1e-15)

    def test_geometric_decay(self):
        g = HyperParams(alpha=1.0, p=2.0, q=2.0, beta=0.3)
        ball = BesovBall(gamma=g, radius=2.0)
        for j in range(6):
            ratio = shell_radius(ball, j + 1) / shell_radius(ball, j)
            assert ratio == pytest.approx(2.0 ** (-g.a), rel=1e-12)

    def test_membership_implies_shell_bound(self):
        rng = np.random.default_rng(13)
        g = HyperParams(alpha=0.9, p=1.5, q=2.5, beta=0.4)
        ball = BesovBall(gamma=g, radius=1.0)
        for _ in range(25):
            raw = random_sequence(rng, jmax=6)
            norm = besov_norm(raw, g)
            theta = raw.scale(rng.uniform(0.1, 1.0) / norm)
            assert membership(theta, ball)
            for j, coeffs in theta.iter_levels():
                lp = float(np.sum(np.abs(coeffs) ** g.p) ** (1 / g.p))
                assert lp <= shell_radius(ball, j) * (1 + 1e-12)


class TestClassifyZone:
    def test_examples(self):
        assert classify_zone(HyperParams(2.0, 2.0, 2.0, 1.0)) is Zone.DENSE
        assert classify_zone(HyperParams(0.6, 1.0, 1.0, 1.0)) is Zone.SPARSE
        assert classify_zone(HyperParams(1.0, 1.0, 2.0, 0.5)) is Zone.CRITICAL

    def test_invalid_cases(self):
        # compactness violated
        assert classify_zone(HyperParams(0.4, 1.0, 1.0, 1.0)) is Zone.INVALID
        # alpha + beta <= 1/p
        assert classify_zone(HyperParams(0.6, 1.0, 1.0, 0.3)) is Zone.INVALID

    def test_p_ge_2_never_sparse_or_critical(self):
        rng = np.random.default_rng(14)
        for _ in range(200):
            g = HyperParams(alpha=float(rng.uniform(0.05, 4.0)),
                            p=float(rng.uniform(2.0, 6.0)),
                            q=float(rng.uniform(0.5, 4.0)),
                            beta=float(rng.uniform(0.0, 2.0)))
            assert classify_zone(g) in (Zone.DENSE, Zone.INVALID)

    def test_partition_of_valid_set(self):
        rng = np.random.default_rng(15)
        seen = set()
        for _ in range(500):
            g = HyperParams(alpha=float(rng.uniform(0.05, 4.0)),
                            p=float(rng.uniform(0.3, 4.0)),
                            q=float(rng.uniform(0.5, 4.0)),
                            beta=float(rng.uniform(0.0, 2.0)))
            zone = classify_zone(g)
            if g.satisfies_rate_hypotheses():
                assert zone in (Zone.DENSE, Zone.SPARSE, Zone.CRITICAL)
            else:
                assert zone is Zone.INVALID
            seen.add(zone)
        assert Zone.DENSE in seen and Zone.INVALID in seen

    def test_critical_tolerance_and_override(self):
        boundary = 2.0 * 0.5  # (2*beta+1)*(1/p-1/2) at p=1, beta=0.5
        near = HyperParams(boundary + 1e-13, 1.0, 2.0, 0.5)
        assert classify_zone(near) is Zone.CRITICAL
        off = HyperParams(boundary + 1e-9, 1.0, 2.0, 0.5)
        assert classify_zone(off) is Zone.DENSE
        assert classify_zone(off, declared=Zone.CRITICAL) is Zone.CRITICAL
        # declared zone cannot resurrect an invalid vector
        bad = HyperParams(0.4, 1.0, 1.0, 1.0)
        assert classify_zone(bad, declared=Zone.SPARSE) is Zone.INVALID


class TestMembership:
    def test_zero_in_any_ball(self):
        ball = BesovBall(HyperParams(1.0, 2.0, 2.0), radius=0.01)
        assert membership(MultiresSequence.zeros(1, 3), ball)

    def test_boundary_scaling(self):
        rng = np.random.default_rng(16)
        g = HyperParams(1.2, 1.0, 1.0, 0.5)
        ball = BesovBall(gamma=g, radius=2.0)
        raw = random_sequence(rng, jmax=5)
        theta = raw.scale(ball.radius / besov_norm(raw, g))
        while besov_norm(theta, g) > ball.radius:
            theta = theta.scale(1.0 - 1e-15)
        assert membership(theta, ball)
        assert not membership(theta.scale(1.0 + 1e-6), ball)


class TestMultiresSequence:
    def test_level_length_validated(self):
        with pytest.raises(ValidationError, match="level length"):
            MultiresSequence(j0=1, levels=(np.array([1.0, 2.0, 3.0]),))
        with pytest.raises(ValidationError, match="level length"):
            MultiresSequence(j0=2, levels=(np.zeros(2),))

    def test_j0_validated(self):
        with pytest.raises(ValidationError):
            MultiresSequence(j0=0, levels=(np.zeros(1),))

    def test_levels_read_only(self):
        seq = MultiresSequence.zeros(1, 3)
        with pytest.raises(ValueError):
            seq.level(2)[0] = 1.0

    def test_json_round_trip(self):
        rng = np.random.default_rng(17)
        seq = random_sequence(rng, j0=2, jmax=4)
        back = MultiresSequence.from_json(seq.to_json())
        assert back.j0 == seq.j0 and back.jmax == seq.jmax
        for j, lev in seq.iter_levels():
            assert np.array_equal(lev, back.level(j))

    def test_from_json_rejects_malformed(self):
        with pytest.raises(ValidationError, match="level length"):
            MultiresSequence.from_json(json.dumps({"j0": 1, "levels": [[0.0, 1.0, 2.0]]}))
        with pytest.raises(ValidationError):
            MultiresSequence.from_json("not json {{{")
        with pytest.raises(ValidationError):
            MultiresSequence.from_json(json.dumps({"levels": [[0.0, 1.0]]}))


class TestNoiseSpec:
    def test_level_scale(self):
        noise = NoiseSpec(epsilon=0.25, beta=0.5)
        assert noise.epsilon_at(4) == pytest.approx(0.25 * 4.0, rel=1e-15)
        assert NoiseSpec(epsilon=0.1, beta=0.0).epsilon_at(9) == pytest.approx(0.1)

    def test_default_eigen_bounds(self):
        white = NoiseSpec(epsilon=1.0)
        assert white.xi0 == 1.0 and white.xi1 == 1.0
        tri = NoiseSpec(epsilon=1.0, covariance="tridiagonal", rho=0.3)
        assert tri.xi0 == pytest.approx(0.4)
        assert tri.xi1 == pytest.approx(1.6)

    def test_eigen_bounds_must_bracket(self):
        with pytest.raises(ValidationError):
            NoiseSpec(epsilon=1.0, covariance="tridiagonal", rho=0.3, xi0=0.5, xi1=1.6)
        with pytest.raises(ValidationError):
            NoiseSpec(epsilon=1.0, covariance="tridiagonal", rho=0.3, xi0=0.4, xi1=1.5)
        NoiseSpec(epsilon=1.0, covariance="tridiagonal", rho=0.3, xi0=0.3, xi1=2.0)

    def test_rho_range(self):
        with pytest.raises(ValidationError):
            NoiseSpec(epsilon=1.0, covariance="tridiagonal", rho=0.5)
        with pytest.raises(ValidationError):
            NoiseSpec(epsilon=1.0, covariance="tridiagonal", rho=-0.7)

    def test_epsilon_zero_allowed(self):
        assert NoiseSpec(epsilon=0.0).epsilon_at(3) == 0.0
