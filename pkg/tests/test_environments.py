import math

import numpy as np
import pytest

from pablo.core import PabloError, RngStream
from pablo.environments import (
    AdaptiveSignEnv,
    ClippedHypercubeEnv,
    CustomEnv,
    FixedSequenceEnv,
    FixedThetaEnv,
    StochasticHypercubeEnv,
    adaptive_sign_env,
    clipped_sigma,
    fenchel_comparator,
    hypercube_comparator,
    hypercube_env,
    piecewise_hindsight_comparator,
    switching_comparator,
)


class TestStochasticHypercube:
    def test_delta_rule(self):
        env = StochasticHypercubeEnv(d=4, T=64, rng=RngStream(0))
        assert env.delta == pytest.approx(1.0 / 64.0, abs=1e-15)
        assert np.all(np.abs(env.theta) == env.delta)

    def test_theta_norm_bounded(self):
        for d, T in [(1, 4), (4, 16), (16, 64), (8, 10_000)]:
            env = StochasticHypercubeEnv(d=d, T=T, rng=RngStream(1))
            # ||theta||^2 = d Delta^2 = d/(64 T) <= 1/2 whenever T >= 4d
            assert float(env.theta @ env.theta) <= 0.5 + 1e-15

    def test_T_too_small_rejected(self):
        with pytest.raises(PabloError):
            StochasticHypercubeEnv(d=4, T=15, rng=RngStream(0))

    def test_same_seed_same_theta(self):
        a = StochasticHypercubeEnv(d=6, T=64, rng=RngStream(7))
        b = StochasticHypercubeEnv(d=6, T=64, rng=RngStream(7))
        assert np.array_equal(a.theta, b.theta)

    def test_comparator_inner_product(self):
        env = StochasticHypercubeEnv(d=4, T=64, rng=RngStream(2))
        u = hypercube_comparator(env.theta)
        assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)
        # <u, theta> = -Delta sqrt(d)
        assert float(u @ env.theta) == pytest.approx(
            -env.delta * math.sqrt(4.0), abs=1e-12
        )

    def test_factory(self):
        env, u = hypercube_env(4, 64, RngStream(3))
        assert np.array_equal(u, hypercube_comparator(env.theta))

    def test_loss_second_moment(self):
        # E||l||^2 = ||theta||^2 + d * sigma^2 = ||theta||^2 + 1/2
        env = StochasticHypercubeEnv(d=4, T=256, rng=RngStream(11))
        N = 20_000
        sq = [float(np.sum(np.asarray(env.loss(np.zeros(4))) ** 2)) for _ in range(N)]
        expected = float(env.theta @ env.theta) + 0.5
        assert np.mean(sq) == pytest.approx(expected, abs=6.0 * np.std(sq) / math.sqrt(N))


class TestClippedHypercube:
    def test_sigma_hand_value(self):
        got = clipped_sigma(4, 100)
        assert got == pytest.approx(0.0045108, abs=1e-5)

    def test_sigma_budget(self):
        # d * sigma^2 + ||theta||^2 stays below the unit budget
        for d in (1, 2, 4, 8, 16):
            for T in (4 * d, 64, 1024):
                if T < 4 * d:
                    continue
                s2 = clipped_sigma(d, T)
                assert d * s2 <= 0.5 + 1e-12

    def test_sigma_monotone_in_T(self):
        vals = [clipped_sigma(4, T) for T in (16, 64, 256, 1024)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_losses_always_bounded(self):
        env = ClippedHypercubeEnv(d=4, T=64, rng=RngStream(5))
        for _ in range(2000):
            ell = np.asarray(env.loss(np.zeros(4)))
            assert float(np.linalg.norm(ell)) <= 1.0 + 1e-12

    def test_clip_produces_zero_vector(self):
        env = ClippedHypercubeEnv(d=2, T=8, rng=RngStream(6))
        # force a clip by patching the noise scale through many draws
        saw_clip = False
        for _ in range(200_000):
            ell = np.asarray(env.loss(np.zeros(2)))
            if env.clip_count and not saw_clip:
                saw_clip = True
                assert np.array_equal(ell, np.zeros(2))
                break
        # clipping is rare by construction; zero observed clips is acceptable
        if not saw_clip:
            assert env.clip_count == 0

    def test_clip_rarity(self):
        env = ClippedHypercubeEnv(d=4, T=128, rng=RngStream(8))
        N = 50_000
        for _ in range(N):
            env.loss(np.zeros(4))
        # target clip probability <= 1/(8T); allow generous MC slack
        p_hat = env.clip_count / env.round_count
        p_target = 1.0 / (8.0 * 128.0)
        assert p_hat <= p_target + 5.0 * math.sqrt(p_target / N) + 1e-4


class TestFixedTheta:
    def test_stores_theta(self):
        env = FixedThetaEnv(np.array([0.3, 0.4]), 0.1, RngStream(0))
        assert np.array_equal(env.theta, np.array([0.3, 0.4]))

    def test_rescales_into_unit_ball(self):
        env = FixedThetaEnv(np.array([0.05] * 4), 0.25, RngStream(1))
        for _ in range(500):
            ell = np.asarray(env.loss(np.zeros(4)))
            assert float(np.linalg.norm(ell)) <= 1.0 + 1e-12

    def test_theta_norm_validated(self):
        with pytest.raises(PabloError):
            FixedThetaEnv(np.array([2.0, 0.0]), 0.1, RngStream(0))

    def test_zero_noise_is_deterministic(self):
        env = FixedThetaEnv(np.array([0.2, -0.1]), 0.0, RngStream(2))
        a = np.asarray(env.loss(np.zeros(2)))
        b = np.asarray(env.loss(np.ones(2)))
        assert np.array_equal(a, np.array([0.2, -0.1]))
        assert np.array_equal(a, b)


class TestAdaptiveSign:
    def test_points_along_play(self):
        env = AdaptiveSignEnv(G=1.0, d=2)
        ell = np.asarray(env.loss(np.array([0.6, 0.8])))
        assert ell == pytest.approx([0.6, 0.8], abs=1e-12)

    def test_origin_fallback(self):
        env = AdaptiveSignEnv(G=2.0, d=3)
        ell = np.asarray(env.loss(np.zeros(3)))
        assert np.array_equal(ell, np.array([2.0, 0.0, 0.0]))

    def test_norm_always_G(self):
        env = adaptive_sign_env(0.7, 4)
        rng = RngStream(4)
        for _ in range(100):
            w = np.asarray(rng.normal(4))
            ell = np.asarray(env.loss(w))
            assert float(np.linalg.norm(ell)) == pytest.approx(0.7, abs=1e-12)

    def test_loss_value_nonnegative(self):
        env = AdaptiveSignEnv(G=1.0, d=2)
        rng = RngStream(10)
        for _ in range(100):
            w = np.asarray(rng.normal(2))
            ell = np.asarray(env.loss(w))
            assert float(ell @ w) >= -1e-12


class TestSimpleEnvs:
    def test_fixed_sequence_cycles_raise(self):
        env = FixedSequenceEnv([np.array([1.0]), np.array([-1.0])])
        assert env.loss(np.zeros(1))[0] == 1.0
        assert env.loss(np.zeros(1))[0] == -1.0
        with pytest.raises(PabloError):
            env.loss(np.zeros(1))

    def test_custom_env(self):
        env = CustomEnv(lambda t, w: -np.asarray(w), d=2)
        got = np.asarray(env.loss(np.array([1.0, -2.0])))
        assert np.array_equal(got, np.array([-1.0, 2.0]))

    def test_custom_env_sees_round_index(self):
        env = CustomEnv(lambda t, w: np.array([float(t), 0.0]), d=2)
        assert env.loss(np.zeros(2))[0] == 0.0
        assert env.loss(np.zeros(2))[0] == 1.0


class TestFenchelComparator:
    def test_zero_losses(self):
        u = fenchel_comparator([np.zeros(2)] * 4, 1.0, 1.0, 4)
        assert np.array_equal(u, np.zeros(2))

    def test_unit_energy(self):
        # ||L||^2 = G^2 T  ->  ||u|| = eps * e
        T, G, eps = 4, 1.0, 0.5
        losses = [np.array([-1.0, 0.0])] * T  # L = (4, 0), ||L||^2 = 16 = G^2 T^2
        u = fenchel_comparator(losses, eps, G, T)
        # exponent ||L||^2/(G^2 T) = 4
        assert np.linalg.norm(u) == pytest.approx(eps * math.exp(4.0), rel=1e-12)
        assert u[0] > 0.0 and u[1] == 0.0

    def test_flip_symmetry(self):
        losses = [np.array([0.3, -0.2])] * 5
        u1 = fenchel_comparator(losses, 1.0, 1.0, 5)
        u2 = fenchel_comparator([-l for l in losses], 1.0, 1.0, 5)
        assert u1 == pytest.approx(-u2, abs=1e-12)


class TestPiecewiseHindsight:
    def test_exact_path_length(self):
        rng = RngStream(12)
        losses = [np.asarray(rng.normal(3)) for _ in range(64)]
        for segments, target in [(2, 1.0), (5, 4.0), (12, 16.0)]:
            u = piecewise_hindsight_comparator(losses, segments, target)
            assert len(u) == 64
            path = sum(
                float(np.linalg.norm(b - a)) for a, b in zip(u, u[1:])
            )
            assert path == pytest.approx(target, abs=1e-9)

    def test_equal_norms(self):
        rng = RngStream(13)
        losses = [np.asarray(rng.normal(2)) for _ in range(32)]
        u = piecewise_hindsight_comparator(losses, 4, 8.0)
        norms = {round(float(np.linalg.norm(p)), 9) for p in u}
        assert len(norms) == 1

    def test_too_few_segments_rejected(self):
        rng = RngStream(14)
        losses = [np.asarray(rng.normal(2)) for _ in range(16)]
        with pytest.raises(PabloError):
            piecewise_hindsight_comparator(losses, 1, 4.0)


class TestSwitchingComparator:
    def test_lengths_and_structure(self):
        u = switching_comparator([([1.0, 0.0], 4), ([0.0, -1.0], 4)], 8)
        assert len(u) == 8
        first = {tuple(p) for p in u[:4]}
        second = {tuple(p) for p in u[4:]}
        assert first == {(1.0, 0.0)} and second == {(0.0, -1.0)}

    def test_length_mismatch_rejected(self):
        with pytest.raises(PabloError):
            switching_comparator([([1.0], 3), ([0.0], 3)], 8)
