import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cylshear.frame import analyze
from cylshear.regularizer import (
    RegularizerSpec,
    WeightScheme,
    bregman_coeff,
    bregman_distance,
    default_beta,
    grad_R,
    prox_weighted_l1,
    smoothness_norm,
    subgrad_R_p1,
    weight_sequence,
    _subgrad_sign,
)

SHAPE = (16, 16, 8)


def spec_for(p, alpha=1.0, beta=None, transform="cylindrical-shearlet"):
    return RegularizerSpec(transform, WeightScheme(p, beta), alpha, scales=1)


class TestWeights:
    def test_unit_weight_cancellations(self):
        # exponent j*beta + (5/2) j (p/2 - 1) cancels at beta = (5/4)(2-p)
        assert np.allclose(weight_sequence(1.5, 0.625, 4), 1.0, atol=1e-15)
        assert np.allclose(weight_sequence(1.0, 1.25, 4), 1.0, atol=1e-15)
        assert default_beta(1.5) == 0.625
        assert default_beta(1.0) == 1.25

    def test_hand_evaluated_weight(self):
        # j=1, p=3/2, beta=2: exponent 2 + (5/2)(-1/4) = 1.375
        w = weight_sequence(1.5, 2.0, 2)
        assert abs(w[1] - 2.0 ** 1.375) <= 1e-12

    def test_coercive_regime_weights_at_least_one(self):
        for p in (1.0, 1.3, 1.8):
            beta = default_beta(p) + 0.3
            assert weight_sequence(p, beta, 5).min() >= 1.0

    def test_p_validation(self):
        with pytest.raises(ValueError):
            WeightScheme(0.0)
        with pytest.raises(ValueError):
            WeightScheme(2.5)


class TestSmoothnessNorm:
    def test_zero(self):
        assert smoothness_norm(np.zeros(SHAPE), spec_for(1.5)) == 0.0

    def test_p2_unit_weights_is_half_squared_norm(self, rng):
        f = rng.standard_normal(SHAPE)
        r = smoothness_norm(f, spec_for(2.0))
        expect = 0.5 * float(np.vdot(f, f).real)
        assert abs(r - expect) / expect <= 1e-10

    def test_positive_definite(self, rng):
        f = rng.standard_normal(SHAPE)
        assert smoothness_norm(f, spec_for(1.2)) > 0.0

    @settings(max_examples=10, deadline=None)
    @given(t=st.sampled_from([2.0, 10.0]), p=st.sampled_from([1.2, 1.5, 2.0]))
    def test_p_homogeneity(self, t, p):
        rng = np.random.default_rng(99)
        f = rng.standard_normal(SHAPE)
        spec = spec_for(p)
        lhs = smoothness_norm(t * f, spec)
        rhs = t ** p * smoothness_norm(f, spec)
        assert abs(lhs - rhs) / rhs <= 1e-12

    @settings(max_examples=10, deadline=None)
    @given(theta=st.floats(0.0, 1.0), seed=st.integers(0, 10))
    def test_convexity_sampling(self, theta, seed):
        rng = np.random.default_rng(seed)
        f, g = rng.standard_normal((2,) + SHAPE)
        spec = spec_for(1.5)
        lhs = smoothness_norm(theta * f + (1 - theta) * g, spec)
        rhs = theta * smoothness_norm(f, spec) \
            + (1 - theta) * smoothness_norm(g, spec)
        assert lhs <= rhs + 1e-12 * max(1.0, rhs)

    def test_coercivity_chain(self, rng, bank_16):
        # ||f||_2 <= ||K f||_p for p <= 2 and unit weights
        for p in (1.2, 1.6, 2.0):
            f = rng.standard_normal(SHAPE)
            f *= 2.0 / np.linalg.norm(f)  # ||f|| >= 1
            c = analyze(f, bank_16)
            lp = sum(np.sum(np.abs(b) ** p) for b in c.blocks.values()) ** (1 / p)
            assert np.linalg.norm(f) <= lp + 1e-12


class TestGradient:
    def test_zero_gradient_at_zero(self):
        g = grad_R(np.zeros(SHAPE), spec_for(1.5))
        assert np.all(g == 0.0)

    def test_rejects_p_at_most_one(self, rng):
        with pytest.raises(ValueError):
            grad_R(rng.standard_normal(SHAPE), spec_for(1.0))

    @pytest.mark.parametrize("p", [1.2, 1.5, 1.9])
    def test_matches_central_differences(self, p):
        spec = spec_for(p)
        eps = 1e-5
        f = np.random.default_rng(2024).standard_normal(SHAPE)
        grad = grad_R(f, spec)
        for s in range(20):
            h = np.random.default_rng(1000 + s).standard_normal(SHAPE)
            h /= np.linalg.norm(h)  # unit direction
            fd = (smoothness_norm(f + eps * h, spec)
                  - smoothness_norm(f - eps * h, spec)) / (2 * eps)
            an = float(np.vdot(grad, h).real)
            assert abs(fd - an) / abs(fd) <= 1e-5

    def test_p2_gradient_is_identity(self, rng):
        f = rng.standard_normal(SHAPE)
        assert np.abs(grad_R(f, spec_for(2.0)) - f).max() <= 1e-10


class TestSubgradientSelection:
    def test_sign_at_nonzero(self):
        c = np.array([3.0, -2.0, 0.5])
        assert np.array_equal(_subgrad_sign(c, np.zeros(3)), [1.0, -1.0, 1.0])

    def test_zero_everywhere_zero_reference(self):
        assert np.all(_subgrad_sign(np.zeros(4), np.zeros(4)) == 0.0)

    def test_scalar_clip_case(self):
        # coefficient 0, reference value 0.4: selection 0.4 (inside [-1, 1])
        assert _subgrad_sign(np.array([0.0]), np.array([0.4]))[0] == 0.4
        assert _subgrad_sign(np.array([0.0]), np.array([2.5]))[0] == 1.0

    def test_volume_subgradient_membership(self, rng):
        # an element v of the subdifferential satisfies
        # R(g) >= R(f) + <v, g - f> for any g
        spec = spec_for(1.0)
        f = np.abs(rng.standard_normal(SHAPE))
        v = subgrad_R_p1(f, rng.standard_normal(SHAPE), spec)
        for _ in range(3):
            g = rng.standard_normal(SHAPE)
            lhs = smoothness_norm(g, spec)
            rhs = smoothness_norm(f, spec) + float(np.vdot(v, g - f).real)
            assert lhs >= rhs - 1e-8


class TestBregman:
    def test_zero_at_equal_arguments(self, rng):
        f = rng.standard_normal(SHAPE)
        for p in (1.0, 1.5):
            assert bregman_distance(f, f, spec_for(p)) == 0.0

    def test_scalar_model_hand_value(self):
        # p = 3/2, c_hat = 1, c_dag = 0, unit weight: <1 - 0, 1 - 0> = 1
        assert bregman_coeff(np.array([1.0]), np.array([0.0]), 1.0, 1.5) == 1.0

    def test_symmetry_and_nonnegativity(self, rng):
        for p in (1.0, 1.3, 1.8):
            spec = spec_for(p)
            f, g = rng.standard_normal((2,) + SHAPE)
            d1 = bregman_distance(f, g, spec)
            d2 = bregman_distance(g, f, spec)
            assert d1 >= 0.0
            assert abs(d1 - d2) <= 1e-9 * max(1.0, d1)

    def test_p1_selection_consistency(self, rng):
        # when no coefficient vanishes the p=1 distance is the plain
        # sign-difference pairing
        spec = spec_for(1.0)
        f, g = rng.standard_normal((2,) + SHAPE)
        d = bregman_distance(f, g, spec)
        assert d > 0.0


class TestProx:
    def test_zero_input(self, bank_16):
        c = analyze(np.zeros(SHAPE), bank_16)
        out = prox_weighted_l1(c, 0.5, WeightScheme(1.0))
        assert out.energy() == 0.0

    def test_threshold_region(self, bank_16, rng):
        c = analyze(rng.standard_normal(SHAPE), bank_16)
        peak = max(np.abs(b).max() for b in c.blocks.values())
        out = prox_weighted_l1(c, 2.0 * peak, WeightScheme(1.0))
        assert out.energy() == 0.0

    def test_soft_threshold_formula(self, bank_16):
        c = analyze(np.zeros(SHAPE), bank_16)
        key = next(iter(c.blocks))
        c.blocks[key][0, 0, 0] = 2.0
        out = prox_weighted_l1(c, 0.5, WeightScheme(1.0))
        assert out.blocks[key][0, 0, 0] == 1.5

    def test_rejects_nonpositive_tau(self, bank_16):
        c = analyze(np.zeros(SHAPE), bank_16)
        with pytest.raises(ValueError):
            prox_weighted_l1(c, 0.0, WeightScheme(1.0))
