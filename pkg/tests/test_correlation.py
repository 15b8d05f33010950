import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ris_icas.channel import ChannelSet, PhaseShiftVector, sample_channel_set
from ris_icas.correlation import (
    AUTO_A,
    AUTO_E,
    CROSS_AE,
    CorrelationModel,
    analytic_correlation_model,
    correlation_value,
    mc_estimate_correlations,
)


def random_psd(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * (m @ m.conj().T) / n


def batched_sampler(n, rho_e, seed):
    rng = np.random.default_rng(seed)
    return lambda k: sample_channel_set(n, rho_e, rng, size=k)


def test_analytic_model_independent_eve():
    m = analytic_correlation_model(2, 0.0)
    np.testing.assert_array_equal(m.R_AE, np.zeros((2, 2)))
    assert m.Rd_AE == 0


def test_analytic_model_structure():
    m = analytic_correlation_model(3, 0.5)
    np.testing.assert_array_equal(m.R_A, np.eye(3))
    np.testing.assert_array_equal(m.R_E, np.eye(3))
    np.testing.assert_array_equal(m.R_AE, 0.5 * np.eye(3))
    assert (m.Rd_A, m.Rd_E, m.Rd_AE) == (1.0, 1.0, 0.5)


@pytest.mark.parametrize("bad", [dict(n_elements=0), dict(n_elements=2, eve_spatial_rho=1.2)])
def test_analytic_model_rejects(bad):
    with pytest.raises(ValueError):
        analytic_correlation_model(**bad)


def test_mc_single_sample_is_rank_one_outer_product():
    h_br = np.array([[1 + 1j, 2.0]])
    h_ra = np.array([[0.5, -1j]])
    h_re = np.array([[1.0, 1.0]])
    stub = ChannelSet(h_br, h_ra, h_re, np.array([1j]), np.array([2.0]), eve_spatial_rho=0.0)
    est = mc_estimate_correlations(lambda k: stub, 1)
    a = h_ra[0] * h_br[0]
    e = h_re[0] * h_br[0]
    np.testing.assert_allclose(est.R_A, np.outer(a.conj(), a), atol=1e-15)
    np.testing.assert_allclose(est.R_AE, np.outer(e.conj(), a), atol=1e-15)
    assert est.Rd_AE == pytest.approx(1j * 2.0)
    assert est.Rd_E == pytest.approx(4.0)


def test_mc_rejects_zero_samples():
    with pytest.raises(ValueError):
        mc_estimate_correlations(batched_sampler(2, 0.5, 0), 0)


@pytest.mark.parametrize("rho_e", [0.5, 1.0])
def test_mc_matches_analytic(rho_e):
    est = mc_estimate_correlations(batched_sampler(3, rho_e, 1), 1_000_000)
    ref = analytic_correlation_model(3, rho_e)
    for name in ("R_A", "R_E", "R_AE"):
        assert np.max(np.abs(getattr(est, name) - getattr(ref, name))) < 0.01
    for name in ("Rd_A", "Rd_E", "Rd_AE"):
        assert abs(getattr(est, name) - getattr(ref, name)) < 0.01


def test_mc_error_shrinks_with_samples():
    ref = analytic_correlation_model(2, 0.5)

    def err(n, seed):
        est = mc_estimate_correlations(batched_sampler(2, 0.5, seed), n)
        return np.max(np.abs(est.R_A - ref.R_A))

    small = np.mean([err(10_000, s) for s in range(8)])
    large = np.mean([err(160_000, s + 100) for s in range(8)])
    # sixteen times the samples: error should drop by about 4
    assert 2.0 < small / large < 8.0


def test_conjugation_convention_matches_realized_products():
    # v^H R_AE v + Rd_AE must equal E[h_A conj(h_E)] for the realized channels
    rng = np.random.default_rng(3)
    n = 3
    mix = np.array([[1.0, 0.3j, 0], [0, 1.0, 0.2], [0.1, 0, 1.0]])
    base = sample_channel_set(n, 0.6, rng, size=400_000)
    h_br = base.h_br @ mix.T
    ch = ChannelSet(h_br, base.h_ra, base.h_re, base.h_ba, base.h_be, eve_spatial_rho=0.6)
    est = mc_estimate_correlations(lambda k: ch, 400_000, chunk=400_000)
    v = PhaseShiftVector(rng.uniform(0, 2 * np.pi, n))
    ris_a = ch.equivalent_alice(v) - ch.h_ba
    ris_e = ch.equivalent_eve(v) - ch.h_be
    # identity holds sample-by-sample once the ris/direct cross terms are dropped
    exact = np.mean(ris_a * np.conj(ris_e)) + np.mean(ch.h_ba * np.conj(ch.h_be))
    assert abs(correlation_value(est, v, CROSS_AE) - exact) < 1e-10
    exact_auto = np.mean(np.abs(ris_a) ** 2) + np.mean(np.abs(ch.h_ba) ** 2)
    assert correlation_value(est, v, AUTO_A) == pytest.approx(exact_auto, rel=1e-10)
    # and the cross terms average out
    total = np.mean(ch.equivalent_alice(v) * np.conj(ch.equivalent_eve(v)))
    assert abs(correlation_value(est, v, CROSS_AE) - total) < 0.03


def test_model_validation():
    eye = np.eye(2)
    with pytest.raises(ValueError):
        CorrelationModel(np.array([[1, 1j], [1j, 1]]), eye, eye, 1, 1, 0)   # not Hermitian
    with pytest.raises(ValueError):
        CorrelationModel(np.diag([1.0, -1.0]), eye, eye, 1, 1, 0)          # not PSD
    with pytest.raises(ValueError):
        CorrelationModel(eye, eye, eye, 1, 1, 2.0)                         # direct Cauchy-Schwarz
    with pytest.raises(ValueError):
        CorrelationModel(eye, eye, eye, 1, 1, 0, noise_variance=0.0)
    with pytest.raises(ValueError):
        CorrelationModel(eye, np.eye(3), eye, 1, 1, 0)


def test_model_dict_round_trip():
    rng = np.random.default_rng(4)
    m = CorrelationModel(random_psd(rng, 3), random_psd(rng, 3), rng.standard_normal((3, 3)) * 1j,
                         2.0, 1.5, 0.3 - 0.4j, 0.7)
    back = CorrelationModel.from_dict(m.to_dict())
    for name in ("R_A", "R_E", "R_AE"):
        np.testing.assert_array_equal(getattr(back, name), getattr(m, name))
    assert (back.Rd_A, back.Rd_E, back.Rd_AE, back.noise_variance) == (2.0, 1.5, 0.3 - 0.4j, 0.7)


# ---------------------------------------------------------------- correlation_value

@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_identity_value_is_n_plus_one(n):
    m = analytic_correlation_model(n, 0.5)
    v = PhaseShiftVector(np.random.default_rng(n).uniform(0, 2 * np.pi, n))
    assert correlation_value(m, v, AUTO_A) == pytest.approx(n + 1, abs=1e-12)
    assert correlation_value(m, v, CROSS_AE) == pytest.approx(0.5 * (n + 1), abs=1e-12)


def test_independent_cross_value_is_zero():
    m = analytic_correlation_model(4, 0.0)
    assert correlation_value(m, PhaseShiftVector(np.zeros(4)), CROSS_AE) == 0


def test_value_matches_double_loop():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = int(rng.integers(1, 7))
        R = random_psd(rng, n)
        m = CorrelationModel(R, R, R, 0.8, 0.8, 0.1)
        v = PhaseShiftVector(rng.uniform(0, 2 * np.pi, n))
        c = v.coefficients
        brute = sum(np.conj(c[i]) * R[i, j] * c[j] for i in range(n) for j in range(n)) + 0.8
        got = correlation_value(m, v, AUTO_A)
        assert abs(got - brute.real) <= 1e-12 * abs(brute)


def test_value_errors():
    m = analytic_correlation_model(3, 0.5)
    with pytest.raises(ValueError):
        correlation_value(m, PhaseShiftVector(np.zeros(2)), AUTO_A)
    with pytest.raises(ValueError):
        correlation_value(m, PhaseShiftVector(np.zeros(3)), "auto_B")


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_auto_values_real_nonnegative_and_rayleigh_bounded(n, seed):
    rng = np.random.default_rng(seed)
    R = random_psd(rng, n, scale=rng.uniform(0.1, 5.0))
    m = CorrelationModel(R, R, 0.5 * R, 0.5, 0.5, 0.25)
    v = PhaseShiftVector(rng.uniform(0, 2 * np.pi, n))
    for which in (AUTO_A, AUTO_E):
        val = correlation_value(m, v, which)
        assert isinstance(val, float) and val >= 0
        assert val <= n * np.linalg.eigvalsh(R).max() + 0.5 + 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
def test_cross_cauchy_schwarz_for_analytic_model(n, rho_e, seed):
    m = analytic_correlation_model(n, rho_e)
    v = PhaseShiftVector(np.random.default_rng(seed).uniform(0, 2 * np.pi, n))
    cross = correlation_value(m, v, CROSS_AE)
    assert abs(cross) ** 2 <= correlation_value(m, v, AUTO_A) * correlation_value(m, v, AUTO_E) + 1e-9
