import numpy as np
import pytest

from eigenlfm import kernels as K
from eigenlfm.errors import InvalidParameterError, NotDifferentiableError

ALL_VARIANTS = [
    K.Matern(0.5, 1.3, 0.8),
    K.Matern(1.5, 0.7, 2.0),
    K.PeriodicMatern(0.5, 2.0, 0.5, 7.0),
    K.PeriodicMatern(1.5, 1.0, 0.8, 3.0),
    K.PeriodicSE(3.0, 0.7),
    K.SquaredExponential(1.0, 10.0),
    K.ContinuousQuasi(1.2, 4.0),
    K.StepQuasi(1.5, 2.0, 5.0),
    K.WienerStepQuasi(1.0, 0.5, 5.0),
    K.Product(K.PeriodicMatern(0.5, 1.0, 0.5, 7.0), K.ContinuousQuasi(1.0, 20.0)),
    K.NonStatPeriodic(1.0, 2.0, 10.0, 0.8),
]


def test_phase_values():
    assert K.phase(0.0, 10.0) == 0.0
    assert K.phase(5.0, 10.0) == pytest.approx(1.0)
    assert K.phase(2.5, 10.0) == pytest.approx(0.70711, abs=5e-6)


def test_phase_periodicity_and_zeros():
    taus = np.linspace(-30.0, 30.0, 101)
    np.testing.assert_allclose(K.phase(taus + 10.0, 10.0), K.phase(taus, 10.0),
                               atol=1e-12)
    for n in range(-3, 4):
        assert K.phase(n * 10.0, 10.0) == pytest.approx(0.0, abs=1e-12)


def test_phase_invalid():
    with pytest.raises(InvalidParameterError):
        K.phase(1.0, 0.0)
    with pytest.raises(InvalidParameterError):
        K.phase(np.inf, 10.0)


def test_matern12_value():
    assert K.eval_kernel(K.Matern(0.5, 1.0, 1.0), 0.0, 1.0) == pytest.approx(
        np.exp(-1.0), rel=1e-12
    )


def test_periodic_matern_full_period():
    k = K.PeriodicMatern(0.5, 2.0, 0.5, 7.0)
    for t in [0.0, 1.3, -4.2]:
        assert K.eval_kernel(k, t, t + 7.0) == pytest.approx(4.0, rel=1e-12)


def test_periodic_se_unit_diagonal():
    k = K.PeriodicSE(3.0, 0.7)
    for t in [0.0, 0.31, 12.7]:
        assert K.eval_kernel(k, t, t) == pytest.approx(1.0)


def test_wqm_values():
    k = K.WienerStepQuasi(1.0, 2.0, 1.0)
    assert K.eval_kernel(k, 0.5, 2.5) == pytest.approx(1.0)
    # diagonal is xi0 + C(t) xi
    assert K.eval_kernel(k, 2.5, 2.5) == pytest.approx(1.0 + 2 * 2.0)


def test_sqm_within_cycle_exact():
    k = K.StepQuasi(1.5, 2.0, 5.0)
    assert K.eval_kernel(k, 0.3, 4.9) == 1.5**2
    assert K.eval_kernel(k, 5.1, 9.7) == 1.5**2


def test_product_is_pointwise_product():
    a = K.PeriodicMatern(0.5, 1.0, 0.5, 7.0)
    b = K.ContinuousQuasi(1.3, 9.0)
    k = K.Product(a, b)
    rng = np.random.default_rng(0)
    t, tp = rng.uniform(-20, 20, 50), rng.uniform(-20, 20, 50)
    np.testing.assert_array_equal(
        K.eval_kernel(k, t, tp), K.eval_kernel(a, t, tp) * K.eval_kernel(b, t, tp)
    )


@pytest.mark.parametrize("kernel", ALL_VARIANTS)
def test_symmetry(kernel):
    rng = np.random.default_rng(7)
    t, tp = rng.uniform(0, 40, 200), rng.uniform(0, 40, 200)
    np.testing.assert_array_equal(
        K.eval_kernel(kernel, t, tp), K.eval_kernel(kernel, tp, t)
    )


@pytest.mark.parametrize(
    "kernel,period",
    [
        (K.PeriodicMatern(0.5, 2.0, 0.5, 7.0), 7.0),
        (K.PeriodicSE(3.0, 0.7), 0.7),
        (K.NonStatPeriodic(1.0, 2.0, 10.0, 0.8), 10.0),
    ],
)
def test_shift_periodicity(kernel, period):
    rng = np.random.default_rng(3)
    t, tp = rng.uniform(0, 3 * period, 100), rng.uniform(0, 3 * period, 100)
    np.testing.assert_allclose(
        K.eval_kernel(kernel, t + period, tp + period),
        K.eval_kernel(kernel, t, tp),
        rtol=0, atol=1e-13,
    )


@pytest.mark.parametrize("kernel", ALL_VARIANTS)
def test_psd_spot_check(kernel):
    rng = np.random.default_rng(11)
    for _ in range(50):
        pts = np.sort(rng.uniform(0, 25, rng.integers(2, 33)))
        gram = K.eval_matrix(kernel, pts, pts)
        eigs = np.linalg.eigvalsh(0.5 * (gram + gram.T))
        assert eigs.min() >= -1e-8 * np.trace(gram)


def test_eval_matrix_values_and_transpose():
    k = K.Matern(0.5, 1.0, 1.0)
    np.testing.assert_array_equal(K.eval_matrix(k, [0.0], [0.0]), [[1.0]])
    got = K.eval_matrix(k, [0.0, 1.0], [0.0, 1.0])
    e = np.exp(-1.0)
    np.testing.assert_allclose(got, [[1.0, e], [e, 1.0]], rtol=1e-14)
    for kernel in ALL_VARIANTS:
        a = np.linspace(0.0, 9.0, 4)
        b = np.linspace(1.0, 5.0, 3)
        np.testing.assert_array_equal(
            K.eval_matrix(kernel, a, b), K.eval_matrix(kernel, b, a).T
        )


def test_eval_matrix_empty():
    with pytest.raises(InvalidParameterError):
        K.eval_matrix(K.Matern(0.5, 1.0, 1.0), [], [0.0])


def test_second_derivative_at_zero_phase():
    sigma, ell, period, alpha = 1.3, 2.0, 10.0, 0.8
    k = K.NonStatPeriodic(sigma, ell, period, alpha)
    expected = (3.0 * np.pi**2 * sigma**2 / (period**2 * ell**3)) * (-ell) + sigma**2 * (
        -2.0 * np.pi**2 * alpha / period**2
    )
    assert K.second_time_derivative(k, 0.0, 0.0) == pytest.approx(expected, rel=1e-12)
    # same value one full period apart (tau = -period, both phases zero)
    assert K.second_time_derivative(k, 0.0, period) == pytest.approx(expected, rel=1e-12)


def test_second_derivative_matches_finite_differences():
    k = K.NonStatPeriodic(1.0, 2.0, 10.0, 0.8)
    rng = np.random.default_rng(5)
    t = rng.uniform(0, 10, 100)
    tp = rng.uniform(0, 10, 100)
    h = 1e-4
    fd = (
        K.eval_kernel(k, t + h, tp)
        - 2.0 * K.eval_kernel(k, t, tp)
        + K.eval_kernel(k, t - h, tp)
    ) / h**2
    cf = K.second_time_derivative(k, t, tp)
    assert np.max(np.abs(fd - cf) / np.maximum(1e-3, np.abs(cf))) < 1e-4


def test_first_derivative_matches_finite_differences():
    k = K.NonStatPeriodic(1.0, 2.0, 10.0, 0.8)
    rng = np.random.default_rng(6)
    t = rng.uniform(0, 10, 50)
    tp = rng.uniform(0, 10, 50)
    h = 1e-5
    fd = (K.eval_kernel(k, t + h, tp) - K.eval_kernel(k, t - h, tp)) / (2 * h)
    cf = K.first_time_derivative(k, t, tp)
    assert np.max(np.abs(fd - cf)) < 1e-6 * max(1.0, np.max(np.abs(cf)))


def test_second_derivative_periodic_in_t():
    k = K.NonStatPeriodic(1.0, 2.0, 10.0, 0.8)
    t = np.linspace(0, 10, 37)
    np.testing.assert_allclose(
        K.second_time_derivative(k, t + 10.0, 3.7 + 10.0),
        K.second_time_derivative(k, t, 3.7),
        atol=1e-12,
    )


def test_second_derivative_unsupported_variant():
    with pytest.raises(NotDifferentiableError):
        K.second_time_derivative(K.PeriodicSE(3.0, 0.7), 0.0, 0.0)


@pytest.mark.parametrize(
    "bad",
    [
        lambda: K.Matern(1.0, 1.0, 1.0),        # unsupported order
        lambda: K.Matern(0.5, -1.0, 1.0),
        lambda: K.PeriodicMatern(0.5, 1.0, 0.0, 7.0),
        lambda: K.WienerStepQuasi(-0.1, 1.0, 5.0),
        lambda: K.WienerStepQuasi(1.0, 0.0, 5.0),
        lambda: K.NonStatPeriodic(1.0, 1.0, 10.0, 0.0),
        lambda: K.StepQuasi(1.0, 1.0, -2.0),
    ],
)
def test_invalid_parameters(bad):
    with pytest.raises(InvalidParameterError):
        bad()


def test_config_roundtrip():
    for kernel in ALL_VARIANTS:
        if isinstance(kernel, K.Product):
            continue
        back = K.kernel_from_config(K.kernel_to_config(kernel))
        assert back == kernel
    prod = K.Product(K.Matern(0.5, 1.0, 1.0), K.StepQuasi(1.0, 2.0, 5.0))
    assert K.kernel_from_config(K.kernel_to_config(prod)) == prod


def test_config_errors():
    with pytest.raises(InvalidParameterError):
        K.kernel_from_config({"variant": "nope"})
    with pytest.raises(InvalidParameterError):
        K.kernel_from_config({"variant": "matern", "params": {"bogus": 1.0}})
    with pytest.raises(InvalidParameterError):
        K.kernel_from_config({})
