import math

import numpy as np
import pytest

from eigenlfm import eigenbasis as eb
from eigenlfm import kernels as K
from eigenlfm import lfm, lti
from eigenlfm.errors import InvalidParameterError
from eigenlfm.filtering import (
    GaussianState,
    ParticleSet,
    Particle,
    log_likelihood,
    predict,
    rbpf_predict_day,
    update,
)


def test_predict_identity():
    state = GaussianState(np.array([1.0, -2.0]), np.eye(2), 0.0)
    out = predict(state, np.eye(2), np.zeros((2, 2)))
    np.testing.assert_array_equal(out.mean, state.mean)
    np.testing.assert_array_equal(out.cov, state.cov)


def test_predict_scalar_variance():
    state = GaussianState(np.array([0.0]), np.array([[1.0]]), 0.0)
    out = predict(state, np.array([[0.5]]), np.array([[0.75]]))
    assert out.cov[0, 0] == pytest.approx(1.0)


def test_predict_input_term():
    state = GaussianState(np.zeros(3), np.eye(3), 0.0)
    out = predict(state, np.eye(3), np.zeros((3, 3)), np.array([1.0, 0.0, 0.0]))
    np.testing.assert_array_equal(out.mean, [1.0, 0.0, 0.0])


def test_predict_dimension_mismatch():
    state = GaussianState(np.zeros(3), np.eye(3), 0.0)
    with pytest.raises(InvalidParameterError):
        predict(state, np.eye(2), np.zeros((2, 2)))


def test_update_scalar():
    state = GaussianState(np.array([0.0]), np.array([[1.0]]), 0.0)
    res = update(state, [[1.0]], [[1.0]], [2.0])
    assert res.state.mean[0] == pytest.approx(1.0)
    assert res.state.cov[0, 0] == pytest.approx(0.5)
    assert res.innovation[0] == pytest.approx(2.0)
    assert res.innovation_cov[0, 0] == pytest.approx(2.0)


def test_update_uninformative():
    state = GaussianState(np.array([0.7]), np.array([[1.3]]), 0.0)
    res = update(state, [[1.0]], [[1e12]], [100.0])
    assert res.state.mean[0] == pytest.approx(0.7, abs=1e-6)
    assert res.state.cov[0, 0] == pytest.approx(1.3, abs=1e-6)


def test_update_zero_innovation_contracts():
    state = GaussianState(np.array([0.7]), np.array([[1.3]]), 0.0)
    res = update(state, [[1.0]], [[0.5]], [0.7])
    assert res.state.mean[0] == pytest.approx(0.7)
    assert res.state.cov[0, 0] < 1.3


def test_update_trace_never_grows():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = rng.standard_normal((4, 4))
        state = GaussianState(rng.standard_normal(4), a @ a.T + 0.1 * np.eye(4), 0.0)
        h = rng.standard_normal((2, 4))
        res = update(state, h, np.diag([0.3, 0.9]), rng.standard_normal(2))
        assert np.trace(res.state.cov) <= np.trace(state.cov) + 1e-10


def test_update_joseph_form_ill_conditioned():
    state = GaussianState(np.zeros(2), np.diag([1.0, 1e-8]), 0.0)
    h = np.array([[1e4, 1.0]])
    res = update(state, h, [[1e-4]], [3.0])
    eigs = np.linalg.eigvalsh(res.state.cov)
    assert eigs.min() >= -1e-10 * np.trace(res.state.cov)


def test_log_likelihood_single_measurement():
    state = GaussianState(np.array([0.0]), np.array([[1.0]]), 0.0)
    res = update(state, [[1.0]], [[1.0]], [0.0])
    assert log_likelihood([res]) == pytest.approx(-0.5 * math.log(4.0 * math.pi))
    assert res.log_density == pytest.approx(-1.26551, abs=5e-6)


def test_log_likelihood_block_independence():
    state2 = GaussianState(np.array([0.0, 1.0]), np.diag([1.0, 2.0]), 0.0)
    joint = update(state2, np.eye(2), np.diag([0.5, 0.25]), [0.3, 0.6])
    a = update(GaussianState(np.array([0.0]), [[1.0]], 0.0), [[1.0]], [[0.5]], [0.3])
    b = update(GaussianState(np.array([1.0]), [[2.0]], 0.0), [[1.0]], [[0.25]], [0.6])
    assert joint.log_density == pytest.approx(a.log_density + b.log_density, rel=1e-12)


def test_log_likelihood_empty():
    with pytest.raises(InvalidParameterError):
        log_likelihood([])


def test_particle_set_weights():
    state = GaussianState(np.zeros(1), np.eye(1), 0.0)
    ParticleSet([Particle(state, 0, 0.5), Particle(state, 1, 0.5)])
    with pytest.raises(InvalidParameterError):
        ParticleSet([Particle(state, 0, 0.6), Particle(state, 1, 0.5)])


def _thermal_toy(beta: float):
    model = lfm.assemble(
        lfm.TargetModel(np.array([[-0.01]])),
        nonperiodic=[
            lfm.NonPeriodicForce(lti.matern32_block(2.0, 600.0), np.array([0.01]))
        ],
    )
    binary = np.zeros(model.layout.dim_za)
    binary[0] = beta
    model.binary_input = binary
    return model


def test_rbpf_validation():
    model = _thermal_toy(0.1)
    init = lfm.initial_state(model, [1.0], [[0.01]])
    with pytest.raises(InvalidParameterError):
        rbpf_predict_day(model, init, lambda t: 0.0, 0, 10.0, 100.0, 0)
    with pytest.raises(InvalidParameterError):
        rbpf_predict_day(model, init, lambda t: float("nan"), 4, 10.0, 100.0, 0)


def test_rbpf_degenerate_matches_plain_kf():
    # setpoint at -inf: the heater never fires; with sampling disabled and a
    # single particle the run is exactly the deterministic KF with no input
    model = _thermal_toy(0.1)
    init = lfm.initial_state(model, [1.0], [[0.01]])
    recs = rbpf_predict_day(
        model, init, lambda t: -np.inf, 1, 10.0, 200.0, 0, sample_condition=False
    )
    state = init
    for r in recs:
        tr = lfm.discretize(model, state.t, r["t"])
        state = predict(state, tr.transition, tr.noise, t_new=r["t"])
        assert r["mean"] == pytest.approx(state.mean[0], abs=1e-12)
        assert r["var"] == pytest.approx(state.cov[0, 0], abs=1e-12)


def test_rbpf_heater_irrelevant_when_beta_zero():
    # beta = 0: particles are identically distributed; the mixture variance
    # sits in a Monte-Carlo band around the single-filter variance
    model = _thermal_toy(0.0)
    init = lfm.initial_state(model, [1.0], [[0.01]])
    recs = rbpf_predict_day(model, init, lambda t: 1.0, 64, 10.0, 400.0, 3)
    state = init
    for r in recs:
        tr = lfm.discretize(model, state.t, r["t"])
        state = predict(state, tr.transition, tr.noise, t_new=r["t"])
    v_kf = state.cov[0, 0]
    # 3-sigma band for a variance estimate from 64 draws
    assert abs(recs[-1]["var"] - v_kf) < 3.0 * v_kf * math.sqrt(2.0 / 64)


def test_rbpf_bit_reproducible():
    model = _thermal_toy(0.1)
    init = lfm.initial_state(model, [0.0], [[0.04]])
    a = rbpf_predict_day(model, init, lambda t: 0.5, 16, 10.0, 300.0, 42)
    b = rbpf_predict_day(model, init, lambda t: 0.5, 16, 10.0, 300.0, 42)
    assert all(
        ra["mean"] == rb["mean"] and ra["var"] == rb["var"] for ra, rb in zip(a, b)
    )
    c = rbpf_predict_day(model, init, lambda t: 0.5, 16, 10.0, 300.0, 43)
    assert any(ra["mean"] != rc["mean"] for ra, rc in zip(a, c))


def test_rbpf_mixture_mean_variance_shrinks_with_particles():
    # across seeds, the spread of the final mixture mean decreases as the
    # particle count grows (up to sampling noise)
    model = _thermal_toy(0.2)
    init = lfm.initial_state(model, [0.0], [[0.25]])
    spreads = []
    for n_particles in (16, 64, 256):
        finals = [
            rbpf_predict_day(model, init, lambda t: 0.3, n_particles, 10.0, 300.0, s)[-1][
                "mean"
            ]
            for s in range(20)
        ]
        spreads.append(np.var(finals))
    assert spreads[2] < spreads[0]
    assert spreads[1] < 4.0 * spreads[0]  # allow noise, but no blow-up
