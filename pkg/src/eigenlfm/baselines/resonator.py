"""Second-order resonator basis models.

A resonator obeys d^2 psi/dt^2 = A(t) psi + B dpsi/dt (+ white noise).  Two
uses are covered here:

* a time-varying coefficient profile A(t) = -(2 pi f(t))^2 derived from an
  eigenfunction, which makes the resonator trajectory coincide with that
  eigenfunction (the offset trick keeps the profile bounded near zeros);
* a constant-coefficient bank of resonators plus a bias, fitted to data by
  maximum likelihood through a Kalman filter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .. import eigenbasis as eb
from .. import learn, lti
from ..errors import InvalidParameterError, NumericError
from ..filtering import GaussianState, log_likelihood, predict, update

__all__ = [
    "ResonatorModel",
    "resonator_block",
    "resonator_frequency_profile",
    "resonator_integrate",
    "resonator_fit",
]


@dataclass
class ResonatorModel:
    """Constant-coefficient resonator bank: one (frequency, decay) pair per
    resonator plus a constant bias state."""

    frequencies: np.ndarray   # (J,)
    decays: np.ndarray        # (J,) decay coefficients B_j <= 0
    diffusion: float          # white-noise spectral density per resonator
    noise_variance: float     # observation noise of the fitted series
    init_variance: float      # prior variance budget for the states

    @property
    def n_resonators(self) -> int:
        return self.frequencies.size


def resonator_block(frequency: float, decay: float, diffusion: float) -> lti.LtiSde:
    """LTI block of one resonator: state (psi, dpsi/dt)."""
    if decay > 0.0:
        raise InvalidParameterError("decay coefficient must be <= 0")
    return lti.LtiSde(
        drift=np.array([[0.0, 1.0], [-((2.0 * np.pi * frequency) ** 2), decay]]),
        noise=np.array([[0.0], [1.0]]),
        diffusion=diffusion,
        extract=np.array([1.0, 0.0]),
    )


def resonator_frequency_profile(
    basis: eb.EigenBasis, j: int, grid, offset: float
) -> np.ndarray:
    """Squared angular frequency profile (2 pi f)^2(t) = -phi''(t) / (phi(t) + offset).

    Adding the offset before forming the ratio keeps the profile bounded away
    from the zeros of the eigenfunction; the integrated resonator then tracks
    phi + offset, and subtracting the offset recovers the eigenfunction.
    Negative profile values are legitimate and model basis decay.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    shifted = eb.eigenfunction(basis, j, grid) + offset
    if np.min(np.abs(shifted)) < 1e-6:
        raise InvalidParameterError(
            "offset too small: shifted eigenfunction approaches zero on the grid"
        )
    second = eb.eigenfunction_second_derivative(basis, j, grid)
    return -second / shifted


def _step_matrix(coeff_a: float, coeff_b: float, dt: float) -> np.ndarray:
    """Exact one-step propagator of psi'' = a psi + b psi'."""
    return scipy.linalg.expm(np.array([[0.0, 1.0], [coeff_a, coeff_b]]) * dt)


def resonator_integrate(
    grid,
    *,
    profile=None,
    coeff_a: float | None = None,
    coeff_b: float = 0.0,
    psi0: float,
    dpsi0: float,
) -> np.ndarray:
    """Integrate one noise-free resonator over `grid`.

    Either `profile` gives (2 pi f)^2 on the grid (so A(t) = -profile, B = 0),
    or constant coefficients (coeff_a, coeff_b) are used.  Coefficients are
    frozen per step at the step midpoint and propagated by the exact 2x2
    exponential.  Returns psi at the grid points.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if profile is not None:
        profile = np.asarray(profile, dtype=float)
        if profile.shape != grid.shape:
            raise InvalidParameterError("profile must be given on the grid")
        if not np.all(np.isfinite(profile)):
            raise InvalidParameterError("profile must be finite")
        a_mid = -0.5 * (profile[:-1] + profile[1:])
        b_mid = np.zeros(grid.size - 1)
    elif coeff_a is not None:
        a_mid = np.full(grid.size - 1, float(coeff_a))
        b_mid = np.full(grid.size - 1, float(coeff_b))
    else:
        raise InvalidParameterError("need either a profile or constant coefficients")

    out = np.empty(grid.size)
    state = np.array([psi0, dpsi0], dtype=float)
    out[0] = state[0]
    for k in range(grid.size - 1):
        dt = grid[k + 1] - grid[k]
        if dt <= 0.0:
            raise InvalidParameterError("grid must be strictly increasing")
        state = _step_matrix(a_mid[k], b_mid[k], dt) @ state
        out[k + 1] = state[0]
    return out


def _resonator_loglik(
    times: np.ndarray,
    values: np.ndarray,
    freqs: np.ndarray,
    decays: np.ndarray,
    diffusion: float,
    noise_variance: float,
    init_variance: float,
) -> float:
    n_res = freqs.size
    dim = 2 * n_res + 1
    h = np.zeros((1, dim))
    h[0, 0:2 * n_res:2] = 1.0
    h[0, -1] = 1.0

    mean = np.zeros(dim)
    cov = np.zeros((dim, dim))
    share = init_variance / (n_res + 1)
    for j in range(n_res):
        cov[2 * j, 2 * j] = share
        cov[2 * j + 1, 2 * j + 1] = share * (2.0 * np.pi * freqs[j]) ** 2
    cov[-1, -1] = share
    state = GaussianState(mean, cov, times[0])

    blocks = [
        resonator_block(f, b, diffusion) for f, b in zip(freqs, decays)
    ]
    updates = []
    prev_t = times[0]
    for t, y in zip(times, values):
        dt = t - prev_t
        if dt > 0.0:
            g = np.zeros((dim, dim))
            q = np.zeros((dim, dim))
            for j, blk in enumerate(blocks):
                sl = slice(2 * j, 2 * j + 2)
                gb = scipy.linalg.expm(blk.drift * dt)
                g[sl, sl] = gb
                if diffusion > 0.0:
                    top = scipy.linalg.expm(
                        np.block(
                            [
                                [blk.drift, diffusion * blk.noise @ blk.noise.T],
                                [np.zeros((2, 2)), -blk.drift.T],
                            ]
                        )
                        * dt
                    )[:2, :]
                    qb = top[:, 2:] @ gb.T
                    q[sl, sl] = 0.5 * (qb + qb.T)
            g[-1, -1] = 1.0
            state = predict(state, g, q, t_new=t)
        updates.append(update(state, h, [[noise_variance]], [y]))
        state = updates[-1].state
        prev_t = t
    return log_likelihood(updates)


def resonator_fit(
    times,
    values,
    n_resonators: int,
    period: float,
    budget: int = 400,
    seed: int = 0,
    restarts: int = 1,
) -> tuple[ResonatorModel, learn.FitResult]:
    """Fit frequencies and decay coefficients of a resonator bank by maximum
    likelihood, starting from distinct contiguous multiples of 1/period."""
    if n_resonators < 1:
        raise InvalidParameterError("need at least one resonator")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    scale = float(np.var(values)) or 1.0

    params = []
    f_hi = 2.0 * n_resonators / period
    for j in range(n_resonators):
        init = (j + 1.0) / period
        params.append(learn.Param(f"freq_{j}", 1e-3 / period, f_hi, init))
        params.append(learn.Param(f"decay_{j}", 1e-8 / period, 20.0 / period, 1e-6 / period))
    params.append(learn.Param("diffusion", 1e-12 * scale, 10.0 * scale, 1e-6 * scale))
    params.append(learn.Param("noise_variance", 1e-8 * scale, scale, 1e-2 * scale))
    space = learn.ParamSpace(tuple(params))

    def objective(p: dict[str, float]) -> float:
        freqs = np.array([p[f"freq_{j}"] for j in range(n_resonators)])
        decays = -np.array([p[f"decay_{j}"] for j in range(n_resonators)])
        try:
            return _resonator_loglik(
                times, values, freqs, decays, p["diffusion"],
                p["noise_variance"], scale,
            )
        except NumericError:
            return -np.inf

    result = learn.fit(objective, space, budget=budget, restarts=restarts, seed=seed)
    best = result.params
    model = ResonatorModel(
        frequencies=np.array([best[f"freq_{j}"] for j in range(n_resonators)]),
        decays=-np.array([best[f"decay_{j}"] for j in range(n_resonators)]),
        diffusion=best["diffusion"],
        noise_variance=best["noise_variance"],
        init_variance=scale,
    )
    return model, result
