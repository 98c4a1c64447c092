"""Nystrom eigenfunction bases for (quasi-)periodic kernels.

A basis is built from a Gram matrix on N equally spaced quadrature points
spanning one period (or, for non-periodic kernels, the modelling window).
Eigenfunctions are extended off the sample grid by the Nystrom rule

    phi_j(t) = (sqrt(N) / mu_j) K(t, S) v_j,

and the kernel is resynthesized from the significant eigenpairs as
sum_j (mu_j / N) phi_j(t) phi_j(t').
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import InvalidParameterError, NumericError

__all__ = ["EigenBasis", "build"]


@dataclass(frozen=True)
class EigenBasis:
    """Eigenpairs of a kernel Gram matrix plus the significance selection.

    Attributes
    ----------
    kernel : kernel variant or callable
    sample_points : (N,) strictly increasing quadrature grid
    eigenvalues : (N,) Gram eigenvalues, descending
    eigenvectors : (N, N) orthonormal columns, matching `eigenvalues`
    selected : indices j with eigenvalues[j] >= gamma * eigenvalues[0]
    gamma : significance fraction used for the selection
    period : length of the sampled window
    """

    kernel: kernels.KernelLike
    sample_points: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    selected: np.ndarray
    gamma: float
    period: float
    _v_selected: np.ndarray = field(repr=False, default=None)
    _scale_selected: np.ndarray = field(repr=False, default=None)

    @property
    def n_points(self) -> int:
        return self.sample_points.size

    @property
    def n_selected(self) -> int:
        return self.selected.size

    def scaled_eigenvalues(self) -> np.ndarray:
        """Weight-prior variances mu_j / N for the selected eigenpairs."""
        return self.eigenvalues[self.selected] / self.n_points


def build(
    kernel: kernels.KernelLike,
    n_points: int,
    period: float,
    gamma: float = 0.01,
    start: float = 0.0,
) -> EigenBasis:
    """Build the Nystrom basis of `kernel` sampled on one window.

    Sample points are start + i * period / n_points for i = 0 .. n_points-1
    (left-closed so a periodic wrap does not duplicate a point).  The Gram
    matrix is symmetrized before the self-adjoint eigendecomposition, the
    eigenvector signs are fixed by making each largest-magnitude entry
    positive, and eigenpairs with mu_j >= gamma * mu_1 are selected.
    """
    if n_points < 2:
        raise InvalidParameterError("n_points must be >= 2")
    if not np.isfinite(period) or period <= 0.0:
        raise InvalidParameterError("period must be finite and > 0")
    if not (0.0 < gamma <= 1.0):
        raise InvalidParameterError("gamma must lie in (0, 1]")

    points = start + period * np.arange(n_points) / n_points
    gram = kernels.eval_matrix(kernel, points, points)
    if not np.all(np.isfinite(gram)):
        raise NumericError("kernel produced non-finite Gram entries")
    gram = 0.5 * (gram + gram.T)

    try:
        eigvals, eigvecs = np.linalg.eigh(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Gram eigendecomposition failed: {exc}") from exc

    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    anchor = np.argmax(np.abs(eigvecs), axis=0)
    signs = np.sign(eigvecs[anchor, np.arange(n_points)])
    signs[signs == 0.0] = 1.0
    eigvecs = eigvecs * signs

    if eigvals[0] <= 0.0:
        raise NumericError("leading Gram eigenvalue is not positive")
    selected = np.flatnonzero(eigvals >= gamma * eigvals[0])

    return EigenBasis(
        kernel=kernel,
        sample_points=points,
        eigenvalues=eigvals,
        eigenvectors=eigvecs,
        selected=selected,
        gamma=gamma,
        period=period,
        _v_selected=eigvecs[:, selected],
        _scale_selected=np.sqrt(n_points) / eigvals[selected],
    )


def _check_selected(basis: EigenBasis, j: int) -> int:
    pos = np.flatnonzero(basis.selected == j)
    if pos.size == 0:
        raise IndexError(f"eigenpair {j} is not in the significant set")
    return int(pos[0])


def eigenfunction(basis: EigenBasis, j: int, t):
    """Nystrom eigenfunction phi_j evaluated at t (scalar or array)."""
    col = _check_selected(basis, j)
    row = kernels.eval_kernel(basis.kernel, np.asarray(t, dtype=float)[..., None],
                              basis.sample_points)
    out = basis._scale_selected[col] * (row @ basis._v_selected[:, col])
    return out if np.ndim(out) else float(out)


def eigenfunction_matrix(basis: EigenBasis, t) -> np.ndarray:
    """Matrix of all selected eigenfunctions at t: shape (len(t), J)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    rows = kernels.eval_matrix(basis.kernel, t, basis.sample_points)
    return (rows @ basis._v_selected) * basis._scale_selected


def reconstruct(basis: EigenBasis, t, tp):
    """Kernel resynthesis sum_j (mu_j / N) phi_j(t) phi_j(t')."""
    pt = eigenfunction_matrix(basis, t)
    ptp = eigenfunction_matrix(basis, tp)
    out = (pt * basis.scaled_eigenvalues()) @ ptp.T
    if np.ndim(t) == 0 and np.ndim(tp) == 0:
        return float(out[0, 0])
    return out


def _derivative_rows(basis: EigenBasis, t, order: int) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    deriv = (
        kernels.first_time_derivative if order == 1 else kernels.second_time_derivative
    )
    return np.asarray(deriv(basis.kernel, t[:, None], basis.sample_points[None, :]))


def eigenfunction_first_derivative(basis: EigenBasis, j: int, t):
    """d phi_j / dt via the kernel derivative row (twice-differentiable
    kernels only)."""
    col = _check_selected(basis, j)
    rows = _derivative_rows(basis, t, order=1)
    out = basis._scale_selected[col] * (rows @ basis._v_selected[:, col])
    return out if np.ndim(t) else float(out[0])


def eigenfunction_second_derivative(basis: EigenBasis, j: int, t):
    """d^2 phi_j / dt^2 via the kernel second-derivative row."""
    col = _check_selected(basis, j)
    rows = _derivative_rows(basis, t, order=2)
    out = basis._scale_selected[col] * (rows @ basis._v_selected[:, col])
    return out if np.ndim(t) else float(out[0])


def significant_count(
    kernel: kernels.KernelLike,
    n_points: int,
    period: float,
    gamma: float = 0.01,
) -> int:
    """Number of significant eigenpairs without keeping the basis around."""
    return build(kernel, n_points, period, gamma).n_selected


def spectrum_table(basis: EigenBasis) -> list[tuple[int, float]]:
    """Rows (j, mu_j / N) for the selected eigenpairs, for CSV emission."""
    scaled = basis.scaled_eigenvalues()
    return [(int(j), float(s)) for j, s in zip(basis.selected, scaled)]


def sample_prior_force(
    basis: EigenBasis, t: Sequence[float], rng: np.random.Generator
) -> np.ndarray:
    """Draw one function from the basis-approximated GP prior on grid t."""
    weights = rng.standard_normal(basis.n_selected) * np.sqrt(
        basis.scaled_eigenvalues()
    )
    return eigenfunction_matrix(basis, t) @ weights


def kpca_regress(
    basis: EigenBasis, train_inputs, train_targets, test_inputs,
    noise_variance: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Bayesian linear regression in the eigenfunction basis.

    Weight j has prior variance mu_j / N; returns the predictive mean and
    variance of the latent function at the test inputs.
    """
    import scipy.linalg

    x = np.atleast_1d(np.asarray(train_inputs, dtype=float))
    y = np.atleast_1d(np.asarray(train_targets, dtype=float))
    xs = np.atleast_1d(np.asarray(test_inputs, dtype=float))
    prior = basis.scaled_eigenvalues()
    phi_s = eigenfunction_matrix(basis, xs)
    if x.size == 0:
        return np.zeros(xs.size), (phi_s**2) @ prior
    noise = max(noise_variance, 1e-16)
    phi = eigenfunction_matrix(basis, x)
    precision = phi.T @ phi / noise + np.diag(1.0 / prior)
    try:
        chol = scipy.linalg.cho_factor(precision, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError("eigenfeature precision matrix is singular") from exc
    w_mean = scipy.linalg.cho_solve(chol, phi.T @ y / noise)
    half = scipy.linalg.solve_triangular(chol[0], phi_s.T, lower=True)
    return phi_s @ w_mean, np.sum(half**2, axis=0)
