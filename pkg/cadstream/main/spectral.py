# -*- coding: utf-8 -*-
"""
Top eigenpair of correlation matrices, the principal score and per-column
membership scores.

The principal score of an n x n correlation matrix P is lambda_1(P) / n. It
lies between the smallest and largest row mean of P, equals 1 when all columns
are perfectly correlated and 1/n for the identity.

Small matrices (n <= 64) use shifted power iteration. Larger ones use Lanczos
with full reorthogonalization, solving the projected tridiagonal problem with
scipy. Both start from a fixed, seeded vector so results are reproducible.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from cadstream.main.corrmat import CorrelationMatrix, standardize_columns
from cadstream.main.errors import ContractError
from cadstream.main.ingest import FeatureMatrix

POWER_ITERATION_MAX_N = 64

# relative size of the seeded perturbation of the start vector
START_JITTER = 1e-2

logger = logging.getLogger('spectral')


@dataclass(frozen=True)
class EigenResult:
    """
    Largest eigenvalue and its unit eigenvector.

    Attributes:
        lambda1 (float): largest eigenvalue estimate (Rayleigh quotient)
        v1 (numpy.ndarray): unit eigenvector, sign normalized so that its
            largest magnitude entry is positive
        iterations (int): iterations (or Lanczos steps) used
        residual (float): ||P v1 - lambda1 v1||
        converged (bool): residual <= tol * |lambda1| was reached
    """
    lambda1: float
    v1: np.ndarray
    iterations: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class PrincipalScore:
    """Principal score 'rho' = lambda_1 / n of a matrix, with its eigenpair."""
    rho: float
    eig: EigenResult


def as_matrix(P):
    """Return the ndarray behind a CorrelationMatrix or array-like."""
    if isinstance(P, CorrelationMatrix):
        return P.entries
    return np.asarray(P, dtype=np.float64)


def _check_symmetric(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ContractError("Eigensolver needs a nonempty square matrix, got shape %s."
                            % (A.shape,))
    scale = max(1.0, float(np.max(np.abs(A))))
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-10 * scale):
        raise ContractError("Eigensolver needs a symmetric matrix.")


def _start_vector(n, seed):
    rng = np.random.default_rng(seed)
    x = np.ones(n) + START_JITTER * rng.standard_normal(n)
    return x / np.linalg.norm(x)


def _sign_normalize(v):
    if v[np.argmax(np.abs(v))] < 0:
        return -v
    return v


def _gershgorin_shift(A):
    """
    Smallest c >= 0 making A + cI diagonally dominant (hence positive
    semidefinite). Zero for nonnegative matrices with a positive diagonal,
    whose dominant eigenvalue is already the largest in magnitude.
    """
    diag = np.diag(A)
    if np.all(A >= 0) and np.all(diag > 0):
        return 0.0
    radii = np.abs(A).sum(axis=1) - np.abs(diag)
    return max(0.0, float(-np.min(diag - radii)))


def _power_iteration(A, x, tol, max_iter):
    shift = _gershgorin_shift(A)
    lam = 0.0
    converged = False
    iteration = 0
    for iteration in range(1, max_iter + 1):
        y = A @ x
        lam = float(x @ y)
        if np.linalg.norm(y - lam * x) <= tol * abs(lam):
            converged = True
            break
        y = y + shift * x
        norm = np.linalg.norm(y)
        if norm == 0:
            break
        x = y / norm
    return x, iteration, converged


def _lanczos(A, q, tol, max_iter):
    n = A.shape[0]
    steps = min(n, max_iter)
    Q = np.zeros((n, steps + 1))
    Q[:, 0] = q
    alphas = []
    betas = []
    norm_estimate = float(np.max(np.abs(A).sum(axis=1)))
    breakdown = 1e-12 * max(norm_estimate, np.finfo(float).tiny)
    beta = 0.0
    v = q
    converged = False
    step = 0

    for step in range(1, steps + 1):
        j = step - 1
        w = A @ Q[:, j]
        alpha = float(Q[:, j] @ w)
        w = w - alpha * Q[:, j]
        if j > 0:
            w = w - beta * Q[:, j - 1]
        # full reorthogonalization, twice is enough
        basis = Q[:, :step]
        w = w - basis @ (basis.T @ w)
        w = w - basis @ (basis.T @ w)
        alphas.append(alpha)
        beta = float(np.linalg.norm(w))

        if step == 1:
            theta, s = alpha, np.ones(1)
        else:
            theta, s = eigh_tridiagonal(np.array(alphas), np.array(betas),
                                        select='i', select_range=(step - 1, step - 1))
            theta, s = float(theta[0]), s[:, 0]

        if beta <= breakdown or abs(beta * s[-1]) <= tol * abs(theta):
            v = basis @ s
            v = v / np.linalg.norm(v)
            lam = float(v @ (A @ v))
            if beta <= breakdown or np.linalg.norm(A @ v - lam * v) <= tol * abs(lam):
                converged = True
                break
        if step == steps:
            v = basis @ s
            v = v / np.linalg.norm(v)
            break

        betas.append(beta)
        Q[:, step] = w / beta

    return v, step, converged


def top_eigenpair(P, tol=1e-6, max_iter=300, seed=0):
    """
    Largest eigenvalue and eigenvector of a real symmetric matrix.

    Args:
        P (CorrelationMatrix or numpy.ndarray): symmetric n x n matrix
        tol (float): stop once ||P v - lambda v|| <= tol * |lambda|
        max_iter (int): iteration (or Lanczos step) limit
        seed (int): seed of the start vector perturbation

    Returns:
        EigenResult: the eigenpair; 'converged' is False if max_iter ran out,
            in which case the last iterate is returned

    Raises:
        ContractError: P is not square and symmetric
    """
    A = as_matrix(P)
    _check_symmetric(A)
    n = A.shape[0]
    if n == 1:
        return EigenResult(float(A[0, 0]), np.ones(1), 0, 0.0, True)

    x = _start_vector(n, seed)
    if n <= POWER_ITERATION_MAX_N:
        v, iterations, converged = _power_iteration(A, x, tol, max_iter)
    else:
        v, iterations, converged = _lanczos(A, x, tol, max_iter)

    v = _sign_normalize(v)
    Av = A @ v
    lam = float(v @ Av)
    residual = float(np.linalg.norm(Av - lam * v))
    if not converged:
        logger.debug("Eigensolver stopped after %d iterations, residual %.3g."
                     % (iterations, residual))
    return EigenResult(lam, v, iterations, residual, converged)


def principal_score(P, tol=1e-6, max_iter=300, seed=0):
    """
    Principal score lambda_1(P) / n of a correlation matrix.

    Returns:
        PrincipalScore: the score and the eigenpair it came from
    """
    A = as_matrix(P)
    eig = top_eigenpair(A, tol, max_iter, seed)
    return PrincipalScore(eig.lambda1 / A.shape[0], eig)


def row_mean_bounds(P):
    """Smallest and largest row mean of P, bounding its principal score."""
    means = as_matrix(P).mean(axis=1)
    return float(means.min()), float(means.max())


def score_against(data, t):
    """
    Absolute correlation of every column of 'data' with the series t.

    Returns:
        tuple: (scores in [0, 1], degenerate flag); a constant t yields zero
            scores and degenerate = True
    """
    t = np.asarray(t, dtype=np.float64)
    tc = t - t.mean()
    norm = np.linalg.norm(tc)
    if norm == 0 or not np.isfinite(norm):
        return np.zeros(np.shape(data)[1]), True
    Z = standardize_columns(data)
    scores = np.clip(np.abs(Z.T @ (tc / norm)), 0.0, 1.0)
    return scores, False


def principal_series(data, eig):
    """
    Principal series of a window, with columns of the top group sign aligned.

    The reference column is the one with the largest eigenvector entry. Each
    column enters t = Z (s * v1) with the sign s of its correlation to the
    reference, so that members correlating negatively with the group add to
    the series instead of cancelling (v1 of an absolute correlation matrix is
    nonnegative). Z holds the standardized columns of 'data', which must be
    those P (hence v1) was built from.
    """
    Z = standardize_columns(data)
    v = eig.v1
    ref = int(np.argmax(np.abs(v)))
    signs = np.sign(Z.T @ Z[:, ref])
    signs[signs == 0] = 1.0
    return Z @ (signs * v)


def membership_scores(X, eig):
    """
    Membership score of each column: the absolute correlation of the column
    with the window's principal series.

    Args:
        X (FeatureMatrix or numpy.ndarray): the window
        eig (EigenResult): top eigenpair of the window's correlation matrix

    Returns:
        tuple: (scores array in [0, 1], degenerate flag)
    """
    data = X.data if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=np.float64)
    if data.shape[1] != eig.v1.shape[0]:
        raise ContractError("Eigenvector length %d does not match %d columns."
                            % (eig.v1.shape[0], data.shape[1]))
    return score_against(data, principal_series(data, eig))
