# -*- coding: utf-8 -*-
"""
Generative principal score (gPS).

Every off-diagonal entry of the correlation matrix is modeled as a Beta draw
whose parameters depend on the labels of its two columns: a pair inside
anomaly group c uses (a_c, b_c), every other pair uses the background
parameters. Labels are 0..ell-1 for the anomaly groups and ell for the
background.

Fitting alternates two steps until the labels stop changing and the
log-likelihood settles:

1. a fixed-point update of each group's Beta parameters, projected so that
   anomaly groups have mean >= alpha and the background has mean <= 0.5,
2. a sequential (Gauss-Seidel) sweep assigning each column the label that
   maximizes the log-likelihood, ties going to the background.

The label sweep is the quadratic hot spot and is compiled with numba when it
is available.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma as _digamma
from scipy.special import gammaln, polygamma

from cadstream.main.corrmat import CorrelationMatrix
from cadstream.main.errors import ConfigError, ContractError, DomainError
from cadstream.main.rps import Detection, anomaly_strength
from cadstream.main.spectral import as_matrix, principal_score

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

logger = logging.getLogger('gps')

# fallback concentration for moment matching on degenerate groups
DEFAULT_CONCENTRATION = 10.0

# a label must beat the best gain over the background by this relative margin
LABEL_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class GpsConfig:
    """
    gPS parameters.

    Attributes:
        ell (int): number of anomaly groups
        alpha (float): lower bound of an anomaly group's Beta mean
        max_iter (int): outer iteration limit
        ll_tol (float): relative log-likelihood change counted as settled
        eps (float): correlations are clamped to [eps, 1 - eps]
        neighbor_threshold (float): correlation joining a seed's group when
            groups are seeded without an initial set
        min_set_size (int): groups smaller than this are not reported
        inner_tol (float): relative step tolerance of the Beta fixed point
        inner_max_iter (int): fixed-point step limit per outer iteration
        background_max_mean (float): upper bound of the background Beta mean
        max_shape (float): cap on a Beta shape parameter
        tol (float): eigensolver tolerance for group scores
    """
    ell: int = 2
    alpha: float = 0.75
    max_iter: int = 100
    ll_tol: float = 1e-6
    eps: float = 1e-6
    neighbor_threshold: float = 0.7
    min_set_size: int = 3
    inner_tol: float = 1e-8
    inner_max_iter: int = 50
    background_max_mean: float = 0.5
    max_shape: float = 1e4
    tol: float = 1e-6

    def __post_init__(self):
        if self.ell < 1:
            raise ConfigError("gPS group count must be at least 1, got %s." % self.ell)
        if not 0.5 < self.alpha < 1:
            raise ConfigError("gPS alpha must be in (0.5, 1), got %s." % self.alpha)
        if self.max_iter < 1 or self.inner_max_iter < 1:
            raise ConfigError("gPS iteration limits must be positive.")
        if not 0 < self.eps < 0.5:
            raise ConfigError("gPS eps must be in (0, 0.5), got %s." % self.eps)
        if self.min_set_size < 1:
            raise ConfigError("Minimum set size must be positive, got %s." % self.min_set_size)


@dataclass
class GpsModel:
    """
    Beta mixture parameters and labels.

    Attributes:
        a (numpy.ndarray): ell+1 first shape parameters, background last
        b (numpy.ndarray): ell+1 second shape parameters, background last
        z (numpy.ndarray): label of every column, in 0..ell
        loglik (float): log-likelihood of the last evaluation
        degenerate (bool): some shape parameter hit the cap
        iterations (int): outer iterations run
        converged (bool): stopped on the convergence test
    """
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    loglik: float = float('nan')
    degenerate: bool = False
    iterations: int = 0
    converged: bool = False

    @property
    def ell(self):
        return len(self.a) - 1

    def groups(self):
        """Column positions of every anomaly group, in label order."""
        return [np.flatnonzero(self.z == c) for c in range(self.ell)]


@dataclass(frozen=True)
class GroupStats:
    """
    Sufficient statistics per label (background last): member count, pair
    count m and the sums of ln(w) and ln(1 - w) over the label's pairs.
    """
    members: np.ndarray
    m: np.ndarray
    sum_log: np.ndarray
    sum_log1m: np.ndarray


@dataclass
class GpsFit:
    """gPS fit of one window: the model and the reported detections."""
    model: GpsModel
    detections: list = field(default_factory=list)
    initial_loglik: float = float('nan')


class LogCorrelations(object):
    """
    Clamped correlations w = clip(P, eps, 1 - eps) with ln(w), ln(1 - w) and
    their totals, diagonals zeroed. Built once per fit.
    """
    def __init__(self, P, eps=1e-6):
        P = as_matrix(P)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ContractError("gPS needs a square correlation matrix, got shape %s." % (P.shape,))
        self.n = P.shape[0]
        omega = np.clip(P, eps, 1.0 - eps)
        np.fill_diagonal(omega, 0.0)
        self.omega = np.ascontiguousarray(omega)
        self.log = np.log(np.where(omega > 0, omega, 1.0))
        self.log1m = np.log1p(-omega)
        self.total_log = self.log.sum() / 2.0
        self.total_log1m = self.log1m.sum() / 2.0


def digamma(x):
    """
    Digamma function.

    Raises:
        DomainError: x <= 0
    """
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any(x_arr <= 0):
        raise DomainError("digamma() is only evaluated for positive arguments.")
    value = _digamma(x_arr)
    return float(value) if np.ndim(x) == 0 else value


def inv_digamma(y, tol=1e-10, max_iter=50):
    """
    Inverse of the digamma function on (0, inf) by Newton's method.

    Starts from exp(y) + 1/2 for y >= -2.22 and from -1/(y + euler_gamma)
    otherwise, and stops once |digamma(x) - y| <= tol * max(1, |y|).
    """
    y_arr = np.asarray(y, dtype=np.float64)
    x = np.where(y_arr >= -2.22, np.exp(y_arr) + 0.5, -1.0 / (y_arr - _digamma(1.0)))
    for _ in range(max_iter):
        f = _digamma(x) - y_arr
        if np.all(np.abs(f) <= tol * np.maximum(1.0, np.abs(y_arr))):
            break
        x_new = x - f / polygamma(1, x)
        x = np.where(x_new > 0, x_new, x / 2.0)
    return float(x) if np.ndim(y) == 0 else x


def beta_log_norm(a, b):
    """ln(1 / B(a, b)) = gammaln(a + b) - gammaln(a) - gammaln(b)."""
    return gammaln(a + b) - gammaln(a) - gammaln(b)


def _group_term(a, b, m, s1, s2):
    if m == 0:
        return 0.0
    return (a - 1.0) * s1 + (b - 1.0) * s2 + m * beta_log_norm(a, b)


def group_stats(logs, z, ell):
    """
    Sufficient statistics of a labeling.

    A pair belongs to anomaly group c when both of its columns are labeled c;
    every other pair belongs to the background.
    """
    z = np.asarray(z)
    members = np.bincount(z, minlength=ell + 1).astype(np.int64)
    m = np.zeros(ell + 1)
    s1 = np.zeros(ell + 1)
    s2 = np.zeros(ell + 1)
    for c in range(ell):
        idx = np.flatnonzero(z == c)
        if idx.size < 2:
            continue
        m[c] = idx.size * (idx.size - 1) / 2.0
        s1[c] = logs.log[np.ix_(idx, idx)].sum() / 2.0
        s2[c] = logs.log1m[np.ix_(idx, idx)].sum() / 2.0
    m[ell] = logs.n * (logs.n - 1) / 2.0 - m[:ell].sum()
    s1[ell] = logs.total_log - s1[:ell].sum()
    s2[ell] = logs.total_log1m - s2[:ell].sum()
    return GroupStats(members, m, s1, s2)


def log_likelihood(P, model, eps=1e-6):
    """
    Log-likelihood of all off-diagonal pairs under the model,
    sum over labels of (a-1) sum ln w + (b-1) sum ln(1-w) + m ln(1/B(a, b)).

    Args:
        P (CorrelationMatrix, numpy.ndarray or LogCorrelations): the matrix
        model (GpsModel): parameters and labels
    """
    logs = P if isinstance(P, LogCorrelations) else LogCorrelations(P, eps)
    stats = group_stats(logs, model.z, model.ell)
    return float(sum(_group_term(model.a[c], model.b[c], stats.m[c], stats.sum_log[c],
                                 stats.sum_log1m[c]) for c in range(model.ell + 1)))


def project_params(a, b, anomaly, config):
    """
    Project Beta parameters onto the feasible set.

    Anomaly groups get mean >= alpha by lowering b, the background gets mean
    <= background_max_mean by lowering a; a + b is raised to at least 1 and
    both are scaled down if one exceeds max_shape.

    Returns:
        tuple: (a, b, capped)
    """
    mean = a / (a + b)
    if anomaly and mean < config.alpha:
        b = a * (1.0 - config.alpha) / config.alpha
    elif not anomaly and mean > config.background_max_mean:
        cap = config.background_max_mean
        a = b * cap / (1.0 - cap)
    total = a + b
    if total < 1.0:
        a, b = a / total, b / total
    top = max(a, b)
    capped = top > config.max_shape
    if capped:
        a, b = a * config.max_shape / top, b * config.max_shape / top
    return a, b, capped


def update_beta_params(model, stats, config):
    """
    Update every non-empty label's Beta parameters in place.

    Each step is the fixed point a' = inv_digamma(digamma(a + b) + mean ln w),
    b' = inv_digamma(digamma(a + b) + mean ln(1 - w)), followed by
    projection, repeated up to inner_max_iter times. An update lowering the
    label's log-likelihood term is discarded. Labels without pairs keep their
    parameters.

    Returns:
        tuple: (a, b) arrays of the model, background last
    """
    any_capped = False
    for c in range(model.ell + 1):
        m = stats.m[c]
        if m < 1:
            continue
        anomaly = c < model.ell
        s1, s2 = stats.sum_log[c], stats.sum_log1m[c]
        a, b = float(model.a[c]), float(model.b[c])
        before = _group_term(a, b, m, s1, s2)
        capped = False
        for _ in range(config.inner_max_iter):
            base = digamma(a + b)
            a_new = inv_digamma(base + s1 / m)
            b_new = inv_digamma(base + s2 / m)
            a_new, b_new, capped = project_params(a_new, b_new, anomaly, config)
            settled = max(abs(a_new - a) / a, abs(b_new - b) / b) < config.inner_tol
            a, b = a_new, b_new
            if settled:
                break
        if _group_term(a, b, m, s1, s2) >= before:
            model.a[c], model.b[c] = a, b
            any_capped = any_capped or capped
    model.degenerate = model.degenerate or any_capped
    return model.a, model.b


def _label_sweep_py(log, log1m, z, da, db, dc, ell):
    n = z.shape[0]
    score = np.zeros(ell)
    changed = 0
    for i in range(n):
        for c in range(ell):
            score[c] = 0.0
        for j in range(n):
            g = z[j]
            if g < ell and j != i:
                score[g] += da[g] * log[i, j] + db[g] * log1m[i, j] + dc[g]
        best = ell
        best_score = 0.0
        for c in range(ell):
            if score[c] > best_score + LABEL_TIE_RTOL * max(1.0, abs(best_score)):
                best = c
                best_score = score[c]
        if best != z[i]:
            z[i] = best
            changed += 1
    return changed


_label_sweep = njit(cache=False)(_label_sweep_py) if njit is not None else _label_sweep_py


def update_labels(P, model):
    """
    One sequential sweep over the columns, assigning each the label that
    maximizes the log-likelihood given every other label. The score of label
    c relative to the background is the sum over current members j of c of
    the log-density difference of w_ij; ties go to the background, then to
    the lowest group.

    Args:
        P (LogCorrelations or matrix): the correlations
        model (GpsModel): updated in place

    Returns:
        tuple: (new labels z, number of columns whose label changed)
    """
    logs = P if isinstance(P, LogCorrelations) else LogCorrelations(P)
    ell = model.ell
    a = np.asarray(model.a, dtype=np.float64)
    b = np.asarray(model.b, dtype=np.float64)
    norm = beta_log_norm(a, b)
    da = np.ascontiguousarray(a[:ell] - a[ell])
    db = np.ascontiguousarray(b[:ell] - b[ell])
    dc = np.ascontiguousarray(norm[:ell] - norm[ell])
    z = np.ascontiguousarray(model.z, dtype=np.int64)
    changed = _label_sweep(logs.log, logs.log1m, z, da, db, dc, np.int64(ell))
    model.z = z
    return z, int(changed)


def brute_force_labels(P, model, eps=1e-6):
    """
    Reference sweep evaluating the full log-likelihood for every candidate
    label of every column. Quadratic in the pair count; for testing.
    """
    logs = P if isinstance(P, LogCorrelations) else LogCorrelations(P, eps)
    trial = GpsModel(np.array(model.a, dtype=float), np.array(model.b, dtype=float),
                     np.array(model.z, dtype=np.int64))
    ell = trial.ell
    for i in range(logs.n):
        values = []
        for c in range(ell + 1):
            trial.z[i] = c
            values.append(log_likelihood(logs, trial))
        best = ell
        best_score = 0.0
        for c in range(ell):
            gain = values[c] - values[ell]
            if gain > best_score + LABEL_TIE_RTOL * max(1.0, abs(best_score)):
                best = c
                best_score = gain
        trial.z[i] = best
    return trial.z


def _moment_params(mean, var):
    mean = min(max(mean, 1e-6), 1.0 - 1e-6)
    concentration = mean * (1.0 - mean) / var - 1.0 if var > 0 else 0.0
    if not concentration > 0:
        concentration = DEFAULT_CONCENTRATION
    return mean * concentration, (1.0 - mean) * concentration


def initial_params(logs, z, config):
    """
    Moment-matched, projected Beta parameters for a labeling. Empty anomaly
    groups start at mean alpha.
    """
    ell = config.ell
    a = np.empty(ell + 1)
    b = np.empty(ell + 1)
    omega = logs.omega
    total_w = omega.sum() / 2.0
    total_w2 = (omega * omega).sum() / 2.0
    used_m = used_w = used_w2 = 0.0
    for c in range(ell + 1):
        if c < ell:
            idx = np.flatnonzero(z == c)
            m = idx.size * (idx.size - 1) / 2.0
            block = omega[np.ix_(idx, idx)]
            w, w2 = block.sum() / 2.0, (block * block).sum() / 2.0
            used_m, used_w, used_w2 = used_m + m, used_w + w, used_w2 + w2
        else:
            m = logs.n * (logs.n - 1) / 2.0 - used_m
            w, w2 = total_w - used_w, total_w2 - used_w2
        if m >= 1:
            mean = w / m
            a[c], b[c] = _moment_params(mean, max(w2 / m - mean * mean, 0.0))
        elif c < ell:
            a[c], b[c] = config.alpha * DEFAULT_CONCENTRATION, (1 - config.alpha) * DEFAULT_CONCENTRATION
        else:
            a[c], b[c] = 1.0, 1.0
        a[c], b[c], _ = project_params(a[c], b[c], c < ell, config)
    return a, b


def initial_labels(P, config, init=None):
    """
    Starting labels: the given sets (column positions) fill the first groups,
    the remaining groups are seeded from the unassigned column with the largest
    row sum together with its unassigned neighbors correlating above
    neighbor_threshold. Seeds without such a neighbor are passed over.
    """
    entries = as_matrix(P)
    n = entries.shape[0]
    ell = config.ell
    z = np.full(n, ell, dtype=np.int64)
    group = 0
    for members in (init or ()):
        if group >= ell:
            break
        members = [i for i in members if z[i] == ell]
        if members:
            z[members] = group
            group += 1

    order = np.argsort(-entries.sum(axis=1), kind='stable')
    for seed in order:
        if group >= ell:
            break
        if z[seed] != ell:
            continue
        neighbors = np.flatnonzero((entries[seed] > config.neighbor_threshold) & (z == ell))
        neighbors = neighbors[neighbors != seed]
        if neighbors.size == 0:
            continue
        z[seed] = group
        z[neighbors] = group
        group += 1
    return z


def prune_groups(P, z, ell, alpha):
    """
    Move weakly attached members of every anomaly group to the background.

    While some member's mean correlation with the other members of its group
    is below alpha, the member with the lowest mean leaves the group. This is
    the anomaly Beta mean bound applied to every member on its own.

    Args:
        P (CorrelationMatrix or numpy.ndarray): the correlations
        z (numpy.ndarray): labels, updated in place
        ell (int): number of anomaly groups
        alpha (float): lower bound of a member's mean correlation

    Returns:
        int: number of columns moved to the background
    """
    entries = as_matrix(P)
    moved = 0
    for c in range(ell):
        members = np.flatnonzero(z == c)
        if members.size < 2:
            continue
        block = entries[np.ix_(members, members)]
        sums = block.sum(axis=1) - np.diag(block)
        active = np.ones(members.size, dtype=bool)
        size = members.size
        while size > 1:
            means = np.where(active, sums / (size - 1), np.inf)
            weakest = int(np.argmin(means))
            if means[weakest] >= alpha:
                break
            active[weakest] = False
            sums -= block[:, weakest]
            size -= 1
            z[members[weakest]] = ell
            moved += 1
    return moved


def gps_fit(P, config, init=None, X=None, p=1.4, window_id=0):
    """
    Fit the Beta mixture to a correlation matrix and report the anomaly groups.

    Members whose mean correlation with the rest of their group stays below
    alpha after the fit are moved to the background before reporting.

    Args:
        P (CorrelationMatrix or numpy.ndarray): n x n correlation matrix
        config (GpsConfig): parameters
        init (list): optional column position sets seeding the first groups,
            typically the rPS detection
        X (FeatureMatrix): window for strength computation; without it the
            strength is the group's share of columns
        p (float): norm order for strength
        window_id (int): window the detections belong to

    Returns:
        GpsFit: the fitted model and one Detection per group with at least
            min_set_size members
    """
    entries = as_matrix(P)
    col_ids = P.col_ids if isinstance(P, CorrelationMatrix) else tuple(range(entries.shape[0]))
    logs = LogCorrelations(entries, config.eps)

    z = initial_labels(entries, config, init)
    a, b = initial_params(logs, z, config)
    model = GpsModel(a, b, z)
    model.loglik = initial = log_likelihood(logs, model)

    for iteration in range(1, config.max_iter + 1):
        update_beta_params(model, group_stats(logs, model.z, config.ell), config)
        _, changed = update_labels(logs, model)
        previous = model.loglik
        model.loglik = log_likelihood(logs, model)
        model.iterations = iteration
        settled = abs(model.loglik - previous) <= config.ll_tol * max(abs(previous), 1e-12)
        if changed == 0 and settled:
            model.converged = True
            break

    if not model.converged:
        logger.info("Window %s: gPS stopped after %d iterations without settling."
                    % (window_id, model.iterations))
    moved = prune_groups(entries, model.z, config.ell, config.alpha)
    if moved:
        logger.debug("Window %s: %d weakly attached columns moved to the background."
                     % (window_id, moved))
        update_beta_params(model, group_stats(logs, model.z, config.ell), config)
        model.loglik = log_likelihood(logs, model)
    if model.degenerate:
        logger.info("Window %s: gPS shape parameters hit the cap." % window_id)

    detections = []
    for members in model.groups():
        if members.size < config.min_set_size:
            continue
        score = principal_score(entries[np.ix_(members, members)], config.tol, seed=window_id).rho
        if X is not None:
            strength = anomaly_strength(members, X, p)
        else:
            strength = members.size / float(len(col_ids))
        detections.append(Detection(window_id, 'gps', float(score),
                                    tuple(sorted(col_ids[i] for i in members)), strength,
                                    degenerate=model.degenerate,
                                    indices=tuple(int(i) for i in members)))

    return GpsFit(model, detections, initial)
