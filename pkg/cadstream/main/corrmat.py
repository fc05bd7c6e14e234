# -*- coding: utf-8 -*-
"""
Correlation matrices of window feature matrices.

The correlation matrix of a window holds the absolute (or sign-filtered)
Pearson correlation of every pair of columns. It is symmetric with a unit
diagonal and entries in [0, 1]; a constant column correlates 0 with every
other column.

PairStats keeps running sums for a sliding window so that a slide by a few
rows costs O(k n^2) instead of O(M n^2).
"""
import logging
from dataclasses import dataclass

import numpy as np

from cadstream.main.errors import ConfigError, ContractError
from cadstream.main.ingest import FeatureMatrix

MODES = ('absolute', 'positive_only', 'negative_only')

# relative variance below which a running-sum column counts as constant
ZERO_VARIANCE_RTOL = 1e-12


def _check_mode(mode):
    if mode not in MODES:
        raise ConfigError("Unsupported correlation mode '%s', expected one of %s."
                          % (mode, ', '.join(MODES)))


def _scaled_center(v):
    scale = np.max(np.abs(v))
    if scale == 0:
        return None
    v = v / scale
    return v - v.mean()


def pearson(x, y):
    """
    Pearson correlation of two vectors.

    Vectors are scaled by their largest magnitude before centering, so the
    result is unchanged (bit for bit) when a vector is multiplied by a power
    of two or by an integer that keeps the quotients exact.

    Returns:
        float: the correlation in [-1, 1], or 0 if either vector is constant

    Raises:
        ContractError: vectors of different lengths or of length below 2
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ContractError("pearson() needs two vectors of equal length, got shapes %s and %s."
                            % (x.shape, y.shape))
    if x.shape[0] < 2:
        raise ContractError("pearson() needs vectors of length 2 or more.")

    xc = _scaled_center(x)
    yc = _scaled_center(y)
    if xc is None or yc is None:
        return 0.0
    sxx = xc @ xc
    syy = yc @ yc
    if sxx == 0 or syy == 0:
        return 0.0
    r = float((xc @ yc) / np.sqrt(sxx * syy))
    return min(1.0, max(-1.0, r))


def standardize_columns(data):
    """
    Center every column and scale it to unit Euclidean norm. Constant columns
    become zero columns.

    Returns:
        numpy.ndarray: M x n matrix Z such that Z.T @ Z is the signed
            correlation matrix (up to the zero diagonal of constant columns)
    """
    data = np.asarray(data, dtype=np.float64)
    scale = np.max(np.abs(data), axis=0)
    scale[scale == 0] = 1.0
    Z = data / scale
    Z = Z - Z.mean(axis=0)
    norms = np.sqrt(np.einsum('ij,ij->j', Z, Z))
    nonzero = norms > 0
    Z[:, nonzero] /= norms[nonzero]
    Z[:, ~nonzero] = 0.0
    return Z


def _apply_mode(C, mode):
    if mode == 'absolute':
        C = np.abs(C)
    elif mode == 'positive_only':
        C = np.maximum(C, 0.0)
    else:
        C = np.maximum(-C, 0.0)
    np.clip(C, 0.0, 1.0, out=C)
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C


@dataclass(frozen=True)
class CorrelationMatrix:
    """
    Correlation matrix of a window.

    Attributes:
        entries (numpy.ndarray): n x n symmetric matrix, unit diagonal,
            off-diagonal entries in [0, 1]
        mode (str): one of 'absolute', 'positive_only', 'negative_only'
        col_ids (tuple): column identifiers the rows/columns refer to
    """
    entries: np.ndarray
    mode: str = 'absolute'
    col_ids: tuple = None

    def __post_init__(self):
        if self.col_ids is None:
            object.__setattr__(self, 'col_ids', tuple(range(self.entries.shape[0])))

    @property
    def n(self):
        return self.entries.shape[0]

    def submatrix(self, indices):
        """Entries restricted to the given column positions."""
        indices = np.asarray(indices, dtype=np.int64)
        return self.entries[np.ix_(indices, indices)]

    def check(self, atol=1e-12):
        """
        Verify the matrix invariants.

        Raises:
            ContractError: asymmetric, non-unit diagonal or entries outside [0, 1]
        """
        P = self.entries
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ContractError("Correlation matrix must be square, got shape %s." % (P.shape,))
        if not np.allclose(P, P.T, rtol=0.0, atol=atol):
            raise ContractError("Correlation matrix is not symmetric.")
        if not np.allclose(np.diag(P), 1.0, rtol=0.0, atol=atol):
            raise ContractError("Correlation matrix diagonal is not 1.")
        if P.min() < -atol or P.max() > 1.0 + atol:
            raise ContractError("Correlation matrix entries fall outside [0, 1].")


def build_correlation_matrix(X, mode='absolute'):
    """
    Correlation matrix of all column pairs of a window.

    Args:
        X (FeatureMatrix or numpy.ndarray): M x n window, M >= 2
        mode (str): 'absolute' keeps |r|, 'positive_only' keeps max(r, 0) and
            'negative_only' keeps max(-r, 0)

    Returns:
        CorrelationMatrix: the n x n matrix

    Raises:
        ContractError: fewer than two rows
        ConfigError: unknown mode
    """
    _check_mode(mode)
    if isinstance(X, FeatureMatrix):
        data, col_ids = X.data, X.cols
    else:
        data = np.asarray(X, dtype=np.float64)
        col_ids = None
    if data.ndim != 2 or data.shape[0] < 2:
        raise ContractError("Correlation needs a matrix with at least 2 rows, got shape %s."
                            % (data.shape,))

    Z = standardize_columns(data)
    return CorrelationMatrix(_apply_mode(Z.T @ Z, mode), mode, col_ids)


def signed_correlation(data):
    """Signed correlation matrix of the columns of 'data' (unit diagonal)."""
    Z = standardize_columns(data)
    C = np.clip(Z.T @ Z, -1.0, 1.0)
    np.fill_diagonal(C, 1.0)
    return C


def recover_signs(X, ids):
    """
    Split a detected column set by correlation polarity.

    The reference column is the member with the largest summed absolute
    correlation to the set; members correlating negatively with it form the
    second group.

    Args:
        X (FeatureMatrix): window the set was detected in
        ids (iterable): column identifiers of the set

    Returns:
        tuple: (same_sign_ids, opposite_sign_ids), each a sorted tuple
    """
    ids = sorted(ids)
    if len(ids) < 2:
        return tuple(ids), ()
    index = X.column_index()
    positions = [index[i] for i in ids]
    C = signed_correlation(X.data[:, positions])
    ref = int(np.argmax(np.abs(C).sum(axis=1)))
    same = tuple(i for i, c in zip(ids, C[ref]) if c >= 0)
    opposite = tuple(i for i, c in zip(ids, C[ref]) if c < 0)
    return same, opposite


class PairStats(object):
    """
    Running statistics of a sliding window for incremental correlation
    updates.

    All columns share the same rows, so one observation count serves every
    column. Sums are taken of shifted values x - shift, with each column
    shifted by its mean when it entered, which keeps the cancellation in
    cov = cross - sums sums^T / count small.

    Attributes:
        row_ids (list): identifiers of the buffered rows, in buffer order
        col_ids (list): identifiers of the tracked columns
        rows (numpy.ndarray): buffered raw values, len(row_ids) x len(col_ids)
        shift (numpy.ndarray): per-column shift
        sums (numpy.ndarray): per-column sum of shifted values
        sumsq (numpy.ndarray): per-column sum of squared shifted values
        cross (numpy.ndarray): pairwise sums of products of shifted values
        fallbacks (int): number of full recomputations
    """
    def __init__(self, X, name='pairstats'):
        self.logger = logging.getLogger(name)
        self.fallbacks = 0
        self.rebuild(X)

    @property
    def count(self):
        return len(self.row_ids)

    def rebuild(self, X):
        """Recompute every statistic from a full window."""
        self.row_ids = list(X.rows)
        self.col_ids = list(X.cols)
        self.rows = np.array(X.data, dtype=np.float64)
        self.shift = self.rows.mean(axis=0)
        Y = self.rows - self.shift
        self.sums = Y.sum(axis=0)
        self.sumsq = np.einsum('ij,ij->j', Y, Y)
        self.cross = Y.T @ Y
        self.cross = 0.5 * (self.cross + self.cross.T)

    def correlation(self, mode='absolute'):
        """Correlation matrix of the current buffer."""
        _check_mode(mode)
        count = self.count
        if count < 2:
            raise ContractError("Correlation needs at least 2 buffered rows, got %d." % count)

        var = self.sumsq - self.sums * self.sums / count
        constant = var <= ZERO_VARIANCE_RTOL * np.maximum(self.sumsq, np.finfo(float).tiny)
        var[constant] = 1.0
        cov = self.cross - np.outer(self.sums, self.sums) / count
        C = cov / np.sqrt(np.outer(var, var))
        C[constant, :] = 0.0
        C[:, constant] = 0.0
        np.clip(C, -1.0, 1.0, out=C)
        return CorrelationMatrix(_apply_mode(C, mode), mode, tuple(self.col_ids))

    def remove_rows(self, positions):
        """Downdate the statistics by the buffered rows at 'positions'."""
        if len(positions) == 0:
            return
        Y = self.rows[positions] - self.shift
        self.sums -= Y.sum(axis=0)
        self.sumsq -= np.einsum('ij,ij->j', Y, Y)
        self.cross -= Y.T @ Y
        keep = np.ones(len(self.row_ids), dtype=bool)
        keep[positions] = False
        self.rows = self.rows[keep]
        self.row_ids = [r for r, k in zip(self.row_ids, keep) if k]

    def add_rows(self, row_ids, values):
        """Update the statistics by new rows given for every tracked column."""
        if len(row_ids) == 0:
            return
        values = np.asarray(values, dtype=np.float64)
        Y = values - self.shift
        self.sums += Y.sum(axis=0)
        self.sumsq += np.einsum('ij,ij->j', Y, Y)
        self.cross += Y.T @ Y
        self.rows = np.vstack([self.rows, values])
        self.row_ids.extend(row_ids)

    def drop_columns(self, keep_ids):
        """Stop tracking every column not in 'keep_ids'."""
        keep_ids = set(keep_ids)
        keep = np.array([c in keep_ids for c in self.col_ids], dtype=bool)
        if keep.all():
            return
        self.col_ids = [c for c, k in zip(self.col_ids, keep) if k]
        self.rows = self.rows[:, keep]
        self.shift = self.shift[keep]
        self.sums = self.sums[keep]
        self.sumsq = self.sumsq[keep]
        self.cross = self.cross[np.ix_(keep, keep)]

    def add_columns(self, col_ids, values):
        """
        Start tracking new columns whose values on the current buffer rows are
        given (rows in buffer order).
        """
        if len(col_ids) == 0:
            return
        values = np.asarray(values, dtype=np.float64).reshape(self.count, len(col_ids))
        shift = values.mean(axis=0)
        Y_new = values - shift
        Y_old = self.rows - self.shift
        k = len(self.col_ids)

        cross = np.empty((k + len(col_ids), k + len(col_ids)))
        cross[:k, :k] = self.cross
        cross[:k, k:] = Y_old.T @ Y_new
        cross[k:, :k] = cross[:k, k:].T
        new_block = Y_new.T @ Y_new
        cross[k:, k:] = 0.5 * (new_block + new_block.T)

        self.cross = cross
        self.col_ids.extend(col_ids)
        self.rows = np.hstack([self.rows, values])
        self.shift = np.concatenate([self.shift, shift])
        self.sums = np.concatenate([self.sums, Y_new.sum(axis=0)])
        self.sumsq = np.concatenate([self.sumsq, np.einsum('ij,ij->j', Y_new, Y_new)])

    def reorder(self, row_ids, col_ids):
        """Permute buffer rows and tracked columns into the given orders."""
        row_pos = {r: i for i, r in enumerate(self.row_ids)}
        col_pos = {c: j for j, c in enumerate(self.col_ids)}
        rperm = np.array([row_pos[r] for r in row_ids], dtype=np.int64)
        cperm = np.array([col_pos[c] for c in col_ids], dtype=np.int64)
        self.rows = self.rows[np.ix_(rperm, cperm)]
        self.row_ids = list(row_ids)
        self.col_ids = list(col_ids)
        self.shift = self.shift[cperm]
        self.sums = self.sums[cperm]
        self.sumsq = self.sumsq[cperm]
        self.cross = self.cross[np.ix_(cperm, cperm)]

    def slide_to(self, X, mode='absolute'):
        """
        Move the statistics to the next window and return its correlation
        matrix.

        Rows of X already buffered must hold the buffered values for every
        column tracked in both; otherwise (or if no row survives) the
        statistics are rebuilt from X. Columns new in X are computed fresh from
        X, columns missing from X are dropped.

        Returns:
            tuple: (CorrelationMatrix in X's column order, fell_back flag)
        """
        buffered = {r: i for i, r in enumerate(self.row_ids)}
        window_rows = set(X.rows)
        surviving = [(buffered[r], i) for i, r in enumerate(X.rows) if r in buffered]
        col_pos = {c: j for j, c in enumerate(self.col_ids)}
        common = [(col_pos[c], j) for j, c in enumerate(X.cols) if c in col_pos]

        if not surviving or not common:
            return self._fall_back(X, mode, "no overlap with the buffered window")
        old_r, new_r = (np.array(idx, dtype=np.int64) for idx in zip(*surviving))
        old_c, new_c = (np.array(idx, dtype=np.int64) for idx in zip(*common))
        if not np.array_equal(self.rows[np.ix_(old_r, old_c)], X.data[np.ix_(new_r, new_c)]):
            return self._fall_back(X, mode, "surviving rows changed value")

        self.drop_columns(X.cols)
        departing = [i for i, r in enumerate(self.row_ids) if r not in window_rows]
        self.remove_rows(departing)

        arriving = [i for i, r in enumerate(X.rows) if r not in buffered]
        if arriving:
            X_index = X.column_index()
            tracked = np.array([X_index[c] for c in self.col_ids], dtype=np.int64)
            self.add_rows([X.rows[i] for i in arriving], X.data[np.ix_(arriving, tracked)])

        new_cols = [c for c in X.cols if c not in col_pos]
        if new_cols:
            X_rows = {r: i for i, r in enumerate(X.rows)}
            order = np.array([X_rows[r] for r in self.row_ids], dtype=np.int64)
            X_index = X.column_index()
            picks = np.array([X_index[c] for c in new_cols], dtype=np.int64)
            self.add_columns(new_cols, X.data[np.ix_(order, picks)])

        self.reorder(X.rows, X.cols)
        return self.correlation(mode), False

    def _fall_back(self, X, mode, reason):
        self.fallbacks += 1
        self.logger.info("Recomputing window %s correlation in full: %s." % (X.window_id, reason))
        self.rebuild(X)
        return self.correlation(mode), True


def update_correlation_incremental(stats, departing, arriving, mode='absolute'):
    """
    Slide running statistics by removing departing rows and adding arriving
    ones, then return the updated correlation matrix.

    Args:
        stats (PairStats): statistics of the previous window (updated in place)
        departing (iterable): identifiers of rows leaving the window
        arriving (FeatureMatrix): the new rows, for a subset of the tracked
            columns; tracked columns missing from it are dropped

    Returns:
        tuple: (CorrelationMatrix, fell_back flag); the flag is set when a
            departing row was not buffered or an arriving row already was, in
            which case every statistic was recomputed from the resulting buffer

    Raises:
        ContractError: arriving rows carry columns that are not tracked
    """
    col_pos = {c: j for j, c in enumerate(stats.col_ids)}
    untracked = [c for c in arriving.cols if c not in col_pos]
    if untracked:
        raise ContractError("Arriving rows carry untracked columns: %s." % ', '.join(map(str, untracked)))

    departing = list(departing)
    buffered = {r: i for i, r in enumerate(stats.row_ids)}
    stats.drop_columns(arriving.cols)
    index = arriving.column_index()
    values = arriving.data[:, [index[c] for c in stats.col_ids]]

    consistent = (all(r in buffered for r in departing)
                  and not any(r in buffered and r not in departing for r in arriving.rows))
    if consistent:
        stats.remove_rows([buffered[r] for r in departing])
        stats.add_rows(list(arriving.rows), values)
        return stats.correlation(mode), False

    gone = set(departing) | set(arriving.rows)
    keep = [i for i, r in enumerate(stats.row_ids) if r not in gone]
    data = np.vstack([stats.rows[keep], values])
    rows = [stats.row_ids[i] for i in keep] + list(arriving.rows)
    window = FeatureMatrix(tuple(rows), tuple(stats.col_ids), data, arriving.window_id)
    return stats._fall_back(window, mode, "departing or arriving rows do not match the buffer")
