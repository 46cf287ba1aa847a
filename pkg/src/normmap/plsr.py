"""Partial least squares regression (PLS2) via NIPALS, from scratch.

Pinned conventions, chosen so runs are reproducible bit-for-bit:

* per-column mean centering of X and Y, no variance scaling;
* the initial y-score of each component is the first residual-Y column
  with nonzero sum of squares;
* inner loop (mode A): ``w = E'u / u'u`` normalized, ``t = E w``,
  ``q = F't / t't``, ``u = F q / q'q``; stops when the squared change
  of ``w`` drops below `tol` or after `max_iter` iterations;
* the largest-magnitude entry of each weight vector is forced positive;
* regression-mode deflation of both blocks by the x-scores:
  ``E -= t p'``, ``F -= t q'``.

Deflation is kept implicit: the engine stores the pristine (possibly
sparse) input plus the rank-a correction ``T P'`` and expands it inside
every matrix-vector product. This never densifies sparse inputs and is
what makes self-mapping the large categorical norms cheap; it is
algebraically identical to in-place NIPALS deflation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateInput, DimensionMismatch, KTooLarge

log = logging.getLogger(__name__)

# Fraction of a block's initial squared Frobenius norm below which its
# residual counts as fully explained and fitting stops early.
_REL_EXHAUST = 1e-24


@dataclass(frozen=True)
class PlsrModel:
    """Fitted rank-k latent mapping; immutable and safe to share."""

    k: int
    x_weights: np.ndarray   # (d, k_eff)
    x_loadings: np.ndarray  # (d, k_eff)
    y_loadings: np.ndarray  # (m, k_eff)
    x_rotations: np.ndarray  # (d, k_eff), W (P'W)^-1
    x_mean: np.ndarray
    y_mean: np.ndarray
    iterations_used: tuple[int, ...]

    @property
    def k_effective(self) -> int:
        return self.x_weights.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return self.x_weights.shape[0], self.y_loadings.shape[0]

    @cached_property
    def coef(self) -> np.ndarray:
        """d-by-m regression matrix; recomputable from the loadings."""
        return self.x_rotations @ self.y_loadings.T


def _matvec(A, v):
    out = A @ v
    return np.asarray(out).ravel()


def _col_means(A) -> np.ndarray:
    return np.asarray(A.mean(axis=0)).ravel()


def _col_sq_sums(A) -> np.ndarray:
    if sp.issparse(A):
        return np.asarray(A.multiply(A).sum(axis=0)).ravel()
    return np.einsum("ij,ij->j", A, A)


def _check_finite(A, name):
    data = A.data if sp.issparse(A) else A
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{name} contains non-finite values")


def _prepare(A, name):
    if sp.issparse(A):
        A = A.tocsr().astype(np.float64)
    else:
        A = np.asarray(A, dtype=np.float64)
        if A.ndim == 1:
            A = A.reshape(-1, 1)
        if A.ndim != 2:
            raise DimensionMismatch(f"{name} must be 2-d, got {A.ndim}-d")
    _check_finite(A, name)
    return A


class _CenteredBlock:
    """A centered, implicitly deflated data block.

    Represents ``B = A - 1 mean' - T C'`` where the correction columns
    (x-scores T against loadings C) grow as components are extracted.
    """

    def __init__(self, A, mean, n_components):
        self.A = A
        if sp.issparse(A):
            self.Acsc = A.tocsc()
            self.AT = A.T.tocsr()  # cached; A.T per matvec is expensive
        else:
            self.Acsc = None
            self.AT = A.T
        self.mean = mean
        n, width = A.shape
        self.T = np.empty((n, n_components))
        self.C = np.empty((width, n_components))
        self.a = 0
        col_sq = _col_sq_sums(A) - n * mean**2
        self.initial_col_sq = np.maximum(col_sq, 0.0)
        self.initial_total_sq = float(self.initial_col_sq.sum())
        self.residual_sq = self.initial_total_sq

    def matvec(self, v):
        out = _matvec(self.A, v) - float(self.mean @ v)
        if self.a:
            out -= self.T[:, :self.a] @ (self.C[:, :self.a].T @ v)
        return out

    def rmatvec(self, u):
        out = _matvec(self.AT, u) - float(u.sum()) * self.mean
        if self.a:
            out -= self.C[:, :self.a] @ (self.T[:, :self.a].T @ u)
        return out

    def column(self, j):
        if self.Acsc is not None:
            col = self.Acsc[:, [j]].toarray().ravel()
        else:
            col = self.A[:, j].copy()
        col -= self.mean[j]
        if self.a:
            col -= self.T[:, :self.a] @ self.C[j, :self.a]
        return col

    def first_active_column(self, threshold):
        """First column whose residual sum of squares exceeds threshold."""
        for j in range(self.A.shape[1]):
            col = self.column(j)
            if float(col @ col) > threshold:
                return col
        return None

    def deflate(self, t, c):
        self.T[:, self.a] = t
        self.C[:, self.a] = c
        self.a += 1
        self.residual_sq -= float(t @ t) * float(c @ c)


def fit_plsr(X, Y, k: int, max_iter: int = 1000, tol: float = 1e-6,
             seed: int | None = None) -> PlsrModel:
    """Fit a rank-k PLS2 mapping from X (n-by-d) to Y (n-by-m).

    Fitting is deterministic regardless of `seed`; the argument exists
    for interface parity with the other model family. Stops early when
    either block's residual is exhausted (data rank below k).
    """
    del seed
    X = _prepare(X, "X")
    Y = _prepare(Y, "Y")
    n, d = X.shape
    ny, m = Y.shape
    if ny != n:
        raise DimensionMismatch(f"X has {n} rows but Y has {ny}")
    if n < 2:
        raise DegenerateInput("need at least 2 samples")
    if not 1 <= k <= min(n, d):
        raise KTooLarge(f"k={k} outside [1, min(n, d)={min(n, d)}]")

    x_mean = _col_means(X)
    y_mean = _col_means(Y)
    E = _CenteredBlock(X, x_mean, k)
    F = _CenteredBlock(Y, y_mean, k)
    if E.initial_total_sq <= 0.0 or E.initial_col_sq.max() <= _REL_EXHAUST:
        raise DegenerateInput("X has zero variance after centering")

    x_exhaust = E.initial_total_sq * _REL_EXHAUST
    y_exhaust = max(F.initial_total_sq, 1.0) * _REL_EXHAUST
    eps = np.finfo(np.float64).eps

    W = np.empty((d, k))
    P = np.empty((d, k))
    Q = np.empty((m, k))
    iterations = []

    for comp in range(k):
        if F.residual_sq <= y_exhaust:
            break
        u = F.first_active_column(y_exhaust)
        if u is None:
            break
        w_old = None
        ite = 0
        while True:
            ite += 1
            w = E.rmatvec(u) / float(u @ u)
            w_norm = np.linalg.norm(w)
            if w_norm**2 <= x_exhaust:
                w = None
                break
            w /= w_norm
            t = E.matvec(w)
            tt = float(t @ t)
            if tt <= x_exhaust:
                w = None
                break
            q = F.rmatvec(t) / tt
            if w_old is not None and float((w - w_old) @ (w - w_old)) < tol:
                break
            if ite >= max_iter:
                log.warning("component %d: max_iter=%d reached", comp, max_iter)
                break
            w_old = w
            u = F.matvec(q) / (float(q @ q) + eps)
        if w is None:
            break
        # fix sign: largest-magnitude weight entry positive
        if w[np.argmax(np.abs(w))] < 0:
            w, t, q = -w, -t, -q
        p = E.rmatvec(t) / tt
        E.deflate(t, p)
        F.deflate(t, q)
        W[:, comp] = w
        P[:, comp] = p
        Q[:, comp] = q
        iterations.append(ite)

    k_eff = len(iterations)
    if k_eff == 0:
        # Y carries no variance (or none reachable from X): the mean-only
        # model is the least-squares fit, so return it rather than fail.
        log.warning("fit_plsr: Y block exhausted before any component; "
                    "returning a mean-only model")
    elif k_eff < k:
        log.info("fit_plsr: stopped after %d of %d components (rank exhausted)",
                 k_eff, k)
    W, P, Q = W[:, :k_eff], P[:, :k_eff], Q[:, :k_eff]
    ptw = P.T @ W
    try:
        rotations = W @ np.linalg.inv(ptw)
    except np.linalg.LinAlgError:
        rotations = W @ np.linalg.pinv(ptw)
    return PlsrModel(
        k=k,
        x_weights=W,
        x_loadings=P,
        y_loadings=Q,
        x_rotations=rotations,
        x_mean=x_mean,
        y_mean=y_mean,
        iterations_used=tuple(iterations),
    )


def predict_plsr(model: PlsrModel, X_new) -> np.ndarray:
    """Predict feature values: (X_new - x_mean) W (P'W)^-1 Q' + y_mean."""
    X_new = _prepare(X_new, "X_new")
    d = model.x_weights.shape[0]
    if X_new.shape[1] != d:
        raise DimensionMismatch(
            f"X_new has {X_new.shape[1]} columns, model expects {d}"
        )
    scores = np.asarray(X_new @ model.x_rotations)
    scores -= model.x_mean @ model.x_rotations
    return scores @ model.y_loadings.T + model.y_mean


def save_plsr_model(model: PlsrModel, path) -> None:
    np.savez(
        path,
        format="normmap-plsr-v1",
        k=model.k,
        x_weights=model.x_weights,
        x_loadings=model.x_loadings,
        y_loadings=model.y_loadings,
        x_rotations=model.x_rotations,
        x_mean=model.x_mean,
        y_mean=model.y_mean,
        iterations_used=np.array(model.iterations_used, dtype=np.int64),
    )


def load_plsr_model(path) -> PlsrModel:
    with np.load(path) as data:
        if str(data["format"]) != "normmap-plsr-v1":
            raise ValueError(f"not a PLSR model file: {path}")
        return PlsrModel(
            k=int(data["k"]),
            x_weights=data["x_weights"],
            x_loadings=data["x_loadings"],
            y_loadings=data["y_loadings"],
            x_rotations=data["x_rotations"],
            x_mean=data["x_mean"],
            y_mean=data["y_mean"],
            iterations_used=tuple(int(i) for i in data["iterations_used"]),
        )
