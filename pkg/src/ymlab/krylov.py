"""Lanczos machinery for e^{-tM} acting on vectors and for quadratic forms.

``lanczos_quadrature`` runs one Lanczos recursion per column and returns the
Gauss quadrature rule (nodes, weights) for the spectral measure of each
column; ``<z, f(M) z>`` then costs nothing extra for any f, in particular for
e^{-tM} on a whole grid of t.  Gauss quadrature is insensitive to the loss of
orthogonality of plain Lanczos, so no reorthogonalization is done there.
``expm_multiply`` keeps the basis (full reorthogonalization) to return vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ymlab.errors import ConvergenceError

MAX_STEPS = 600


@dataclass
class GaussRule:
    nodes: list      # per column: Ritz values
    weights: list    # per column: squared first components times ||z||^2

    def quadratic_form(self, fun) -> np.ndarray:
        """sum_k w_k f(theta_k) per column."""
        return np.array([np.dot(w, fun(x)) for x, w in zip(self.nodes, self.weights)])

    def heat(self, ts) -> np.ndarray:
        """<z, e^{-tM} z> for every column (rows) and every t (columns)."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return np.array([np.exp(-np.outer(ts, x)) @ w for x, w in zip(self.nodes, self.weights)])

    @property
    def lowest_ritz(self) -> float:
        return float(min(np.min(x) for x in self.nodes))


def _rule(alpha, beta, norm2):
    if len(alpha) == 1:
        return np.array(alpha), np.array([norm2])
    theta, S = scipy.linalg.eigh_tridiagonal(np.asarray(alpha), np.asarray(beta))
    return theta, norm2 * S[0] ** 2


def lanczos_quadrature(matmat, Z, ts, tol=1e-10, max_steps=MAX_STEPS, check_every=8, min_steps=8):
    """Gauss rules for the columns of Z, converged for e^{-tM} at every t in ``ts``.

    Convergence: the heat quadratic forms at all ``ts`` change by less than
    ``tol`` (relative to the column norm, or to the form itself once it
    exceeds that) between successive checks.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    n, k = Z.shape
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    norms = np.linalg.norm(Z, axis=0)
    active = norms > 0
    Q = np.zeros_like(Z)
    Q[:, active] = Z[:, active] / norms[active]
    Q_prev = np.zeros_like(Z)
    alphas = [[] for _ in range(k)]
    betas = [[] for _ in range(k)]
    done = ~active
    prev_est = np.full((k, len(ts)), np.nan)
    b_prev = np.zeros(k)
    for step in range(1, max_steps + 1):
        cols = np.flatnonzero(~done)
        if cols.size == 0:
            break
        W = matmat(Q[:, cols])
        a = np.einsum("ij,ij->j", Q[:, cols], W)
        W -= Q[:, cols] * a + Q_prev[:, cols] * b_prev[cols]
        b = np.linalg.norm(W, axis=0)
        for j, c in enumerate(cols):
            alphas[c].append(a[j])
        breakdown = b <= 1e-12 * np.maximum(1.0, np.abs(a))
        for j, c in enumerate(cols):
            if breakdown[j]:
                done[c] = True  # invariant subspace: rule is exact
            else:
                betas[c].append(b[j])
        Q_prev[:, cols] = Q[:, cols]
        b_prev[cols] = b
        live = cols[~breakdown]
        Q[:, live] = W[:, ~breakdown] / b[~breakdown]
        if step >= min_steps and step % check_every == 0:
            for c in np.flatnonzero(~done):
                x, w = _rule(alphas[c], betas[c][: len(alphas[c]) - 1], norms[c] ** 2)
                # clipped: negative modes make e^{-tx} grow without bound
                est = np.exp(np.minimum(-np.outer(ts, x), 700.0)) @ w
                if np.all(np.abs(est - prev_est[c]) <= tol * np.maximum(norms[c] ** 2, np.abs(est))):
                    done[c] = True
                prev_est[c] = est
    if not np.all(done):
        bad = np.flatnonzero(~done)
        raise ConvergenceError(f"Lanczos quadrature did not converge in {max_steps} steps",
                               residual=float(np.nanmax(np.abs(prev_est[bad]))))
    nodes, weights = [], []
    for c in range(k):
        if not active[c]:
            nodes.append(np.zeros(1))
            weights.append(np.zeros(1))
            continue
        x, w = _rule(alphas[c], betas[c][: len(alphas[c]) - 1], norms[c] ** 2)
        nodes.append(x)
        weights.append(w)
    return GaussRule(nodes, weights)


def expm_multiply(matmat, v, t, tol=1e-8, max_steps=MAX_STEPS, check_every=4):
    """e^{-tM} v for symmetric M via Lanczos with full reorthogonalization.

    Stops when two successive approximations differ by less than tol/10 in
    relative norm; the returned residual estimate is that difference.
    """
    v = np.asarray(v, dtype=float)
    beta0 = np.linalg.norm(v)
    if beta0 == 0:
        return np.zeros_like(v), 0.0
    n = v.size
    m_cap = min(max_steps, n)
    V = np.zeros((m_cap + 1, n))
    V[0] = v / beta0
    alpha, beta = [], []
    prev = None
    err = np.inf
    for j in range(m_cap):
        w = matmat(V[j])
        a = float(V[j] @ w)
        w -= a * V[j] + (beta[-1] * V[j - 1] if j else 0.0)
        # full reorthogonalization, twice is enough
        for _ in range(2):
            w -= V[: j + 1].T @ (V[: j + 1] @ w)
        alpha.append(a)
        b = float(np.linalg.norm(w))
        m = j + 1
        happy = b <= 1e-13 * max(1.0, abs(a))
        if happy or m % check_every == 0 or m == m_cap:
            T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
            y = beta0 * (V[:m].T @ scipy.linalg.expm(-t * T)[:, 0])
            if happy:
                return y, 0.0
            if prev is not None:
                err = np.linalg.norm(y - prev) / max(np.linalg.norm(y), 1e-300)
                if err < tol / 10:
                    return y, err
            prev = y
        beta.append(b)
        V[j + 1] = w / b
    raise ConvergenceError(f"Krylov exponential did not converge in {m_cap} steps", residual=err)
