"""Active subspaces from sampled input/output data.

The uncentered gradient covariance ``C = E[grad f grad f^T]`` is estimated by
the sample mean of outer products of (estimated) gradients.  Its leading
eigenvectors span the active subspace.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateError, ShapeError

# eigenvalues below this fraction of the largest are treated as zero
ZERO_FLOOR = 1e-15
TIE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class GradientSet:
    G: np.ndarray
    method: str
    fallbacks: int = 0

    def __post_init__(self):
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        if not np.all(np.isfinite(G)):
            raise ValueError("gradients must be finite")
        object.__setattr__(self, "G", G)


def global_linear_gradient(X, f) -> np.ndarray:
    """Slope vector of the least-squares hyperplane through ``(X, f)``."""
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    n, m = X.shape
    if n <= m:
        raise ValueError(f"global linear fit needs n > m (n={n}, m={m})")
    A = np.column_stack([np.ones(n), X])
    coef = np.linalg.lstsq(A, f, rcond=None)[0]
    return coef[1:]


def local_linear_gradients(X, f, k_neighbors: int | None = None):
    """Per-sample gradients from linear fits over the ``k`` nearest samples.

    Returns ``(G, fallbacks)``; rows whose local system is rank deficient use
    the global hyperplane slope and are counted in ``fallbacks``.
    """
    X = np.asarray(X, dtype=float)
    f = np.asarray(f, dtype=float)
    n, m = X.shape
    k = 2 * (m + 1) if k_neighbors is None else int(k_neighbors)
    if k < m + 1:
        raise ValueError(f"k_neighbors must be at least m + 1 = {m + 1}")
    k = min(k, n)
    _, nbrs = cKDTree(X).query(X, k=k)
    G = np.empty((n, m))
    fallbacks = 0
    glob = None
    for j in range(n):
        idx = nbrs[j]
        A = np.column_stack([np.ones(k), X[idx] - X[j]])
        coef, _, rank, _ = np.linalg.lstsq(A, f[idx], rcond=None)
        if rank < m + 1:
            if glob is None:
                glob = global_linear_gradient(X, f)
            G[j] = glob
            fallbacks += 1
        else:
            G[j] = coef[1:]
    return G, fallbacks


def estimate_gradients(X, f=None, method: str = "local-linear", k_neighbors=None,
                       gradients=None) -> GradientSet:
    """Gradient estimates at every sample.

    ``X`` may be a :class:`~bladeas.evaluation.Dataset` with ``f`` the name of
    an output column.  ``method="analytic"`` passes ``gradients`` through.
    """
    if hasattr(X, "output"):
        X, f = X.X, X.output(f)
    if method == "analytic":
        if gradients is None:
            raise ValueError("analytic method needs caller-supplied gradients")
        return GradientSet(gradients, "analytic")
    if method == "global-linear":
        g = global_linear_gradient(X, f)
        return GradientSet(np.tile(g, (np.shape(X)[0], 1)), "global-linear")
    if method == "local-linear":
        G, fallbacks = local_linear_gradients(X, f, k_neighbors)
        if fallbacks:
            warnings.warn(f"{fallbacks} local fits fell back to the global slope",
                          RuntimeWarning, stacklevel=2)
        return GradientSet(G, "local-linear", fallbacks)
    raise ValueError(f"unknown gradient method {method!r}")


@dataclass(frozen=True, eq=False)
class ActiveSubspace:
    eigenvalues: np.ndarray
    W: np.ndarray
    M: int
    ambiguous: bool = False

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def W1(self) -> np.ndarray:
        return self.W[:, :self.M]

    @property
    def W2(self) -> np.ndarray:
        return self.W[:, self.M:]

    def with_dimension(self, M: int) -> "ActiveSubspace":
        return _finish(self.eigenvalues, self.W, M)


def gradient_covariance(G) -> np.ndarray:
    G = G.G if isinstance(G, GradientSet) else np.atleast_2d(np.asarray(G, dtype=float))
    return G.T @ G / G.shape[0]


def auto_dimension(eigenvalues) -> int:
    """Index of the largest gap in ``log10`` eigenvalue, in ``[1, m-1]``."""
    lam = np.asarray(eigenvalues, dtype=float)
    floor = max(lam[0], np.finfo(float).tiny) * ZERO_FLOOR
    lam = np.maximum(lam, floor)
    gaps = np.log10(lam[:-1] / lam[1:])
    return int(np.argmax(gaps)) + 1


def _orient(W: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    lead = W[np.argmax(np.abs(W), axis=0), np.arange(W.shape[1])]
    return W * np.where(lead < 0, -1.0, 1.0)


def _finish(lam, W, M) -> ActiveSubspace:
    m = lam.size
    if M == "auto" or M is None:
        M = auto_dimension(lam)
    M = int(M)
    if not 1 <= M <= m - 1:
        raise ValueError(f"active dimension must be in [1, {m - 1}], got {M}")
    top = lam[0]
    ties = np.abs(np.diff(lam[:M + 1])) <= TIE_TOL * top
    ambiguous = bool(np.any(ties))
    if ambiguous:
        warnings.warn("repeated eigenvalues: active directions are not unique",
                      RuntimeWarning, stacklevel=3)
    return ActiveSubspace(lam, W, M, ambiguous)


def decompose(C, M="auto") -> ActiveSubspace:
    """Eigendecomposition of a symmetric PSD matrix, sorted descending."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ShapeError("covariance must be a square matrix")
    C = 0.5 * (C + C.T)
    lam, W = np.linalg.eigh(C)
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    if lam[0] <= 0.0:
        raise DegenerateError("gradient covariance is zero: no active direction")
    W = _orient(W[:, order])
    return _finish(lam, W, M)


def compute_active_subspace(G, M="auto") -> ActiveSubspace:
    C = gradient_covariance(G)
    if not np.any(C):
        raise DegenerateError("all gradients are zero")
    return decompose(C, M)


def shared_subspace(covariances, M="auto") -> ActiveSubspace:
    """Subspace of the trace-normalized sum of several gradient covariances."""
    covs = [np.asarray(C, dtype=float) for C in covariances]
    if len(covs) < 2:
        raise ValueError("shared subspace needs at least two covariance matrices")
    if len({C.shape for C in covs}) != 1:
        raise ShapeError("covariance matrices differ in shape")
    total = np.zeros_like(covs[0])
    for C in covs:
        tr = np.trace(C)
        if not tr > 0:
            raise DegenerateError("covariance with zero trace")
        total += C / tr
    return decompose(total, M)


def project(subspace: ActiveSubspace, mu) -> np.ndarray:
    """Active variables ``W1^T mu`` for one design or a batch of rows."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != subspace.m:
        raise ShapeError(f"expected {subspace.m} parameters, got {mu.shape[-1]}")
    return mu @ subspace.W1


def inactive(subspace: ActiveSubspace, mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != subspace.m:
        raise ShapeError(f"expected {subspace.m} parameters, got {mu.shape[-1]}")
    return mu @ subspace.W2


def reconstruct(subspace: ActiveSubspace, mu_M, zeta=None) -> np.ndarray:
    """Full-space point ``W1 mu_M + W2 zeta``; ``zeta=None`` means zero."""
    mu_M = np.atleast_1d(np.asarray(mu_M, dtype=float))
    if mu_M.shape[-1] != subspace.M:
        raise ShapeError(f"expected {subspace.M} active variables, got {mu_M.shape[-1]}")
    out = mu_M @ subspace.W1.T
    if zeta is not None:
        zeta = np.asarray(zeta, dtype=float)
        if zeta.shape[-1] != subspace.m - subspace.M:
            raise ShapeError(
                f"expected {subspace.m - subspace.M} inactive variables, got {zeta.shape[-1]}")
        out = out + zeta @ subspace.W2.T
    return out


def write_subspace(subspace: ActiveSubspace, path) -> None:
    """Eigenvalues on the first line, then ``W`` row by row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(format(v, ".17g") for v in subspace.eigenvalues) + "\n")
        for row in subspace.W:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_subspace(path, M="auto") -> ActiveSubspace:
    text = Path(path).read_text(encoding="utf-8")
    rows = [ln for ln in text.splitlines() if ln.strip()]
    lam = np.array([float(v) for v in rows[0].split(",")])
    W = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    if W.shape != (lam.size, lam.size):
        raise ShapeError("subspace file: W must be m x m")
    return _finish(lam, W, M)


def write_eigenvector_bars(subspace: ActiveSubspace, path, labels=None) -> None:
    """``(index, weight)`` pairs of the first eigenvector for bar plots."""
    w = subspace.W[:, 0]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,label,weight\n" if labels else "index,weight\n")
        for i, v in enumerate(w, 1):
            if labels:
                fh.write(f"{i},{labels[i - 1]},{format(v, '.17g')}\n")
            else:
                fh.write(f"{i},{format(v, '.17g')}\n")
