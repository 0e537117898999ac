"""Dense linear algebra for the saliency heads.

Two jobs: cosine-similarity matrices over patch features, and the second
smallest eigenpair of the generalized problem (D - W) v = lam D v for a
symmetric nonnegative weight matrix W with positive degrees.  The
generalized problem is reduced to the standard symmetric one through
L_sym = I - D^{-1/2} W D^{-1/2}; eigenpairs map back via v = D^{-1/2} u.
Returned eigenvectors have unit Euclidean norm and are D-orthogonal to
the all-ones (trivial) eigenvector, so the output is invariant under
uniform rescaling of W.

Solver routing: dense tridiagonalization (scipy.linalg.eigh on a subset)
up to DENSE_ORDER_LIMIT, Lanczos with full reorthogonalization above.
Patch grids top out around 4000 nodes, so robustness beats asymptotics.
Disconnected graphs are answered in closed form: lam2 = 0 with a
component-indicator eigenvector.  A single-vector Krylov space contains
only one copy of the degenerate zero eigenvalue, so Lanczos alone would
silently skip to the third eigenvalue there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.csgraph

from .errors import NoConvergence, SingularDegree, ZeroNormRow

DENSE_ORDER_LIMIT = 512

# Ritz residual tolerance and the step budget multiplier for Lanczos.
_LANCZOS_TOL = 1e-10
_LANCZOS_BUDGET_PER_N = 10
# Fixed seed for Lanczos start vectors: results must be bit-identical
# across calls and across worker threads.
_LANCZOS_SEED = 0x5EED

_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class EigenResult:
    """Second-smallest generalized eigenpair.

    The eigenvector has unit Euclidean norm, is D-orthogonal to the
    all-ones vector, and carries a positive largest-magnitude entry.
    """

    eigenvalue: float
    eigenvector: np.ndarray


def cosine_similarity_matrix(features: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity of feature rows.

    Returns an exactly symmetric matrix with unit diagonal.  Raises
    ZeroNormRow if any feature row is identically zero.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2:
        raise ValueError(f"features must be 2-d, got shape {feats.shape}")
    norms = np.linalg.norm(feats, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise ZeroNormRow(f"feature rows {bad.tolist()} have zero norm")
    unit = feats / norms[:, None]
    sim = unit @ unit.T
    # matmul of x with itself is not exactly symmetric in floats
    sim = (sim + sim.T) / 2.0
    np.fill_diagonal(sim, 1.0)
    return sim


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    # argmax returns the lowest index among ties
    if v[np.argmax(np.abs(v))] < 0:
        return -v
    return v


def _project_out_constant(v: np.ndarray, v_first: np.ndarray,
                          deg: np.ndarray) -> np.ndarray:
    """Remove the D-component along the all-ones (trivial) eigenvector.

    The Laplacian always annihilates constants, so for a connected graph
    the second eigenvector is already D-orthogonal to ones and this is a
    float-noise no-op.  For a (near-)degenerate pair the solver may hand
    back an arbitrary basis of the eigenspace; projecting fixes the
    Fiedler convention.  If the nominal second vector IS the trivial
    direction, its partner in the pair carries the structure instead.
    """
    total = deg.sum()

    def projected(u: np.ndarray) -> tuple[np.ndarray, float]:
        shifted = u - (float(deg @ u) / total)
        return shifted, float(shifted @ shifted)

    out, norm_sq = projected(v)
    if norm_sq < 1e-12:
        out, norm_sq = projected(v_first)
    return out / np.sqrt(norm_sq)


def second_smallest_generalized_eigpair(weights: np.ndarray) -> EigenResult:
    """Solve (D - W) v = lam D v for the second-smallest eigenpair.

    W must be symmetric with finite entries and strictly positive row sums
    (degrees).  The returned eigenvector has unit Euclidean norm, is
    D-orthogonal to the all-ones vector, and its largest-magnitude entry
    is positive (ties broken by lowest index).
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weight matrix must be square, got shape {w.shape}")
    n = w.shape[0]
    if n < 2:
        raise ValueError("second-smallest eigenpair needs order >= 2")
    if not np.isfinite(w).all():
        raise ValueError("weight matrix has non-finite entries")
    deg = w.sum(axis=1)
    if (deg <= 0.0).any():
        bad = np.flatnonzero(deg <= 0.0)
        raise SingularDegree(f"nonpositive degrees at nodes {bad.tolist()}")

    num_components, labels = scipy.sparse.csgraph.connected_components(
        scipy.sparse.csr_matrix(w != 0.0), directed=False)
    if num_components > 1:
        return _disconnected_eigpair(deg, labels)

    inv_sqrt = 1.0 / np.sqrt(deg)
    lsym = -(w * inv_sqrt[:, None]) * inv_sqrt[None, :]
    np.fill_diagonal(lsym, lsym.diagonal() + 1.0)
    lsym = (lsym + lsym.T) / 2.0

    if n <= DENSE_ORDER_LIMIT:
        vals, vecs = scipy.linalg.eigh(lsym, subset_by_index=[0, 1])
    else:
        vals, vecs = _lanczos_two_smallest(lsym)

    # near-degenerate lam2: keep index 1 of the sorted pair, by decision
    lam = float(vals[1])
    v = _project_out_constant(vecs[:, 1] * inv_sqrt,
                              vecs[:, 0] * inv_sqrt, deg)
    v = _canonical_sign(v)

    residual = (deg * v - w @ v) - lam * (deg * v)
    if np.abs(residual).max() > _RESIDUAL_TOL * deg.max():
        raise NoConvergence(
            f"residual {np.abs(residual).max():.3e} exceeds "
            f"{_RESIDUAL_TOL * deg.max():.3e} for order {n}")
    return EigenResult(eigenvalue=lam, eigenvector=v)


def _disconnected_eigpair(deg: np.ndarray, labels: np.ndarray) -> EigenResult:
    """Exact kernel eigenpair for a disconnected graph: lam2 = 0.

    The Laplacian annihilates per-component constants, so any such vector
    is an exact 0-eigenvector; take the one splitting node 0's component
    from the rest, D-orthogonal to ones.
    """
    in_first = labels == labels[0]
    v = np.where(in_first, float(deg[~in_first].sum()),
                 -float(deg[in_first].sum()))
    v /= np.linalg.norm(v)
    return EigenResult(eigenvalue=0.0, eigenvector=_canonical_sign(v))


def _lanczos_two_smallest(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two smallest eigenpairs of a dense symmetric matrix by Lanczos.

    Full reorthogonalization (two Gram-Schmidt sweeps per step) keeps the
    basis orthonormal, so no ghost eigenvalues.  Ritz pairs are checked
    every few steps; the basis is capped at n where the decomposition is
    exact anyway.  Breakdowns restart with a fresh orthogonalized vector.
    """
    n = a.shape[0]
    budget = _LANCZOS_BUDGET_PER_N * n
    rng = np.random.default_rng(_LANCZOS_SEED)

    basis = np.empty((n, 0))
    alphas: list[float] = []
    betas: list[float] = []

    def fresh_direction() -> np.ndarray:
        vec = rng.standard_normal(n)
        if basis.shape[1]:
            vec -= basis @ (basis.T @ vec)
            vec -= basis @ (basis.T @ vec)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise NoConvergence("cannot generate an independent start vector")
        return vec / norm

    q = fresh_direction()
    steps = 0
    while True:
        if steps >= budget:
            raise NoConvergence(f"Lanczos budget {budget} exhausted at order {n}")
        steps += 1

        basis = np.hstack([basis, q[:, None]])
        w = a @ q
        alphas.append(float(q @ w))
        w -= basis @ (basis.T @ w)
        w -= basis @ (basis.T @ w)
        beta = float(np.linalg.norm(w))
        k = basis.shape[1]

        done = k == n
        if not done and k >= 2 and (k % 5 == 0 or beta <= _LANCZOS_TOL):
            theta, s = scipy.linalg.eigh_tridiagonal(alphas, betas)
            # Ritz residual for sorted pair i is |beta_k * s[k-1, i]|
            done = bool(np.all(beta * np.abs(s[-1, :2]) <= _LANCZOS_TOL))
        if done:
            theta, s = scipy.linalg.eigh_tridiagonal(alphas, betas)
            ritz = basis @ s[:, :2]
            ritz /= np.linalg.norm(ritz, axis=0)
            return theta[:2], ritz
        if beta <= _LANCZOS_TOL:
            # invariant subspace found before two pairs converged
            betas.append(0.0)
            q = fresh_direction()
        else:
            betas.append(beta)
            q = w / beta
