"""Planar Gaussian mixtures: EM fitting, moment collapse, 2x2 eigensystems.

All covariances are kept above a floor ``eps * I`` by clipping eigenvalues.
Clipping (rather than adding ``eps`` to the diagonal) is the exact
constrained maximum-likelihood covariance, so EM stays monotone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

COV_FLOOR = 1e-6
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class EmConfig:
    seed: int = 0
    max_iter: int = 100
    tol: float = 1e-8
    floor: float = COV_FLOOR


@dataclass(frozen=True)
class GmmConstruction:
    """How a per-timestep mixture is built from the modal endpoints.

    ``method`` is ``"modes"`` (one isotropic component per mode),
    ``"em"`` (EM fit on the endpoints) or ``"auto"``, which uses modes for
    up to ``max_modes_direct`` endpoints and EM beyond that.
    """

    method: str = "auto"
    sigma0: float = 0.5
    max_modes_direct: int = 8
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        if self.method not in ("auto", "modes", "em"):
            raise ValueError(f"unknown GMM construction {self.method!r}")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")

    def resolve(self, n_modes: int) -> str:
        if self.method != "auto":
            return self.method
        return "modes" if n_modes <= self.max_modes_direct else "em"


@dataclass(frozen=True, eq=False)
class Gmm2D:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: tuple[float, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float).reshape(-1, 2)
        cov = np.asarray(self.covariances, dtype=float).reshape(-1, 2, 2)
        if not (w.shape[0] == mu.shape[0] == cov.shape[0]) or w.ndim != 1:
            raise ValueError("weights, means and covariances disagree on component count")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if not np.allclose(cov, cov.transpose(0, 2, 1), atol=1e-12):
            raise ValueError("component covariance not symmetric")
        for name, arr in (("weights", w), ("means", mu), ("covariances", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        comp = rng.choice(self.n_components, size=n, p=self.weights)
        chol = np.stack([_psd_sqrt(c) for c in self.covariances])
        z = rng.standard_normal((n, 2))
        return self.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)


@dataclass(frozen=True, eq=False)
class Cov2:
    """A symmetric PSD 2x2 matrix with its eigensystem (``Q diag(l) Q^T``)."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_matrix(cls, matrix) -> "Cov2":
        m = np.asarray(matrix, dtype=float)
        l1, l2, q = eigen2(m)
        return cls(m, np.array([l1, max(l2, 0.0)]), q)

    @property
    def semi_axes(self) -> np.ndarray:
        """One-sigma ellipse semi-axis lengths (sqrt of the eigenvalues)."""
        return np.sqrt(self.eigenvalues)


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(c)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def floor_covariance(cov: np.ndarray, floor: float = COV_FLOOR) -> np.ndarray:
    """Clip the eigenvalues of a symmetric 2x2 matrix from below at ``floor``."""
    l1, l2, q = eigen2(cov)
    if l2 >= floor:
        return np.array(cov, dtype=float)
    lam = np.array([max(l1, floor), max(l2, floor)])
    out = (q * lam) @ q.T
    return 0.5 * (out + out.T)


def eigen2(matrix) -> tuple[float, float, np.ndarray]:
    """Closed-form eigen-decomposition of a symmetric 2x2 matrix.

    Returns ``(l1, l2, Q)`` with ``l1 >= l2`` and ``Q`` a rotation whose
    first column is the eigenvector of ``l1``.
    """
    m = np.asarray(matrix, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    a, b, c = m[0, 0], m[0, 1], m[1, 1]
    if abs(b - m[1, 0]) > 1e-9 * max(1.0, abs(b)):
        raise ValueError("matrix not symmetric")
    b = 0.5 * (b + m[1, 0])
    mid = 0.5 * (a + c)
    half_diff = 0.5 * (a - c)
    r = np.hypot(half_diff, b)
    l1 = mid + r
    det = a * c - b * b
    # det / l1 avoids the cancellation in mid - r when l2 << l1
    l2 = det / l1 if l1 > 0 and mid > 0 else mid - r
    l2 = min(l2, l1)  # det / l1 can round one ulp above l1 when r == 0
    theta = 0.5 * np.arctan2(b, half_diff)
    cs, sn = np.cos(theta), np.sin(theta)
    q = np.array([[cs, -sn], [sn, cs]])
    return float(l1), float(l2), q


def collapse(gmm: Gmm2D) -> Cov2:
    """Moment-match a mixture with one Gaussian (law of total covariance).

    ``sum_k w_k (mu_k - mu)(mu_k - mu)^T + sum_k w_k C_k``
    """
    w = gmm.weights
    centered = gmm.means - w @ gmm.means
    between = np.einsum("k,ki,kj->ij", w, centered, centered)
    within = np.einsum("k,kij->ij", w, gmm.covariances)
    sigma = between + within
    return Cov2.from_matrix(0.5 * (sigma + sigma.T))


def diversity_area(cov: Cov2) -> float:
    """sqrt(l1 * l2) = sqrt(det): the one-sigma ellipse area divided by pi.

    The pi factor is common to every score and is dropped.
    """
    l1, l2 = cov.eigenvalues
    return float(np.sqrt(max(l1 * l2, 0.0)))


def modes_as_gmm(pred, t: int, sigma0: float = 0.5, floor: float = COV_FLOOR) -> Gmm2D:
    """One isotropic component per mode, centred on the mode's point at step ``t``."""
    if not 0 <= t < pred.horizon:
        raise ValueError(f"timestep {t} outside horizon {pred.horizon}")
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    var = max(sigma0**2, floor)
    k = pred.n_modes
    covs = np.broadcast_to(var * np.eye(2), (k, 2, 2)).copy()
    return Gmm2D(pred.weights().copy(), pred.modes[:, t, :].copy(), covs)


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [points[rng.integers(points.shape[0])]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(points.shape[0])
        else:
            idx = rng.choice(points.shape[0], p=d2 / total)
        centers.append(points[idx])
    return np.array(centers, dtype=float)


def _component_logpdf(points, means, covs):
    # returns (n, k) log N(x | mu_k, C_k)
    det = covs[:, 0, 0] * covs[:, 1, 1] - covs[:, 0, 1] ** 2
    inv = np.empty_like(covs)
    inv[:, 0, 0] = covs[:, 1, 1]
    inv[:, 1, 1] = covs[:, 0, 0]
    inv[:, 0, 1] = inv[:, 1, 0] = -covs[:, 0, 1]
    inv /= det[:, None, None]
    diff = points[:, None, :] - means[None, :, :]
    maha = np.einsum("nki,kij,nkj->nk", diff, inv, diff)
    return -0.5 * (maha + np.log(det)[None, :]) - _LOG_2PI


def fit_em(points, n_components: int, config: EmConfig = EmConfig()) -> Gmm2D:
    """Maximum-likelihood mixture fit by expectation-maximization.

    Means are seeded with k-means++ from ``config.seed``. Iteration stops
    after ``config.max_iter`` steps or once the log-likelihood gain drops
    below ``config.tol``. The per-iteration log-likelihood trace is kept
    on the result.
    """
    x = np.asarray(points, dtype=float).reshape(-1, 2)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot fit a mixture to zero points")
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    if n_components > n:
        raise ValueError("more components than points")
    rng = np.random.default_rng(config.seed)
    k = n_components

    means = _kmeanspp(x, k, rng)
    centered = x - x.mean(axis=0)
    base = floor_covariance(centered.T @ centered / n, config.floor)
    covs = np.broadcast_to(base, (k, 2, 2)).copy()
    weights = np.full(k, 1.0 / k)

    trace: list[float] = []
    for _ in range(config.max_iter):
        # E-step
        log_joint = _component_logpdf(x, means, covs) + np.log(np.clip(weights, 1e-300, None))
        log_norm = logsumexp(log_joint, axis=1)
        resp = np.exp(log_joint - log_norm[:, None])
        # M-step
        nk = resp.sum(axis=0)
        alive = nk > 1e-12
        weights = nk / n
        safe_nk = np.where(alive, nk, 1.0)
        new_means = (resp.T @ x) / safe_nk[:, None]
        means = np.where(alive[:, None], new_means, means)
        for j in range(k):
            if not alive[j]:
                covs[j] = base
                continue
            d = x - means[j]
            cj = (resp[:, j, None] * d).T @ d / nk[j]
            covs[j] = floor_covariance(0.5 * (cj + cj.T), config.floor)
        ll = float(logsumexp(
            _component_logpdf(x, means, covs) + np.log(np.clip(weights, 1e-300, None)), axis=1
        ).sum())
        if trace and ll - trace[-1] < config.tol:
            trace.append(ll)
            break
        trace.append(ll)

    weights = weights / weights.sum()
    return Gmm2D(weights, means, covs, tuple(trace))


def endpoint_mixture(pred, t: int, construction: GmmConstruction = GmmConstruction()) -> Gmm2D:
    """Mixture over one prediction set's modal points at step ``t``."""
    method = construction.resolve(pred.n_modes)
    if method == "modes":
        return modes_as_gmm(pred, t, construction.sigma0, construction.em.floor)
    k = max(1, min(3, pred.n_modes // 3))
    return fit_em(pred.modes[:, t, :], k, construction.em)
