"""Dense numerical kernels: symmetric eigensolver, normal-equation least
squares and k-means++.

The matrices handled here are small (customer counts, at most a few hundred
rows), so the eigensolver is a plain cyclic Jacobi iteration.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError

COND_LIMIT = 1e10
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray  # descending
    vectors: np.ndarray  # column i pairs with values[i]


@dataclass(frozen=True)
class LeastSquaresSolution:
    coefficients: np.ndarray
    residual_l2: float
    condition_flag: str  # "well_conditioned" | "regularized"

    @property
    def regularized(self):
        return self.condition_flag == "regularized"


def _as_symmetric(m):
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise NumericsError("matrix is not symmetric")
    return 0.5 * (a + a.T)


def symmetric_eigen(m, tol=1e-15, max_sweeps=100):
    """Full eigendecomposition of a real symmetric matrix by cyclic Jacobi
    rotations.

    Eigenvalues are returned in descending order. Each eigenvector's sign is
    fixed so that its largest-magnitude entry is positive.
    """
    a = _as_symmetric(m)
    n = a.shape[0]
    v = np.eye(n)
    fro = np.linalg.norm(a)
    if n > 1 and fro > 0:
        for _ in range(max_sweeps):
            off = np.linalg.norm(a - np.diag(np.diag(a)))
            if off <= tol * fro:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if abs(apq) <= 1e-300:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:  # theta**2 would overflow
                        t = 0.5 / theta
                    else:
                        t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    app = a[p, p] - t * apq
                    aqq = a[q, q] + t * apq
                    col_p = a[:, p].copy()
                    col_q = a[:, q]
                    a[:, p] = c * col_p - s * col_q
                    a[:, q] = s * col_p + c * col_q
                    a[p, :] = a[:, p]
                    a[q, :] = a[:, q]
                    a[p, p] = app
                    a[q, q] = aqq
                    a[p, q] = a[q, p] = 0.0
                    vp = v[:, p].copy()
                    v[:, p] = c * vp - s * v[:, q]
                    v[:, q] = s * vp + c * v[:, q]
        else:
            raise NumericsError("Jacobi iteration did not converge")

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    if n:
        pivot = np.argmax(np.abs(v), axis=0)
        signs = np.sign(v[pivot, np.arange(n)])
        signs[signs == 0] = 1.0
        v = v * signs
    return EigenPairs(values=values, vectors=v)


def _check_design(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or y.ndim != 1:
        raise NumericsError("X must be T x k and y a vector of length T")
    t, k = x.shape
    if y.shape[0] != t:
        raise NumericsError(f"dimension mismatch: X has {t} rows, y has {y.shape[0]}")
    if k < 1 or t < k:
        raise NumericsError(f"need T >= k >= 1, got T={t}, k={k}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NumericsError("non-finite values in least-squares inputs")
    if not np.any(x):
        raise NumericsError("design matrix is all zeros")
    return x, y


def solve_normal_equations(x, y):
    """Least squares ``min ||X c - y||_2`` through the normal equations.

    When ``cond(X^T X)`` exceeds 1e10 a ridge of ``1e-8 * trace(X^T X) / k`` is
    added to the diagonal and the solution is flagged ``regularized``.
    """
    x, y = _check_design(x, y)
    k = x.shape[1]
    gram = x.T @ x
    rhs = x.T @ y
    eig = np.linalg.eigvalsh(gram)
    cond = eig[-1] / eig[0] if eig[0] > 0 else np.inf
    flag = "well_conditioned"
    if cond > COND_LIMIT:
        gram = gram + RIDGE_SCALE * np.trace(gram) / k * np.eye(k)
        flag = "regularized"
    coef = np.linalg.solve(gram, rhs)
    resid = float(np.linalg.norm(x @ coef - y))
    return LeastSquaresSolution(coefficients=coef, residual_l2=resid, condition_flag=flag)


def solve_two_column_batch(a, b, y):
    """Solve many two-column problems ``min ||[a_i, b_i] c_i - y||`` at once.

    ``a`` and ``b`` are ``(B, T)`` stacks sharing one target ``y``. Applies the
    same conditioning rule as :func:`solve_normal_equations`. Returns
    ``(coef, regularized)`` with ``coef`` of shape ``(B, 2)``.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    s_aa = np.einsum("ij,ij->i", a, a)
    s_bb = np.einsum("ij,ij->i", b, b)
    s_ab = np.einsum("ij,ij->i", a, b)
    r_a = a @ y
    r_b = b @ y
    trace = s_aa + s_bb
    if np.any(trace == 0):
        raise NumericsError("design matrix is all zeros")
    half = 0.5 * (s_aa - s_bb)
    rad = np.sqrt(half * half + s_ab * s_ab)
    hi = 0.5 * trace + rad
    lo = 0.5 * trace - rad
    with np.errstate(divide="ignore"):
        cond = np.where(lo > 0, hi / np.where(lo > 0, lo, 1.0), np.inf)
    regularized = cond > COND_LIMIT
    ridge = np.where(regularized, RIDGE_SCALE * trace / 2.0, 0.0)
    g_aa = s_aa + ridge
    g_bb = s_bb + ridge
    det = g_aa * g_bb - s_ab * s_ab
    alpha = (g_bb * r_a - s_ab * r_b) / det
    beta = (g_aa * r_b - s_ab * r_a) / det
    return np.column_stack([alpha, beta]), regularized


def _sq_dists(points, centers):
    d = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def kmeans_plusplus(points, k, rng):
    n = points.shape[0]
    idx = [int(rng.integers(n))]
    closest = _sq_dists(points, points[idx])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        closest = np.minimum(closest, _sq_dists(points, points[[nxt]])[:, 0])
    return points[idx].copy()


def lloyd(points, centers, max_iter=300):
    """Lloyd iterations until the assignment stops changing.

    Returns ``(labels, centers, wcss_history)``; the history holds the
    within-cluster sum of squares after each assignment step.
    """
    centers = np.array(centers, dtype=float)
    k = centers.shape[0]
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dists(points, centers)
        new_labels = np.argmin(d, axis=1)
        history.append(float(d[np.arange(len(points)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
        # an emptied cluster takes over the point worst served by its center
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            own = _sq_dists(points, centers)[np.arange(len(points)), labels]
            donors = np.bincount(labels, minlength=k)[labels] > 1
            own[~donors] = -1.0
            far = int(np.argmax(own))
            labels[far] = j
            centers[j] = points[far]
    return labels, centers, history


def wcss(points, labels, centers):
    points = np.asarray(points, dtype=float)
    return float(np.sum((points - centers[labels]) ** 2))


def kmeans(points, k, seed=0, restarts=10, max_iter=300):
    """k-means++ seeded Lloyd clustering, best of ``restarts`` by WCSS.

    Returns ``(labels, centers)``. Deterministic for a fixed seed.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise NumericsError("kmeans needs a non-empty 2-D array of points")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise NumericsError(f"k={k} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        init = kmeans_plusplus(points, k, rng)
        labels, centers, _ = lloyd(points, init, max_iter=max_iter)
        score = wcss(points, labels, centers)
        if best is None or score < best[0]:
            best = (score, labels, centers)
    return best[1], best[2]
