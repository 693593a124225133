"""Direction grids and sphere helpers (internal)."""

import numpy as np
from scipy.stats import qmc

_GOLDEN = np.pi * (3.0 - np.sqrt(5.0))


def circle_grid(n: int, offset: float = 0.0) -> np.ndarray:
    """n quasi-uniform unit vectors in R^2 (uniform angles)."""
    phi = offset + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(phi), np.sin(phi)])


def fibonacci_sphere(n: int) -> np.ndarray:
    """n quasi-uniform unit vectors in R^3 (Fibonacci lattice)."""
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = _GOLDEN * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def fibonacci_hemisphere(n: int) -> np.ndarray:
    """n quasi-uniform unit vectors with positive last coordinate."""
    i = np.arange(n)
    z = (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = _GOLDEN * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def sobol_sphere(dim: int, n: int, seed: int = 0) -> np.ndarray:
    """n low-discrepancy unit vectors in R^dim (Sobol points through the
    inverse-normal map, then normalized)."""
    eng = qmc.Sobol(d=dim, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    u = eng.random_base2(m)[:n]
    # avoid the exact corners where the normal inverse diverges
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    from scipy.special import ndtri

    g = ndtri(u)
    norm = np.linalg.norm(g, axis=1, keepdims=True)
    norm[norm == 0.0] = 1.0
    return g / norm


def direction_grid(dim: int, n: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform directions: uniform angles (d=2), Fibonacci (d=3),
    scrambled Sobol (d>=4)."""
    if dim == 2:
        return circle_grid(n)
    if dim == 3:
        return fibonacci_sphere(n)
    return sobol_sphere(dim, n, seed=seed)


def rotation_to_axis(u: np.ndarray, axis: int = -1) -> np.ndarray:
    """Orthogonal matrix Q with Q @ u = e_axis (Householder reflection).

    Q is an isometry (det may be -1); Q.T maps e_axis back to u.
    """
    u = np.asarray(u, dtype=float)
    d = u.shape[0]
    e = np.zeros(d)
    e[axis] = 1.0
    v = u - e
    nv = np.linalg.norm(v)
    if nv < 1e-14:
        return np.eye(d)
    v = v / nv
    return np.eye(d) - 2.0 * np.outer(v, v)


def unit(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x)
    if n == 0.0:
        raise ValueError("zero vector has no direction")
    return x / n


def check_unit(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Reject non-unit input; callers are required to normalize."""
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > tol:
        raise ValueError(f"expected a unit vector, got |u| = {np.linalg.norm(u)!r}")
    return u
