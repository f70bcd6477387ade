import numpy as np


def m_semicircle(z):
    """Stieltjes transform of the semicircle law, ``(-z + sqrt(z^2 - 4)) / 2``.

    The square root is taken as ``sqrt(z - 2) * sqrt(z + 2)`` with principal
    branches, which is analytic off ``[-2, 2]`` and behaves like ``z`` at
    infinity. That selects ``Im m > 0`` on the upper half plane, gives
    ``m(conj z) = conj m(z)`` and is continuous across ``Re z = 0``.
    Works elementwise on arrays.
    """
    z = np.asarray(z, dtype=np.complex128)
    root = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    out = 0.5 * (-z + root)
    return out[()] if out.ndim == 0 else out


def rho_semicircle(x):
    """Semicircle density ``sqrt(4 - x^2) / (2 pi)`` on ``[-2, 2]``, zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * np.pi)
    return out[()] if out.ndim == 0 else out


def semicircle_cdf(x):
    """Closed-form distribution function of the semicircle law."""
    x = np.clip(np.asarray(x, dtype=float), -2.0, 2.0)
    out = 0.5 + (x * np.sqrt(4.0 - x * x)) / (4.0 * np.pi) + np.arcsin(x / 2.0) / np.pi
    return out[()] if out.ndim == 0 else out
