"""Density, distribution function and quantiles of the free-convolution law.

The distribution function is evaluated without quadrature through the log
potential ``Phi(z) = <log(Lambda - z - m)> + m^2/2``: it satisfies
``Phi'(z) = -m(z)`` and ``Phi(z) ~ log(-z)`` at infinity, hence equals
``int log(t - z) rho_N(t) dt`` and ``CDF(x) = -Im Phi(x + i0) / pi``.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np
from scipy.optimize import brentq

from ..errors import NumericalError
from .solver import DysonModel, as_model, solve_m

DEFAULT_ETA0 = 1e-4
CDF_ETA = 1e-10


def density_rho(energy, interaction, d_blocks=None, block_size=None, eta0: float = DEFAULT_ETA0,
                initial: Optional[complex] = None) -> float:
    """``pi^{-1} Im m(E + i0)`` by linear Richardson extrapolation from eta0 and eta0/2."""
    model = as_model(interaction, d_blocks, block_size)
    rho, _ = _density_point(float(energy), model, eta0, initial)
    return rho


def _density_point(e, model, eta0, initial):
    s1 = solve_m(complex(e, eta0), model, initial=initial)
    s2 = solve_m(complex(e, eta0 / 2.0), model, initial=s1.m)
    rho = (2.0 * s2.m.imag - s1.m.imag) / np.pi
    return max(rho, 0.0), s2.m


def density_table(energies: Iterable[float], interaction, d_blocks=None, block_size=None,
                  eta0: float = DEFAULT_ETA0) -> np.ndarray:
    """Density on a grid, warm-starting each point from its neighbour."""
    model = as_model(interaction, d_blocks, block_size)
    energies = np.asarray(list(energies), dtype=float)
    out = np.empty_like(energies)
    m_prev = None
    for i in np.argsort(energies):
        out[i], m_prev = _density_point(energies[i], model, eta0, m_prev)
    return out


class DistributionFunction:
    """``x -> int_{-inf}^x rho_N``, remembering the last solution for warm starts."""

    def __init__(self, model: DysonModel, eta: float = CDF_ETA):
        self.model = model
        self.eta = eta
        self._vals, self._weights = model.spectrum_weights()
        self._vals = model.scale * self._vals
        self._last = None

    def __call__(self, x: float, initial: Optional[complex] = None) -> float:
        value, m = self.evaluate(x, initial)
        return value

    def evaluate(self, x: float, initial: Optional[complex] = None):
        z = complex(x, self.eta)
        if initial is None and self._last is not None and abs(self._last[0] - x) < 0.05:
            initial = self._last[1]
        sol = solve_m(z, self.model, initial=initial)
        m = sol.m
        w = z + m
        phase = np.dot(self._weights, np.angle(self._vals - w))
        value = -(phase + (m * m).imag / 2.0) / np.pi
        self._last = (x, m)
        return float(min(max(value, 0.0), 1.0)), m


def support_bound(model: DysonModel) -> float:
    """Half-width of an interval containing the support: ``2 + ||Lambda|| + 0.5``."""
    return 2.0 + model.operator_norm + 0.5


def quantiles(k_list, interaction, d_blocks=None, block_size=None, grid_points: int = 400,
              xtol: float = 1e-13) -> np.ndarray:
    """Classical locations ``gamma_k`` with ``int_{-inf}^{gamma_k} rho_N = k / (DN)``.

    ``k`` is 1-based (k = 1..DN). For ``k = DN`` the target mass is lowered by
    1e-9 so that the root stays bracketed; that quantile sits at the upper edge
    anyway.
    """
    model = as_model(interaction, d_blocks, block_size)
    total = model.dim
    ks = np.asarray(list(k_list), dtype=int)
    if np.any(ks < 1) or np.any(ks > total):
        raise ValueError(f"quantile indices must lie in [1, {total}]")
    cdf = DistributionFunction(model)
    bound = support_bound(model)
    grid = np.linspace(-bound, bound, grid_points)
    values = np.empty(grid_points)
    ms = np.empty(grid_points, dtype=complex)
    m_prev = None
    for i, x in enumerate(grid):
        values[i], ms[i] = cdf.evaluate(x, m_prev)
        m_prev = ms[i]
    values = np.maximum.accumulate(values)
    if values[0] > 1e-9 or values[-1] < 1 - 1e-9:
        raise NumericalError("distribution function does not vanish/saturate on the bracketing interval",
                             lower=float(values[0]), upper=float(values[-1]), bound=bound)
    out = np.empty(ks.shape, dtype=float)
    for idx, k in np.ndenumerate(ks):
        q = min(k / total, 1.0 - 1e-9)
        j = int(np.searchsorted(values, q, side="left"))
        j = min(max(j, 1), grid_points - 1)
        lo, hi = grid[j - 1], grid[j]
        m_lo = ms[j - 1]

        def f(x, _q=q, _m=m_lo):
            return cdf.evaluate(x, _m)[0] - _q

        f_lo, f_hi = f(lo), f(hi)
        if f_lo == 0.0:
            out[idx] = lo
            continue
        if f_lo > 0 or f_hi < 0:
            raise NumericalError(f"quantile k={k} is not bracketed", lo=lo, hi=hi, f_lo=f_lo, f_hi=f_hi)
        out[idx] = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return out
