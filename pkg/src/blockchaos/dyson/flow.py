"""Characteristic flow ``dz/dt = -z/2 - <M_t>``, ``dLambda/dt = -Lambda/2``.

Lambda only shrinks by ``e^{-(t-t0)/2}``, so the state is the complex number z
and the flow is integrated as a real 2-vector with DOP853. Each right-hand side
evaluation re-solves the self-consistent equation at ``(z_t, Lambda_t)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import ConfigError, ContractError
from .solver import DysonModel, DysonSolution, as_model, solve_m


@dataclass(frozen=True)
class FlowState:
    t: float
    z_t: complex
    lambda_scale: float
    m_t: complex
    t_c_estimate: float


@dataclass
class FlowTrajectory:
    """Recorded states plus a dense interpolant of z(t)."""

    t0: float
    model: DysonModel = field(repr=False)
    states: List[FlowState]
    truncated: bool
    conjugate_flow: bool = False
    _dense: object = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def z(self) -> np.ndarray:
        return np.array([s.z_t for s in self.states])

    @property
    def m(self) -> np.ndarray:
        return np.array([s.m_t for s in self.states])

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def z_at(self, t: float) -> complex:
        lo, hi = self.states[0].t, self.states[-1].t
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise ContractError(f"t = {t} lies outside the integrated range [{lo}, {hi}]")
        y = self._dense(t)
        z = complex(y[0], y[1])
        return np.conj(z) if self.conjugate_flow else z

    def scale_at(self, t: float) -> float:
        return float(np.exp(-(t - self.t0) / 2.0))

    def solution_at(self, t: float, initial: Optional[complex] = None) -> DysonSolution:
        """Re-solve the Dyson equation at ``(z_t, Lambda_t)`` for an arbitrary t."""
        model_t = self.model.at_scale(self.model.scale * self.scale_at(t))
        return solve_m(self.z_at(t), model_t, initial=initial)

    def conjugate(self) -> "FlowTrajectory":
        """The conjugate flow ``(conj z_t, Lambda_t)``."""
        states = [FlowState(s.t, np.conj(s.z_t), s.lambda_scale, np.conj(s.m_t), s.t_c_estimate)
                  for s in self.states]
        return FlowTrajectory(self.t0, self.model, states, self.truncated, not self.conjugate_flow, self._dense)


def flow_integrate(interaction, z0: complex, t_end: Optional[float] = None, t0: float = 0.0,
                   d_blocks=None, block_size=None, t_eval: Optional[Sequence[float]] = None,
                   rtol: float = 1e-11, atol: float = 1e-13, im_floor: float = 1e-6,
                   max_step: float = np.inf) -> FlowTrajectory:
    """Integrate the characteristic flow from ``(t0, z0, Lambda)``.

    Integration stops at ``t_end`` or when ``Im z_t`` falls to ``im_floor``,
    whichever comes first; in the latter case ``truncated`` is set. With
    ``t_end=None`` the flow runs until the floor. States are recorded at the
    solver's steps, or at ``t_eval`` if given.
    """
    model = as_model(interaction, d_blocks, block_size)
    z0 = complex(z0)
    if z0.imag <= 0:
        raise ConfigError("the flow starts from Im z > 0; use FlowTrajectory.conjugate() for the mirror flow")
    if z0.imag <= im_floor:
        raise ConfigError(f"Im z0 = {z0.imag} is already at or below the floor {im_floor}")
    base_scale = model.scale
    first = solve_m(z0, model)
    if t_end is None:
        # the flow identities give t_c = t0 + log(1 + Im z0 / Im m0); run a little past it
        t_end = t0 + 1.1 * np.log1p(z0.imag / first.m.imag) + 1.0
    if t_end <= t0:
        raise ConfigError("t_end must exceed t0")
    cache = {"m": first.m}

    def m_at(t, z):
        scale = base_scale * np.exp(-(t - t0) / 2.0)
        sol = solve_m(z, model.at_scale(scale), initial=cache["m"])
        cache["m"] = sol.m
        return sol.m

    def rhs(t, y):
        z = complex(y[0], y[1])
        if z.imag <= 0:
            return [-0.5 * y[0], -0.5 * y[1]]
        dz = -0.5 * z - m_at(t, z)
        return [dz.real, dz.imag]

    def floor_event(t, y):
        return y[1] - im_floor

    floor_event.terminal = True
    floor_event.direction = -1

    result = solve_ivp(rhs, (t0, t_end), [z0.real, z0.imag], method="DOP853", rtol=rtol, atol=atol,
                       events=floor_event, dense_output=True, t_eval=t_eval, max_step=max_step)
    if result.status < 0:
        raise ConfigError(f"flow integration failed: {result.message}")
    truncated = result.status == 1
    times = list(result.t)
    if truncated and result.t_events[0].size and (not times or times[-1] < result.t_events[0][0]):
        times.append(float(result.t_events[0][0]))
    states = []
    m_prev = first.m
    for t in times:
        y = result.sol(t)
        z = complex(y[0], y[1])
        scale = base_scale * np.exp(-(t - t0) / 2.0)
        sol = solve_m(z, model.at_scale(scale), initial=m_prev)
        m_prev = sol.m
        states.append(FlowState(float(t), z, float(scale / base_scale), sol.m,
                                float(t + z.imag / sol.m.imag)))
    return FlowTrajectory(t0, model, states, truncated, False, result.sol)


def crossing_time(traj: FlowTrajectory) -> float:
    """Time at which Im z_t reaches zero, extrapolated linearly from the last state.

    Only meaningful for trajectories that ran down to a small floor.
    """
    last = traj.final
    rate = 0.5 * last.z_t.imag + last.m_t.imag  # -d(Im z)/dt
    return last.t + last.z_t.imag / rate
