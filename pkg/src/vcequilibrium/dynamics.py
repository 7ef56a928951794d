"""Laws of motion for the stock of entrepreneurs and of VC effort."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams


def step(M_prev: float, H_prev: float, m_e_t: float, m_v_t: float, params: ModelParams):
    """One period: survivors plus successful (or fresh) entrants."""
    for name, x in (("M_prev", M_prev), ("H_prev", H_prev), ("m_e_t", m_e_t), ("m_v_t", m_v_t)):
        if not x >= 0:
            raise ValueError(f"{name} must be nonnegative, got {x!r}")
    M_t = params.s_e * M_prev + params.epsilon * m_e_t
    H_t = params.s_v * H_prev + m_v_t
    return M_t, H_t


def steady_state_entrants(M: float, H: float, params: ModelParams):
    """Entrant flows that keep (M, H) constant."""
    return (1.0 - params.s_e) * M / params.epsilon, (1.0 - params.s_v) * H


@dataclass(frozen=True, eq=False)
class TransitionPath:
    t: np.ndarray
    M: np.ndarray
    H: np.ndarray
    m_e: np.ndarray
    m_v: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        for name in ("M", "H", "m_e", "m_v"):
            series = getattr(self, name)
            if len(series) != n:
                raise ValueError(f"series {name} has length {len(series)}, expected {n}")
            if np.any(series < 0):
                raise ValueError(f"series {name} has negative entries")

    def rows(self):
        return zip(self.t.tolist(), self.M.tolist(), self.H.tolist(), self.m_e.tolist(), self.m_v.tolist())


def simulate_transition(M0: float, H0: float, T: int, params: ModelParams,
                        M_star: float, H_star: float) -> TransitionPath:
    """Path from (M0, H0) with entrant flows held at their steady-state values.

    Prices are frozen at the steady state, so the path is the affine recursion
    of :func:`step` and converges geometrically to ``(M_star, H_star)``.
    """
    if int(T) != T or T < 1:
        raise ValueError("T must be an integer >= 1")
    T = int(T)
    m_e, m_v = steady_state_entrants(M_star, H_star, params)
    M = np.empty(T + 1)
    H = np.empty(T + 1)
    M[0], H[0] = M0, H0
    for t in range(1, T + 1):
        M[t], H[t] = step(M[t - 1], H[t - 1], m_e, m_v, params)
    return TransitionPath(
        t=np.arange(T + 1),
        M=M,
        H=H,
        m_e=np.full(T + 1, m_e),
        m_v=np.full(T + 1, m_v),
    )


def geometric_path(x0: float, x_star: float, rate: float, T: int) -> np.ndarray:
    """Closed form ``x* + rate^t (x0 - x*)`` for t = 0..T."""
    t = np.arange(int(T) + 1)
    return x_star + rate**t * (x0 - x_star)


def half_life(rate: float) -> int:
    """Periods until a gap decaying at ``rate`` per period is at most halved."""
    if not 0.0 < rate < 1.0:
        raise ValueError("rate must lie in (0, 1)")
    return math.ceil(math.log(2.0) / -math.log(rate))
