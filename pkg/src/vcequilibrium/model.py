"""Closed-form decision rules of entrepreneurs, banks and venture capitalists.

Every function here is a pure function of the firm type ``(z, c)``, prices and
parameters. Array inputs broadcast; scalar inputs give scalar outputs.

The two-date partial-equilibrium economy is the special case ``s_e = 0`` of the
infinite-horizon one: both use the same rules with the project discount
``Delta = delta * epsilon / (1 - delta * s_e)``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from .errors import PropositionWarning, ValidationError

SUM_TOL = 1e-12


class Mode(enum.IntEnum):
    NO_ENTRY = 0
    BANK = 1
    VC = 2


@dataclass(frozen=True)
class ModelParams:
    """Structural constants.

    Technology (``sigma``, ``theta``, ``beta``) and the survival block
    (``epsilon``, ``s_e``, ``s_v``) are the empirically pinned values; the rest
    is a default calibration chosen so that the bank and VC regions are both
    interior to the default type support.
    """

    chi: float = 0.3
    theta: float = 0.1
    beta: float = 0.6
    sigma: float = 5.0
    gamma: float = 1.0
    alpha: float = 0.7
    epsilon: float = 0.57
    r: float = 0.05
    s_e: float = 0.96
    s_v: float = 0.8
    I: float = 0.5
    kappa_e: float = 2.0
    kappa_v: float = 350.0
    eta_e: float = 2.0
    eta_v: float = 1.5
    L: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f.name, f"expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ValidationError(f.name, "must be finite")
            object.__setattr__(self, f.name, float(value))

        for name in ("chi", "theta", "beta"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValidationError(name, "output elasticities must lie in (0, 1)")
        total = self.chi + self.theta + self.beta
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError("chi", f"chi + theta + beta must equal 1, got {total!r}")
        if not self.sigma > 1.0:
            raise ValidationError("sigma", "h and f must be gross substitutes (sigma > 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha", "bargaining power must lie in (0, 1)")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValidationError("epsilon", "success probability must lie in (0, 1]")
        if not self.r >= 0.0:
            raise ValidationError("r", "risk-free rate must be nonnegative")
        for name in ("s_e", "s_v"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValidationError(name, "survival rates must lie in [0, 1)")
        if not self.I >= 0.0:
            raise ValidationError("I", "upfront investment must be nonnegative")
        for name in ("gamma", "kappa_e", "kappa_v", "eta_e", "eta_v", "L"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(name, "must be strictly positive")

        if not self.signs_guaranteed:
            warnings.warn(
                f"theta/chi = {self.theta / self.chi:.4g} >= sigma - 1 = {self.sigma - 1:.4g}: "
                "h is no longer guaranteed to rise in c or fall in v",
                PropositionWarning,
                stacklevel=3,
            )

    @property
    def signs_guaranteed(self) -> bool:
        return self.theta / self.chi < self.sigma - 1.0

    def replace(self, **changes) -> "ModelParams":
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            name = sorted(unknown)[0]
            raise ValidationError(name, "not a model parameter")
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PARAM_NAMES = tuple(f.name for f in fields(ModelParams))


@dataclass(frozen=True)
class FirmType:
    z: float
    c: float

    def __post_init__(self):
        for name in ("z", "c"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(name, f"must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class Prices:
    w: float
    v: float

    def __post_init__(self):
        for name in ("w", "v"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(name, f"price must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class DiscountBundle:
    delta: float
    Delta: float
    i: float


class LaborProfit(NamedTuple):
    l: np.ndarray
    y: np.ndarray
    profit: np.ndarray


class BankPolicy(NamedTuple):
    f: np.ndarray
    E: np.ndarray
    z_s: np.ndarray


class VCPolicy(NamedTuple):
    h: np.ndarray
    f: np.ndarray
    F: np.ndarray
    total_surplus: np.ndarray
    S_e: np.ndarray
    S_v: np.ndarray
    p: np.ndarray
    funded: np.ndarray


@dataclass(frozen=True)
class MicroPolicy:
    mode: Mode
    f: float
    h: float
    F: float
    l: float
    y: float
    E: float
    S_e: float
    S_v: float
    p: float | None


def _scalarize(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(x, dtype=float))


def discount_bundle(params: ModelParams) -> DiscountBundle:
    delta = 1.0 / (1.0 + params.r)
    Delta = delta * params.epsilon / (1.0 - delta * params.s_e)
    i = 1.0 / (delta * params.epsilon) - 1.0
    return DiscountBundle(delta=delta, Delta=Delta, i=i)


def ces_composite(h, f, params: ModelParams):
    """Management composite ``[gamma h^rho + f^rho]^(1/rho)`` with ``rho = (sigma-1)/sigma``."""
    rho = (params.sigma - 1.0) / params.sigma
    h = np.asarray(h, dtype=float)
    f = np.asarray(f, dtype=float)
    return _scalarize((params.gamma * h**rho + f**rho) ** (1.0 / rho))


def labor_profit(z, F, w: float, params: ModelParams) -> LaborProfit:
    """Optimal labor, output and operating profit of a successful project.

    Computed in logs; ``F = 0`` gives exact zeros.
    """
    chi, theta, beta = params.chi, params.theta, params.beta
    one_b = 1.0 - beta
    log_z = _log(z)
    log_F = _log(F)
    log_bw = math.log(beta / w)
    with np.errstate(invalid="ignore"):
        log_l = log_bw / one_b + chi / one_b * log_z + theta / one_b * log_F
        log_y = chi * log_z + theta * log_F + beta * log_l
        log_pi = beta / one_b * log_bw + chi / one_b * log_z + theta / one_b * log_F
    return LaborProfit(
        l=_scalarize(np.exp(log_l)),
        y=_scalarize(np.exp(log_y)),
        profit=_scalarize(one_b * np.exp(log_pi)),
    )


def bank_value_scale(c, w: float, params: ModelParams):
    """Gross value of bank finance per unit of z: ``E + I = z * scale``."""
    chi, theta, beta = params.chi, params.theta, params.beta
    Delta = discount_bundle(params).Delta
    k = theta / chi
    log_scale = (
        math.log(chi)
        + k * (math.log(theta) - _log(c))
        + (1.0 + k) * math.log(Delta)
        + beta / chi * math.log(beta / w)
    )
    return _scalarize(np.exp(log_scale))


def bank_policy(z, c, w: float, params: ModelParams) -> BankPolicy:
    """Solo effort, bank-finance value and bank entry threshold."""
    chi, theta, beta = params.chi, params.theta, params.beta
    Delta = discount_bundle(params).Delta
    z = np.asarray(z, dtype=float)
    log_f = (
        _log(z)
        + (theta + chi) / chi * (math.log(Delta * theta) - _log(c))
        + beta / chi * math.log(beta / w)
    )
    scale = np.asarray(bank_value_scale(c, w, params))
    E = np.maximum(z * scale - params.I, 0.0)
    z_s = params.I / scale
    return BankPolicy(f=_scalarize(np.exp(log_f)), E=_scalarize(E), z_s=_scalarize(z_s * np.ones_like(E)))


def effort_ratio(c, v: float, params: ModelParams):
    """Founder-to-VC effort ratio ``f/h`` in a VC-backed project."""
    a, g = params.alpha, params.gamma
    return _scalarize(((v / np.asarray(c, dtype=float)) * (1.0 - a) / (a * g)) ** params.sigma)


def _log_vc_curvature(c, v: float, params: ModelParams):
    # log of 1 + gamma^-sigma * ((v/c)(1-alpha)/alpha)^(sigma-1)
    a, g, s = params.alpha, params.gamma, params.sigma
    log_x = -s * math.log(g) + (s - 1.0) * (math.log(v * (1.0 - a) / a) - _log(c))
    return np.logaddexp(0.0, log_x)


def vc_effort(z, c, prices: Prices, params: ModelParams):
    """VC effort ``h`` at shadow cost ``v``."""
    chi, theta, beta, s, a = params.chi, params.theta, params.beta, params.sigma, params.alpha
    Delta = discount_bundle(params).Delta
    w, v = prices.w, prices.v
    log_h = (
        _log(z)
        + (theta + chi) / chi * math.log(a * Delta * theta / v)
        + beta / chi * math.log(beta / w)
        + theta * s / (chi * (s - 1.0)) * math.log(params.gamma)
        + (theta / (chi * (s - 1.0)) - 1.0) * _log_vc_curvature(c, v, params)
    )
    return _scalarize(np.exp(log_h))


def vc_effort_gradient(z, c, prices: Prices, params: ModelParams):
    """Analytic partials ``(dh/dz, dh/dc, dh/dv)`` of :func:`vc_effort`."""
    k, s = params.theta / params.chi, params.sigma
    z = np.asarray(z, dtype=float)
    c = np.asarray(c, dtype=float)
    v = prices.v
    h = np.asarray(vc_effort(z, c, prices, params))
    # share of the curvature term carried by the (v/c) part
    log_B = _log_vc_curvature(c, v, params)
    share = -np.expm1(-log_B)
    dz = h / z
    dc = h * (s - 1.0 - k) * share / c
    dv = -h * ((1.0 + k) + (s - 1.0 - k) * share) / v
    return _scalarize(dz), _scalarize(dc), _scalarize(dv)


def vc_policy(z, c, prices: Prices, E, params: ModelParams) -> VCPolicy:
    """Incentive-compatible efforts and Nash split for a VC-backed project.

    ``E`` is the entrepreneur's outside option (bank value, zero when the bank
    route is infeasible). Unfunded types get zero surplus and ``p = nan``;
    efforts are still reported so that callers can inspect the would-be contract.
    """
    Delta = discount_bundle(params).Delta
    z = np.asarray(z, dtype=float)
    h = np.asarray(vc_effort(z, c, prices, params))
    f = np.asarray(effort_ratio(c, prices.v, params)) * h
    F = np.asarray(ces_composite(h, f, params))
    profit = np.asarray(labor_profit(z, F, prices.w, params).profit)
    total = Delta * profit - params.I - np.asarray(E, dtype=float)
    funded = total >= 0.0
    S_v = np.where(funded, params.alpha * total, 0.0)
    S_e = np.where(funded, (1.0 - params.alpha) * total, 0.0)
    p = np.where(funded, (S_v + params.I) / params.epsilon, np.nan)
    return VCPolicy(
        h=_scalarize(h), f=_scalarize(f), F=_scalarize(F), total_surplus=_scalarize(total),
        S_e=_scalarize(S_e), S_v=_scalarize(S_v), p=_scalarize(p), funded=_scalarize(funded),
    )


@dataclass(frozen=True)
class PolicyArrays:
    """Vectorized counterpart of :class:`MicroPolicy` plus the raw surpluses."""

    mode: np.ndarray
    f: np.ndarray
    h: np.ndarray
    F: np.ndarray
    l: np.ndarray
    y: np.ndarray
    E: np.ndarray
    S_e: np.ndarray
    S_v: np.ndarray
    p: np.ndarray
    total_surplus: np.ndarray
    z_s: np.ndarray


def evaluate_policies(z, c, prices: Prices, params: ModelParams) -> PolicyArrays:
    """Financing choice and every policy field on arrays of types.

    VC whenever total surplus is nonnegative (ties go to VC), otherwise bank
    when its value is strictly positive, otherwise no entry.
    """
    z, c = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(c, dtype=float))
    bank = bank_policy(z, c, prices.w, params)
    E = np.asarray(bank.E)
    vc = vc_policy(z, c, prices, E, params)

    is_vc = np.asarray(vc.funded)
    is_bank = ~is_vc & (E > 0.0)
    mode = np.where(is_vc, Mode.VC, np.where(is_bank, Mode.BANK, Mode.NO_ENTRY)).astype(int)

    f = np.where(is_vc, vc.f, np.where(is_bank, bank.f, 0.0))
    h = np.where(is_vc, vc.h, 0.0)
    F = np.where(is_vc, vc.F, np.where(is_bank, bank.f, 0.0))
    lp = labor_profit(z, F, prices.w, params)
    entered = mode != Mode.NO_ENTRY
    return PolicyArrays(
        mode=mode,
        f=f,
        h=h,
        F=F,
        l=np.where(entered, lp.l, 0.0),
        y=np.where(entered, lp.y, 0.0),
        E=np.where(entered, E, 0.0),
        S_e=np.asarray(vc.S_e),
        S_v=np.asarray(vc.S_v),
        p=np.asarray(vc.p),
        total_surplus=np.asarray(vc.total_surplus),
        z_s=np.asarray(bank.z_s),
    )


def financing_choice(t: FirmType, prices: Prices, params: ModelParams) -> MicroPolicy:
    pa = evaluate_policies(t.z, t.c, prices, params)
    mode = Mode(int(pa.mode))
    return MicroPolicy(
        mode=mode,
        f=float(pa.f),
        h=float(pa.h),
        F=float(pa.F),
        l=float(pa.l),
        y=float(pa.y),
        E=float(pa.E),
        S_e=float(pa.S_e),
        S_v=float(pa.S_v),
        p=float(pa.p) if mode == Mode.VC else None,
    )


# --- feasibility-region geometry -------------------------------------------

def vc_value_scale(c, prices: Prices, params: ModelParams):
    """Discounted profit of a VC-backed project per unit of z.

    Profit is homogeneous of degree one in z once efforts respond, so the VC
    participation boundary is ``z * scale - I >= E``.
    """
    Delta = discount_bundle(params).Delta
    c = np.asarray(c, dtype=float)
    one = np.ones_like(c)
    h = np.asarray(vc_effort(one, c, prices, params))
    f = np.asarray(effort_ratio(c, prices.v, params)) * h
    F = ces_composite(h, f, params)
    return _scalarize(Delta * np.asarray(labor_profit(one, F, prices.w, params).profit))


def vc_advantage(c, v: float, params: ModelParams):
    """Ratio of VC to bank value for a bank-feasible type, in reduced form.

    VC beats the bank exactly where this is at least one. It depends on c and v
    only through c/v and is strictly increasing in c.
    """
    chi, theta, s, a, g = params.chi, params.theta, params.sigma, params.alpha, params.gamma
    k = theta / chi
    c = np.asarray(c, dtype=float)
    log_lhs = (
        math.log((theta + chi) / chi)
        + k * (_log(c) + math.log(a / v))
        + s * k / (s - 1.0) * math.log(g)
        + k / (s - 1.0) * _log_vc_curvature(c, v, params)
    )
    return _scalarize(np.exp(log_lhs))


def vc_cost_cutoff(v: float, params: ModelParams) -> float:
    """Founder cost above which VC finance dominates bank finance (closed form).

    Returns 0.0 when VC dominates for every c.
    """
    chi, theta, s, a, g = params.chi, params.theta, params.sigma, params.alpha, params.gamma
    gap = (chi / (theta + chi)) ** (chi * (s - 1.0) / theta) - (1.0 - a) ** (s - 1.0)
    if gap <= 0.0:
        return 0.0
    return v * g ** (-s / (s - 1.0)) / a * gap ** (1.0 / (s - 1.0))


def vc_entry_threshold(c, prices: Prices, params: ModelParams):
    """Lowest z funded by a VC at cost c; ``inf`` where VC never wins."""
    c = np.asarray(c, dtype=float)
    scale = np.asarray(vc_value_scale(c, prices, params))
    dominant = c >= vc_cost_cutoff(prices.v, params)
    with np.errstate(divide="ignore"):
        z_vc = np.where(dominant, params.I / scale, np.inf)
    return _scalarize(z_vc)


@dataclass(frozen=True)
class RegionBoundaries:
    c: np.ndarray
    z_s: np.ndarray
    z_vc: np.ndarray
    z_vc_status: tuple  # per c: "interior", "none" (TS < 0 on the whole range) or "all"
    c_v: float
    c_v_in_range: bool
    z_range: tuple


def _bisect(fn, lo, hi, iterations=200):
    # vectorized bisection on fn(lo) < 0 <= fn(hi)
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        pos = fn(mid) >= 0.0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo <= 4e-16 * np.abs(hi)):
            break
    return hi


def _total_surplus(z, c, prices, params):
    E = bank_policy(z, c, prices.w, params).E
    return np.asarray(vc_policy(z, c, prices, E, params).total_surplus)


def region_boundaries(prices: Prices, params: ModelParams, c_values, z_range=(1e-6, 1e6)) -> RegionBoundaries:
    """Bank and VC entry thresholds along a list of founder costs.

    The VC boundary is located by bisection on total surplus in z and the cost
    cutoff by bisection on :func:`vc_advantage`, independently of the closed
    forms used by the quadrature.
    """
    c = np.asarray(c_values, dtype=float)
    if c.ndim != 1 or np.any(np.diff(c) <= 0):
        raise ValidationError("c_values", "must be a strictly increasing 1-d sequence")
    z_lo, z_hi = map(float, z_range)

    z_s = np.asarray(bank_policy(np.ones_like(c), c, prices.w, params).z_s, dtype=float)

    ts_lo = _total_surplus(np.full_like(c, z_lo), c, prices, params)
    ts_hi = _total_surplus(np.full_like(c, z_hi), c, prices, params)
    status = np.where(ts_lo >= 0, "all", np.where(ts_hi < 0, "none", "interior"))
    crossing = _bisect(
        lambda z: _total_surplus(z, c, prices, params),
        np.full_like(c, z_lo),
        np.full_like(c, z_hi),
    )
    z_vc = np.where(status == "interior", crossing, np.where(status == "all", z_lo, np.inf))

    # cost cutoff over a wide bracket around v, since the advantage depends on c/v only
    lo, hi = prices.v * 1e-12, prices.v * 1e12
    if vc_advantage(lo, prices.v, params) >= 1.0:
        c_v = 0.0
    elif vc_advantage(hi, prices.v, params) < 1.0:
        c_v = math.inf
    else:
        log_cv = _bisect(
            lambda lc: np.asarray(vc_advantage(np.exp(lc), prices.v, params)) - 1.0,
            math.log(lo),
            math.log(hi),
        )
        c_v = float(np.exp(log_cv))
    return RegionBoundaries(
        c=c,
        z_s=z_s,
        z_vc=z_vc,
        z_vc_status=tuple(str(s) for s in status),
        c_v=c_v,
        c_v_in_range=bool(c[0] <= c_v <= c[-1]),
        z_range=(z_lo, z_hi),
    )
