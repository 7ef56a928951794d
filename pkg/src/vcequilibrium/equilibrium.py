"""Stationary equilibrium: effort and labor market clearing nested in free entry.

Solution order, innermost first:

1. given (w, H, m_e), bracket and solve for the shadow cost v clearing VC effort;
2. given (M, H), solve for the wage w clearing labor, re-clearing v at each trial w;
3. update (M, H) multiplicatively from the two entry gaps until both close.

All aggregates use :func:`~vcequilibrium.distribution.cut_cells`, so they are
continuous in prices and the root finders can reach tight residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from . import model
from .distribution import Pieces, TypeGrid, cut_cells
from .errors import BracketFailure, NonConvergence
from .model import ModelParams, Prices


@dataclass(frozen=True)
class SolverControls:
    price_tol: float = 1e-8
    entry_tol: float = 1e-6
    damping: float = 0.5
    max_outer: int = 200
    max_entry: int = 500
    max_doublings: int = 60
    # cap on a single multiplicative (M, H) step, as a factor
    max_step: float = 4.0


@dataclass(frozen=True)
class FixedSupply:
    M: float
    H: float


@dataclass(frozen=True)
class FreeEntry:
    M0: float = 4.0
    H0: float = 0.05


class Residuals(NamedTuple):
    labor: float
    effort: float
    entry_e: float
    entry_v: float


class EntryGaps(NamedTuple):
    gap_e: float
    gap_v: float
    value_e: float
    value_v: float
    cost_e: float
    cost_v: float


@dataclass(frozen=True)
class Aggregates:
    """Integrals against the type distribution, per unit mass."""

    effort: float
    labor: float
    output: float
    value_e: float
    value_v: float
    share_vc: float
    share_bank: float


@dataclass(frozen=True)
class EquilibriumState:
    prices: Prices
    M: float
    H: float
    m_e: float
    m_v: float
    S: float
    labor_productivity: float
    output: float
    funded_share_vc: float
    funded_share_bank: float
    c_v: float
    residuals: Residuals
    converged: bool
    iterations: int
    mode: str
    tolerances: dict = field(default_factory=dict)
    trace: tuple = ()


# --- regions and integrals ---------------------------------------------------

def _bank_threshold(w, params):
    return lambda c: model.bank_policy(np.ones_like(c), c, w, params).z_s


def _vc_threshold(prices, params):
    def z_vc(c):
        with np.errstate(divide="ignore"):
            return params.I / np.asarray(model.vc_value_scale(c, prices, params))
    return z_vc


def vc_region(prices: Prices, grid: TypeGrid, params: ModelParams) -> Pieces:
    c_v = model.vc_cost_cutoff(prices.v, params)
    return cut_cells(grid, _vc_threshold(prices, params), (c_v, math.inf))


def bank_region(prices: Prices, grid: TypeGrid, params: ModelParams) -> Pieces:
    c_v = model.vc_cost_cutoff(prices.v, params)
    return cut_cells(grid, _bank_threshold(prices.w, params), (-math.inf, c_v))


def bank_feasible_region(w: float, grid: TypeGrid, params: ModelParams) -> Pieces:
    return cut_cells(grid, _bank_threshold(w, params))


def _wsum(weight, values):
    return float(np.sum(weight * values))


def effort_per_entrant(w: float, v: float, grid: TypeGrid, params: ModelParams) -> float:
    prices = Prices(w, v)
    vc = vc_region(prices, grid, params)
    return _wsum(vc.weight, model.vc_effort(vc.z, vc.c, prices, params))


def _vc_fields(pieces: Pieces, prices: Prices, params: ModelParams):
    E = model.bank_policy(pieces.z, pieces.c, prices.w, params).E
    pol = model.vc_policy(pieces.z, pieces.c, prices, E, params)
    lp = model.labor_profit(pieces.z, pol.F, prices.w, params)
    # midpoints sit inside the region; clip rounding noise at its edge
    surplus = np.maximum(pol.total_surplus, 0.0)
    return pol, lp, surplus


def aggregates(prices: Prices, grid: TypeGrid, params: ModelParams) -> Aggregates:
    vc = vc_region(prices, grid, params)
    bank = bank_region(prices, grid, params)
    feasible = bank_feasible_region(prices.w, grid, params)

    pol, lp_vc, surplus = _vc_fields(vc, prices, params)
    bp = model.bank_policy(bank.z, bank.c, prices.w, params)
    lp_bank = model.labor_profit(bank.z, bp.f, prices.w, params)
    E_feasible = model.bank_policy(feasible.z, feasible.c, prices.w, params).E

    a = params.alpha
    return Aggregates(
        effort=_wsum(vc.weight, pol.h),
        labor=_wsum(vc.weight, lp_vc.l) + _wsum(bank.weight, lp_bank.l),
        output=_wsum(vc.weight, lp_vc.y) + _wsum(bank.weight, lp_bank.y),
        value_e=_wsum(feasible.weight, E_feasible) + _wsum(vc.weight, (1.0 - a) * surplus),
        value_v=_wsum(vc.weight, a * surplus),
        share_vc=float(np.sum(vc.weight)),
        share_bank=float(np.sum(bank.weight)),
    )


def effort_demand(w: float, v: float, m_e: float, grid: TypeGrid, params: ModelParams) -> float:
    """Demand for VC effort from a cohort of ``m_e`` entrants."""
    return m_e * effort_per_entrant(w, v, grid, params)


def labor_demand(w: float, v: float, M: float, grid: TypeGrid, params: ModelParams) -> float:
    """Labor hired by a mass ``M`` of operating firms (bank- and VC-backed)."""
    if M == 0:
        return 0.0
    return M * aggregates(Prices(w, v), grid, params).labor


def entrant_mass(M: float, params: ModelParams) -> float:
    return (1.0 - params.s_e) / params.epsilon * M


def vc_entrant_mass(H: float, params: ModelParams) -> float:
    return (1.0 - params.s_v) * H


def entry_gaps(prices: Prices, grid: TypeGrid, params: ModelParams, m_e: float, m_v: float,
               agg: Aggregates | None = None) -> EntryGaps:
    """Expected entry value minus entry cost for entrepreneurs and VCs."""
    if agg is None:
        agg = aggregates(prices, grid, params)
    cost_e = params.kappa_e * m_e**params.eta_e
    cost_v = params.kappa_v * m_v**params.eta_v
    return EntryGaps(
        gap_e=agg.value_e - cost_e,
        gap_v=agg.value_v - cost_v,
        value_e=agg.value_e,
        value_v=agg.value_v,
        cost_e=cost_e,
        cost_v=cost_v,
    )


# --- market clearing ---------------------------------------------------------

def _expand_bracket(fn, x0, max_doublings, what):
    """Find log-space [lo, hi] with fn(lo) > 0 > fn(hi) for a decreasing fn.

    Steps of ln 2 outward from ``x0``; fails after ``max_doublings`` steps.
    """
    step = math.log(2.0)
    g0 = fn(x0)
    if g0 == 0.0:
        return x0, x0, g0, g0
    if g0 > 0:
        lo, glo = x0, g0
        for k in range(1, max_doublings + 1):
            hi = x0 + k * step
            ghi = fn(hi)
            if ghi < 0:
                return lo, hi, glo, ghi
            lo, glo = hi, ghi
    else:
        hi, ghi = x0, g0
        for k in range(1, max_doublings + 1):
            lo = x0 - k * step
            glo = fn(lo)
            if glo > 0:
                return lo, hi, glo, ghi
            hi, ghi = lo, glo
    raise BracketFailure(f"no sign change for {what} within {max_doublings} doublings of {math.exp(x0):.6g}")


def clear_effort_market(w: float, H: float, m_e: float, grid: TypeGrid, params: ModelParams,
                        v_guess: float = 1.0, controls: SolverControls = SolverControls()) -> float:
    """Shadow cost ``v`` at which entrant demand for VC effort equals ``H``."""
    if not H > 0:
        raise ValueError("H must be positive")

    def rel(log_v):
        return effort_demand(w, math.exp(log_v), m_e, grid, params) / H - 1.0

    lo, hi, glo, ghi = _expand_bracket(rel, math.log(v_guess), controls.max_doublings, "VC effort")
    if lo == hi:
        return math.exp(lo)
    log_v = brentq(rel, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=controls.max_outer)
    v = math.exp(log_v)
    if abs(rel(log_v)) > controls.price_tol:
        raise NonConvergence(f"effort market residual {rel(log_v):.3g} above tolerance at v={v:.17g}")
    return v


def clear_prices(M: float, H: float, grid: TypeGrid, params: ModelParams,
                 guess: Prices | None = None, controls: SolverControls = SolverControls()) -> Prices:
    """Wage and shadow cost jointly clearing labor and VC effort at given (M, H)."""
    if not (M > 0 and H > 0):
        raise ValueError("M and H must be positive")
    guess = guess or Prices(1.0, 1.0)
    m_e = entrant_mass(M, params)
    last_v = [guess.v]

    def v_at(w):
        v = clear_effort_market(w, H, m_e, grid, params, v_guess=last_v[0], controls=controls)
        last_v[0] = v
        return v

    def rel(log_w):
        w = math.exp(log_w)
        return labor_demand(w, v_at(w), M, grid, params) / params.L - 1.0

    lo, hi, glo, ghi = _expand_bracket(rel, math.log(guess.w), controls.max_doublings, "labor")
    if lo == hi:
        log_w = lo
    else:
        try:
            log_w = brentq(rel, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=controls.max_outer)
        except RuntimeError as exc:
            raise NonConvergence(f"wage search did not converge in {controls.max_outer} iterations") from exc
    w = math.exp(log_w)
    v = v_at(w)
    labor_res = labor_demand(w, v, M, grid, params) / params.L - 1.0
    if abs(labor_res) > controls.price_tol:
        raise NonConvergence(f"labor market residual {labor_res:.3g} above tolerance at w={w:.17g}")
    return Prices(w, v)


# --- steady state ------------------------------------------------------------

def _state(prices, M, H, grid, params, controls, converged, iterations, mode, trace):
    agg = aggregates(prices, grid, params)
    m_e = entrant_mass(M, params)
    m_v = vc_entrant_mass(H, params)
    gaps = entry_gaps(prices, grid, params, m_e, m_v, agg=agg)
    residuals = Residuals(
        labor=M * agg.labor / params.L - 1.0,
        effort=m_e * agg.effort / H - 1.0,
        entry_e=gaps.gap_e / gaps.cost_e,
        entry_v=gaps.gap_v / gaps.cost_v,
    )
    return EquilibriumState(
        prices=prices,
        M=M,
        H=H,
        m_e=m_e,
        m_v=m_v,
        S=m_e * params.I * (agg.share_bank + agg.share_vc),
        labor_productivity=agg.output / agg.labor,
        output=M * agg.output,
        funded_share_vc=agg.share_vc,
        funded_share_bank=agg.share_bank,
        c_v=model.vc_cost_cutoff(prices.v, params),
        residuals=residuals,
        converged=converged,
        iterations=iterations,
        mode=mode,
        tolerances={"price": controls.price_tol, "entry": controls.entry_tol},
        trace=tuple(trace),
    )


def solve_steady_state(params: ModelParams, grid: TypeGrid, mode=FreeEntry(),
                       controls: SolverControls = SolverControls(),
                       guess: Prices | None = None) -> EquilibriumState:
    """Stationary equilibrium under fixed supplies (M, H) or free entry.

    Free entry iterates ``M <- M (value_e / cost_e)^damping`` and likewise for
    H, clearing both markets at every iterate.
    """
    if isinstance(mode, FixedSupply):
        prices = clear_prices(mode.M, mode.H, grid, params, guess, controls)
        return _state(prices, mode.M, mode.H, grid, params, controls, True, 0, "fixed_supply", [])

    M, H = float(mode.M0), float(mode.H0)
    prices = guess
    trace = []
    lo_step, hi_step = 1.0 / controls.max_step, controls.max_step
    for it in range(1, controls.max_entry + 1):
        prices = clear_prices(M, H, grid, params, prices, controls)
        m_e, m_v = entrant_mass(M, params), vc_entrant_mass(H, params)
        gaps = entry_gaps(prices, grid, params, m_e, m_v)
        ratio_e = gaps.value_e / gaps.cost_e
        ratio_v = gaps.value_v / gaps.cost_v
        trace.append((M, H, prices.w, prices.v, ratio_e - 1.0, ratio_v - 1.0))
        if max(abs(ratio_e - 1.0), abs(ratio_v - 1.0)) <= controls.entry_tol:
            return _state(prices, M, H, grid, params, controls, True, it, "free_entry", trace)
        M *= min(max(ratio_e, lo_step), hi_step) ** controls.damping
        H *= min(max(ratio_v, lo_step), hi_step) ** controls.damping
    last = _state(prices, M, H, grid, params, controls, False, controls.max_entry, "free_entry", trace)
    raise NonConvergence(f"entry loop did not converge in {controls.max_entry} iterations",
                         last_iterate=last, trace=trace)


BENCHMARK_ROWS = ("w", "v", "H", "M", "Y/L")


@dataclass(frozen=True)
class Report:
    rows: tuple  # (label, value) in BENCHMARK_ROWS order
    diagnostics: tuple

    def as_dict(self):
        return dict(self.rows + self.diagnostics)


def aggregate_report(state: EquilibriumState, grid: TypeGrid | None = None,
                     params: ModelParams | None = None) -> Report:
    """Steady-state table rows plus diagnostics; refuses unconverged states."""
    if not state.converged:
        raise NonConvergence("refusing to report a non-converged state", last_iterate=state)
    rows = (
        ("w", state.prices.w),
        ("v", state.prices.v),
        ("H", state.H),
        ("M", state.M),
        ("Y/L", state.labor_productivity),
    )
    diagnostics = (
        ("m_e", state.m_e),
        ("m_v", state.m_v),
        ("S", state.S),
        ("Y", state.output),
        ("c_v", state.c_v),
        ("funded_share_vc", state.funded_share_vc),
        ("funded_share_bank", state.funded_share_bank),
        ("residual_labor", state.residuals.labor),
        ("residual_effort", state.residuals.effort),
        ("residual_entry_e", state.residuals.entry_e),
        ("residual_entry_v", state.residuals.entry_v),
        ("iterations", float(state.iterations)),
    )
    return Report(rows=rows, diagnostics=diagnostics)
