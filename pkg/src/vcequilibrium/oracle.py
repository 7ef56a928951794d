"""Brute-force checks of the closed-form policies.

Nothing here uses a first-order condition: efforts come from refined grid
searches over the raw objectives, and derivative signs from finite
differences. Objectives reuse :func:`model.labor_profit`, so a disagreement
with the closed forms points at the effort algebra alone.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import model
from .distribution import GridSpec, sample_types
from .errors import BoundaryArgmax, NonConvergence
from .model import FirmType, ModelParams, Prices


@dataclass(frozen=True)
class OracleReport:
    case: str
    closed_form: float
    oracle: float
    rel_error: float
    tolerance: float
    passed: bool
    advisory: bool = False

    @classmethod
    def compare(cls, case, closed_form, oracle, tolerance, sign_ok=True, advisory=False):
        closed_form, oracle = float(closed_form), float(oracle)
        err = abs(closed_form - oracle) / abs(oracle) if oracle != 0 else abs(closed_form)
        return cls(case, closed_form, oracle, err, tolerance, bool(sign_ok and err <= tolerance), advisory)


@dataclass(frozen=True)
class SearchSpec:
    x_max: float = 1.0
    n_points: int = 200
    refinements: int = 2
    max_rescales: int = 20


def _polish(xs, fs, i):
    # vertex of the parabola through the incumbent and its neighbours
    if i == 0 or i == len(xs) - 1:
        return xs[i]
    x0, x1, x2 = xs[i - 1], xs[i], xs[i + 1]
    f0, f1, f2 = fs[i - 1], fs[i], fs[i + 1]
    den = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0)
    if den == 0:
        return x1
    x = x1 - 0.5 * ((x1 - x0) ** 2 * (f1 - f2) - (x1 - x2) ** 2 * (f1 - f0)) / den
    return x if x0 <= x <= x2 else x1


def refined_argmax(objective, x_max, n_points=200, refinements=2):
    """Argmax of a vectorized 1-d objective on ``[0, x_max]``.

    A coarse grid is followed by ``refinements`` zooms into the two cells
    around the incumbent, each with ``n_points`` nodes, and a final parabolic
    step through the best node and its neighbours. Returns ``(x, on_upper_edge)``.
    """
    xs = np.linspace(0.0, x_max, n_points)
    fs = objective(xs)
    i = int(np.argmax(fs))
    on_edge = i == n_points - 1
    for _ in range(refinements):
        d = xs[1] - xs[0]
        lo = max(xs[i] - d, 0.0)
        hi = min(xs[i] + d, x_max)
        xs = np.linspace(lo, hi, n_points)
        fs = objective(xs)
        i = int(np.argmax(fs))
    return _polish(xs, fs, i), on_edge


def search_max(objective, search: SearchSpec = SearchSpec(), what="effort"):
    """:func:`refined_argmax` with the range rescaled until the argmax is inside.

    The range grows tenfold while the argmax sits on its upper edge and is
    recentred to ``[0, 2x]`` when it sits below a tenth of it (cut a
    thousandfold when it is 0), so resolution stays relative. A true corner
    at 0 is returned once the rescales run out.
    """
    x_max = search.x_max
    for _ in range(search.max_rescales + 1):
        x, on_edge = refined_argmax(objective, x_max, search.n_points, search.refinements)
        if on_edge:
            x_max *= 10.0
        elif x < 0.1 * x_max:
            x_max = 2.0 * x if x > 0.0 else 1e-3 * x_max
        else:
            return x
    if on_edge:
        raise BoundaryArgmax(f"{what} argmax still on the upper edge at {x_max:.3g}")
    return x


def bank_objective(f, t: FirmType, w: float, params: ModelParams):
    Delta = model.discount_bundle(params).Delta
    profit = np.asarray(model.labor_profit(t.z, f, w, params).profit)
    return Delta * profit - t.c * np.asarray(f) - params.I


def oracle_bank_effort(t: FirmType, w: float, params: ModelParams, search: SearchSpec = SearchSpec()) -> float:
    """Founder effort maximizing the bank-financed objective by grid search."""
    return search_max(lambda f: bank_objective(f, t, w, params), search, "bank effort")


def vc_total_surplus(h, f, t: FirmType, w: float, E: float, params: ModelParams):
    Delta = model.discount_bundle(params).Delta
    F = model.ces_composite(h, f, params)
    return Delta * np.asarray(model.labor_profit(t.z, F, w, params).profit) - params.I - E


def oracle_vc_efforts(t: FirmType, prices: Prices, params: ModelParams, E: float = 0.0,
                      search: SearchSpec = SearchSpec(), tol=1e-6, max_rounds=200):
    """Nash effort pair by alternating grid-search best responses.

    Each side maximizes its share of total surplus net of its own effort cost.
    Returns ``(f, h, rounds)``.
    """
    a, w, v = params.alpha, prices.w, prices.v
    f, h = 1.0, 1.0
    for rounds in range(1, max_rounds + 1):
        f_new = search_max(lambda x: (1 - a) * vc_total_surplus(h, x, t, w, E, params) - t.c * x,
                           SearchSpec(max(f, 1e-300), search.n_points, search.refinements, search.max_rescales),
                           "founder effort")
        h_new = search_max(lambda x: a * vc_total_surplus(x, f_new, t, w, E, params) - v * x,
                           SearchSpec(max(h, 1e-300), search.n_points, search.refinements, search.max_rescales),
                           "VC effort")
        change = max(abs(f_new - f) / f_new, abs(h_new - h) / h_new)
        f, h = f_new, h_new
        if change <= tol:
            return f, h, rounds
    raise NonConvergence(f"best responses still moving after {max_rounds} rounds", last_iterate=(f, h))


def default_points(spec: GridSpec = GridSpec(), n=5):
    """``n x n`` (z, c) points spread over the interior of a type support."""
    zs = np.linspace(spec.z_lo, spec.z_hi, n + 2)[1:-1]
    cs = np.geomspace(spec.c_lo, spec.c_hi, n + 2)[1:-1]
    return [FirmType(float(z), float(c)) for z, c in itertools.product(zs, cs)]


def bank_effort_reports(points, w, params, tol=1e-3, search: SearchSpec = SearchSpec()):
    out = []
    for t in points:
        closed = model.bank_policy(t.z, t.c, w, params).f
        out.append(OracleReport.compare(f"bank f z={t.z:.6g} c={t.c:.6g}", closed,
                                        oracle_bank_effort(t, w, params, search), tol))
    return out


def vc_effort_reports(points, prices, params, tol=1e-3, search: SearchSpec = SearchSpec()):
    """Effort pair and effort ratio at each point, with the bank value as outside option."""
    out = []
    for t in points:
        E = float(model.bank_policy(t.z, t.c, prices.w, params).E)
        f, h, _ = oracle_vc_efforts(t, prices, params, E, search)
        h_cf = model.vc_effort(t.z, t.c, prices, params)
        ratio_cf = model.effort_ratio(t.c, prices.v, params)
        tag = f"z={t.z:.6g} c={t.c:.6g}"
        out.append(OracleReport.compare(f"vc h {tag}", h_cf, h, tol))
        out.append(OracleReport.compare(f"vc f {tag}", ratio_cf * h_cf, f, tol))
        out.append(OracleReport.compare(f"vc f/h {tag}", ratio_cf, f / h, tol))
    return out


def default_lattice(prices: Prices, spec: GridSpec = GridSpec(), n=5):
    zs = np.linspace(spec.z_lo, spec.z_hi, n)
    cs = np.geomspace(spec.c_lo, spec.c_hi, n)
    vs = prices.v * np.geomspace(0.5, 2.0, n)
    return zs, cs, vs


def fd_sign_report(params: ModelParams, prices: Prices, lattice=None, rel_step=1e-5, tol=1e-4):
    """Finite-difference signs of h in z (+), c (+) and v (-) on a lattice.

    Each report compares the central difference (the oracle) with the analytic
    partial and passes when the sign is as expected and the two agree. Reports
    are advisory when the parameters do not guarantee the signs.
    """
    zs, cs, vs = lattice if lattice is not None else default_lattice(prices)
    advisory = not params.signs_guaranteed
    w = prices.w
    out = []

    def h_at(z, c, v):
        return float(model.vc_effort(z, c, Prices(w, v), params))

    for z, c, v in itertools.product(zs, cs, vs):
        z, c, v = float(z), float(c), float(v)
        analytic = model.vc_effort_gradient(z, c, Prices(w, v), params)
        fds = (
            (h_at(z * (1 + rel_step), c, v) - h_at(z * (1 - rel_step), c, v)) / (2 * rel_step * z),
            (h_at(z, c * (1 + rel_step), v) - h_at(z, c * (1 - rel_step), v)) / (2 * rel_step * c),
            (h_at(z, c, v * (1 + rel_step)) - h_at(z, c, v * (1 - rel_step))) / (2 * rel_step * v),
        )
        for name, sign, cf, fd in zip(("z", "c", "v"), (1, 1, -1), analytic, fds):
            out.append(OracleReport.compare(f"dh/d{name} z={z:.6g} c={c:.6g} v={v:.6g}",
                                            cf, fd, tol, sign_ok=np.sign(fd) == sign, advisory=advisory))
    return out


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    n: int


def monte_carlo_demand(prices: Prices, spec: GridSpec, params: ModelParams, n=1_000_000, seed=0):
    """Per-entrant integrals from ``n`` independent type draws.

    Keys: ``effort`` and ``labor`` demand, entry values ``value_e`` (bank value
    plus founder surplus) and ``value_v`` (VC surplus).
    """
    z, c = sample_types(spec, n, seed)
    pol = model.evaluate_policies(z, c, prices, params)
    out = {}
    for name, x in (("effort", pol.h), ("labor", pol.l), ("value_e", pol.E + pol.S_e), ("value_v", pol.S_v)):
        x = np.asarray(x, dtype=float)
        out[name] = MonteCarloEstimate(float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n)), n)
    return out
