"""Quantitative analysis around the stationarity threshold.

Evaluates the suboptimality curve, the closed-form threshold and its
auxiliary-cost characterization, the slope bound of the final segment,
the geometry-based threshold bound, and the large-regularization rates.
All quantities come with the tolerances used by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllVerticesOptimal, BudgetExceeded, DegeneratePath
from .homotopy import SolutionPath, trace_path
from .polytope import VertexSet, enumerate_vertices, geometry, suboptimality_gap
from .projection import QlpInstance, project, solve_qlp

_OPT_TOL = 1e-9
_TIE_TOL = 1e-9


def suboptimality(inst: QlpInstance, eta: float, lp_value: float) -> float:
    """Cost excess ``<c, x(eta)> - lp_value`` of the regularized solution."""
    x = solve_qlp(inst, eta).x
    return float(inst.c @ x - lp_value)


def eta_star_formula(vs: VertexSet, c, x_star, tol: float = _OPT_TOL):
    """Closed-form threshold ``2 max <x*, x* - v> / <c, v - x*>``.

    The maximum runs over non-optimal vertices; vertices whose cost gap is
    within ``tol * (1 + |c|)`` count as optimal and are excluded.  Returns
    ``(eta_star, argmax_indices)``; ties within ``1e-9`` relative are all
    reported.  When every vertex is optimal the threshold is zero by
    convention and the index list is empty.  A negative maximum (the
    origin projection already solves the LP) is clamped to zero.
    """
    c = np.asarray(c, dtype=float).ravel()
    x_star = np.asarray(x_star, dtype=float).ravel()
    vals = vs.vertices @ c
    gap = vals - vals.min()
    nonopt = gap > tol * (1.0 + np.linalg.norm(c))
    if not np.any(nonopt):
        return 0.0, np.zeros(0, dtype=int)
    V = vs.vertices[nonopt]
    num = (x_star - V) @ x_star
    den = (V - x_star) @ c
    ratios = 2.0 * num / den
    best = float(ratios.max())
    if best < 0.0:
        # Degenerate instance: the origin projection already solves the
        # LP, the threshold is zero, and no vertex attains it.
        return 0.0, np.zeros(0, dtype=int)
    idx = np.flatnonzero(nonopt)[ratios >= best - _TIE_TOL * (1.0 + abs(best))]
    return best, idx


def gap_bound(vs: VertexSet, c) -> float:
    """Geometry bound ``2 B D / gap`` dominating the threshold."""
    B, D = geometry(vs)
    delta = suboptimality_gap(vs, c)
    return 2.0 * B * D / delta


@dataclass
class SlopeReport:
    """Final-segment slope of the suboptimality curve and its bounds."""

    slope: float
    bound_angle: float
    bound_norm: float

    @property
    def chain_holds(self) -> bool:
        return (
            self.slope <= self.bound_angle + 1e-9
            and self.bound_angle <= self.bound_norm + 1e-9
        )


def slope_report(path: SolutionPath, c) -> SlopeReport:
    """Slope of the last affine piece of the suboptimality curve.

    The curve hits zero at the threshold, so the slope is the cost gap at
    the second-to-last breakpoint divided by the final segment length.
    Bounded by half the squared cost component along the segment, and in
    turn by half the squared cost norm.
    """
    c = np.asarray(c, dtype=float).ravel()
    if path.n_segments == 0:
        raise DegeneratePath("threshold is zero; no moving segment")
    x_prev = path.endpoints[-2]
    x_star = path.x_star
    diff = x_star - x_prev
    nd = float(np.linalg.norm(diff))
    if nd <= 1e-14 * (1.0 + np.linalg.norm(x_star)):
        raise DegeneratePath("last segment has zero length")
    e_prev = float(c @ (x_prev - x_star))
    slope = e_prev / (path.breakpoints[-1] - path.breakpoints[-2])
    bound_angle = 0.5 * float(c @ (diff / nd)) ** 2
    bound_norm = 0.5 * float(c @ c)
    return SlopeReport(slope=slope, bound_angle=bound_angle, bound_norm=bound_norm)


@dataclass
class AuxCostCheck:
    """Auxiliary-cost certificate of the threshold maximizers."""

    aux_cost: np.ndarray
    min_gap_over_vertices: float
    max_gap_on_argmax: float
    max_gap_on_last_segment: float
    ratio_identity_error: float
    passed: bool


def aux_cost_check(
    path: SolutionPath,
    c,
    vs: VertexSet,
    argmax: np.ndarray | None = None,
    n_samples: int = 9,
    tol: float = 1e-7,
) -> AuxCostCheck:
    """Check the auxiliary cost ``c* = (eta*/2) c + x*`` certificate.

    ``x*`` must minimize ``<c*, .>`` over the polytope, the threshold
    argmax vertices must attain equality, the whole last segment must be
    contained in that minimizing face, and on the open last segment the
    threshold equals ``2 <x*, x* - x(eta)> / <c, x(eta) - x*>``.
    """
    c = np.asarray(c, dtype=float).ravel()
    x_star = path.x_star
    eta_star = path.eta_star
    c_aux = 0.5 * eta_star * c + x_star
    scale = 1.0 + float(np.linalg.norm(c_aux)) * (
        1.0 + float(np.max(np.abs(vs.vertices), initial=0.0))
    )
    gaps = (vs.vertices - x_star) @ c_aux
    min_gap = float(gaps.min())
    max_on_argmax = (
        float(np.max(np.abs(gaps[argmax]))) if argmax is not None and len(argmax) else 0.0
    )
    max_seg = 0.0
    ratio_err = 0.0
    if path.n_segments >= 1:
        lo, hi = path.breakpoints[-2], path.breakpoints[-1]
        for t in np.linspace(0.05, 0.95, n_samples):
            eta = (1.0 - t) * lo + t * hi
            x = path.interpolate(float(eta))
            max_seg = max(max_seg, abs(float((x - x_star) @ c_aux)))
            den = float(c @ (x - x_star))
            if abs(den) > 1e-12 * (1.0 + np.linalg.norm(c)):
                ratio = 2.0 * float(x_star @ (x_star - x)) / den
                ratio_err = max(ratio_err, abs(ratio - eta_star) / (1.0 + eta_star))
    passed = (
        min_gap >= -tol * scale
        and max_on_argmax <= tol * scale
        and max_seg <= tol * scale
        and ratio_err <= tol
    )
    return AuxCostCheck(
        aux_cost=c_aux,
        min_gap_over_vertices=min_gap,
        max_gap_on_argmax=max_on_argmax,
        max_gap_on_last_segment=max_seg,
        ratio_identity_error=ratio_err,
        passed=passed,
    )


@dataclass
class SmallEtaRow:
    """One large-regularization rate check ``|x(eta) - x0| <= C |c| eta``."""

    eta: float
    distance: float
    bound: float
    half_constant: bool
    passed: bool


def orthogonality_condition(x_zero, vs: VertexSet, tol: float = 1e-8) -> bool:
    """Whether ``<x0, v - x0>`` vanishes on all vertices.

    This is the condition under which the rate constant improves from
    ``|c|`` to ``|c|/2``; it holds automatically on the transport polytope.
    """
    x_zero = np.asarray(x_zero, dtype=float).ravel()
    vals = (vs.vertices - x_zero) @ x_zero
    scale = (1.0 + np.linalg.norm(x_zero)) * (
        1.0 + float(np.max(np.linalg.norm(vs.vertices, axis=1), initial=0.0))
    )
    return bool(np.max(np.abs(vals), initial=0.0) <= tol * scale)


def small_eta_report(
    inst: QlpInstance,
    etas,
    x_zero=None,
    vs: VertexSet | None = None,
    half: bool | None = None,
) -> list[SmallEtaRow]:
    """Rate check rows for the regime of large regularization.

    ``half`` forces the improved constant; when ``None`` it is decided by
    the orthogonality condition over ``vs`` (full constant if no vertices
    are available).
    """
    if x_zero is None:
        x_zero = project(inst.polytope, np.zeros(inst.polytope.dim)).x
    x_zero = np.asarray(x_zero, dtype=float).ravel()
    if half is None:
        half = orthogonality_condition(x_zero, vs) if vs is not None else False
    cnorm = float(np.linalg.norm(inst.c))
    rows = []
    for eta in etas:
        eta = float(eta)
        if eta == 0.0:
            dist = 0.0
        else:
            dist = float(np.linalg.norm(solve_qlp(inst, eta).x - x_zero))
        bound = (0.5 if half else 1.0) * cnorm * eta
        rows.append(
            SmallEtaRow(
                eta=eta,
                distance=dist,
                bound=bound,
                half_constant=half,
                passed=dist <= bound + 1e-9,
            )
        )
    return rows


def e_curve(path: SolutionPath, c, grid: int = 512) -> np.ndarray:
    """Sampled suboptimality curve: columns ``eta, E, segment_index``.

    Uniform grid on ``[0, 1.1 eta*]`` plus every breakpoint (the only
    non-smooth points).  Falls back to ``[0, 1]`` when the threshold is
    zero.
    """
    c = np.asarray(c, dtype=float).ravel()
    hi = 1.1 * path.eta_star if path.eta_star > 0 else 1.0
    etas = np.union1d(np.linspace(0.0, hi, grid), path.breakpoints)
    lp_val = float(c @ path.x_star)
    out = np.empty((etas.size, 3))
    for i, eta in enumerate(etas):
        x = path.interpolate(float(eta))
        out[i] = (eta, float(c @ x) - lp_val, path.segment_index(float(eta)))
    return out


@dataclass
class AnalysisReport:
    """Everything the threshold theory predicts, with pass flags."""

    eta_star_path: float
    eta_star_formula: float | None
    argmax_vertices: np.ndarray | None
    aux_cost: np.ndarray | None
    slope_last_segment: float | None
    slope_bound_angle: float | None
    slope_bound_norm: float
    gap_bound: float | None
    small_eta_bounds: list = field(default_factory=list)
    e_curve: np.ndarray | None = None
    agreement: bool | None = None
    bounds_ok: bool = True
    all_vertices_optimal: bool = False
    half_constant: bool | None = None

    def to_json_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "eta_star_path": self.eta_star_path,
            "eta_star_formula": self.eta_star_formula,
            "argmax_vertices": arr(self.argmax_vertices),
            "aux_cost": arr(self.aux_cost),
            "slope_last_segment": self.slope_last_segment,
            "slope_bound_angle": self.slope_bound_angle,
            "slope_bound_norm": self.slope_bound_norm,
            "gap_bound": self.gap_bound,
            "small_eta_bounds": [
                {
                    "eta": r.eta,
                    "distance": r.distance,
                    "bound": r.bound,
                    "half_constant": r.half_constant,
                    "passed": r.passed,
                }
                for r in self.small_eta_bounds
            ],
            "agreement": self.agreement,
            "bounds_ok": self.bounds_ok,
            "all_vertices_optimal": self.all_vertices_optimal,
            "half_constant": self.half_constant,
        }


def analyze(
    inst: QlpInstance,
    grid: int = 512,
    path: SolutionPath | None = None,
    vs: VertexSet | None = None,
    vertex_budget: int = 10**6,
) -> AnalysisReport:
    """Full report for one instance: path, threshold, bounds, curve.

    Vertex-based quantities are filled in when the vertex set is supplied
    or enumerable within budget, otherwise left as ``None`` with
    ``agreement`` unset.
    """
    if path is None:
        path = trace_path(inst)
    c = inst.c
    if vs is None:
        try:
            vs = enumerate_vertices(inst.polytope, budget=vertex_budget)
        except BudgetExceeded:
            vs = None

    eta_formula = None
    argmax = None
    aux = None
    bound_2bd = None
    agreement = None
    all_opt = False
    half = None
    checks = []
    if vs is not None:
        marked = vs.mark_optimal(c)
        eta_formula, argmax = eta_star_formula(marked, c, path.x_star)
        all_opt = bool(marked.optimal_mask.all())
        agreement = abs(eta_formula - path.eta_star) <= 1e-7 * (1.0 + path.eta_star)
        checks.append(agreement)
        try:
            bound_2bd = gap_bound(marked, c)
            checks.append(eta_formula <= bound_2bd + 1e-9)
        except AllVerticesOptimal:
            bound_2bd = None
        if path.n_segments:
            aux_chk = aux_cost_check(path, c, marked, argmax)
            aux = aux_chk.aux_cost
            checks.append(aux_chk.passed)
        half = orthogonality_condition(path.x_zero, marked)

    slope = angle = None
    norm_bound = 0.5 * float(c @ c)
    if path.n_segments:
        rep = slope_report(path, c)
        slope, angle = rep.slope, rep.bound_angle
        checks.append(rep.chain_holds)

    etas = [path.eta_star / 10.0, path.eta_star / 100.0] if path.eta_star > 0 else [0.1]
    small = small_eta_report(inst, etas, x_zero=path.x_zero, vs=vs, half=half)
    checks.extend(r.passed for r in small)

    curve = e_curve(path, c, grid)
    checks.append(bool(np.all(np.diff(curve[:, 1]) <= 1e-9)))

    return AnalysisReport(
        eta_star_path=path.eta_star,
        eta_star_formula=eta_formula,
        argmax_vertices=argmax,
        aux_cost=aux,
        slope_last_segment=slope,
        slope_bound_angle=angle,
        slope_bound_norm=norm_bound,
        gap_bound=bound_2bd,
        small_eta_bounds=small,
        e_curve=curve,
        agreement=agreement,
        bounds_ok=all(checks),
        all_vertices_optimal=all_opt,
        half_constant=half,
    )
