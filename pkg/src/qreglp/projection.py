"""Euclidean projection onto a polytope and the regularized-LP solve.

The central operation is ``argmin_{x in P} |x - z|^2`` computed by a primal
active-set method on the H-representation.  Minimizing
``<c, x> + |x|^2 / eta`` over ``P`` is the same problem with ``z = -eta c / 2``,
via the identity

    <c, x> + |x|^2/eta  =  |x + eta c / 2|^2 / eta - (eta/4) |c|^2.

Each iteration projects the residual onto the null space of the working-set
rows (dense QR) and either steps to the first blocking constraint or drops a
negative-multiplier row.  Ties are broken by smallest row index throughout,
which makes the method deterministic and finitely terminating under
degeneracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import MaxIterationsExceeded, NumericalBreakdown
from .polytope import FEAS_TOL, PolytopeSpec, VertexSet, _find_feasible_point, validate

MULT_TOL = 1e-10
KKT_TOL = 1e-8
_STEP_TOL = 1e-12
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class QlpInstance:
    """Cost vector plus polytope; owns the regularized objective.

    ``objective(x, eta) = <c, x> + |x|^2 / eta`` for ``eta > 0``.
    """

    polytope: PolytopeSpec
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        if c.shape[0] != self.polytope.dim:
            from .errors import ShapeMismatch

            raise ShapeMismatch(
                f"cost has {c.shape[0]} entries, polytope dim {self.polytope.dim}"
            )
        object.__setattr__(self, "c", np.ascontiguousarray(c))

    def objective(self, x, eta: float) -> float:
        x = np.asarray(x, dtype=float).ravel()
        return float(self.c @ x + (x @ x) / eta)

    def target(self, eta: float) -> np.ndarray:
        """The point whose projection onto P solves the instance at eta."""
        return -0.5 * eta * self.c

    def validated(self) -> "QlpInstance":
        return QlpInstance(validate(self.polytope).spec, self.c)


@dataclass
class ProjectionResult:
    """Projection output with a checkable optimality certificate.

    ``active_set`` lists every inequality row tight at ``x``;
    ``multipliers`` holds one Lagrange multiplier per tight row (zero for
    tight rows outside the working set).  ``residual`` is the largest
    variational-inequality violation over the supplied test points, or the
    KKT stationarity residual when no test points were available.
    """

    x: np.ndarray
    active_set: np.ndarray
    multipliers: np.ndarray
    residual: float
    working_set: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    eq_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    kkt_residual: float = float("nan")

    def to_json_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "active_set": [int(i) for i in self.active_set],
            "residual": float(self.residual),
        }


def _tri_solve(R: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve R y = rhs; one shot of diagonal regularization before failing."""
    diag = np.abs(np.diag(R))
    if diag.size == 0:
        return np.zeros(0)
    if diag.min() > 1e-13 * max(diag.max(), 1.0):
        return solve_triangular(R, rhs)
    M = R.T @ R + 1e-12 * np.eye(R.shape[0])
    try:
        return np.linalg.solve(M, R.T @ rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown("singular working-set system") from exc


class _IncrementalQR:
    """Economy QR of a growing/shrinking set of constraint gradients.

    Columns are appended with twice-reorthogonalized Gram-Schmidt and
    deleted with Givens rotations, so one active-set pivot costs
    ``O(d r)`` instead of a full refactorization.  The original vectors
    are kept so the factorization can be rebuilt after many updates.
    """

    REFRESH = 192

    def __init__(self, d: int):
        self.d = d
        self.Q = np.zeros((d, d))
        self.R = np.zeros((d, d))
        self.r = 0
        self.cols: list[np.ndarray] = []
        self._updates = 0

    def append(self, v: np.ndarray, rank_tol: float = _RANK_TOL) -> bool:
        """Add a column; False (and no change) if it is dependent."""
        r = self.r
        Q = self.Q[:, :r]
        w = Q.T @ v
        res = v - Q @ w
        if r:
            w2 = Q.T @ res
            res = res - Q @ w2
            w = w + w2
        rho = float(np.linalg.norm(res))
        if rho <= rank_tol * max(1.0, float(np.linalg.norm(v))):
            return False
        self.Q[:, r] = res / rho
        self.R[:r, r] = w
        self.R[r, r] = rho
        self.r = r + 1
        self.cols.append(v)
        self._bump()
        return True

    def delete(self, k: int) -> None:
        """Remove column ``k`` and restore triangular form."""
        r = self.r
        R, Q = self.R, self.Q
        R[:, k : r - 1] = R[:, k + 1 : r]
        for i in range(k, r - 1):
            a, b = R[i, i], R[i + 1, i]
            rad = float(np.hypot(a, b))
            if rad == 0.0:
                continue
            c, s = a / rad, b / rad
            Ri = R[i, i : r - 1].copy()
            Rj = R[i + 1, i : r - 1].copy()
            R[i, i : r - 1] = c * Ri + s * Rj
            R[i + 1, i : r - 1] = -s * Ri + c * Rj
            Qi = Q[:, i].copy()
            Qj = Q[:, i + 1].copy()
            Q[:, i] = c * Qi + s * Qj
            Q[:, i + 1] = -s * Qi + c * Qj
        R[:, r - 1] = 0.0
        R[r - 1, :] = 0.0
        Q[:, r - 1] = 0.0
        self.r = r - 1
        del self.cols[k]
        self._bump()

    def _bump(self):
        self._updates += 1
        if self._updates >= self.REFRESH:
            self.refactor()

    def refactor(self) -> None:
        """Rebuild the factorization from the stored columns."""
        self._updates = 0
        r = len(self.cols)
        self.Q[:] = 0.0
        self.R[:] = 0.0
        self.r = r
        if not r:
            return
        B = np.stack(self.cols, axis=1)
        Q, R = np.linalg.qr(B)
        self.Q[:, :r] = Q
        self.R[:r, :r] = R

    def project_out(self, v: np.ndarray) -> np.ndarray:
        """Component of ``v`` orthogonal to the stored columns."""
        Q = self.Q[:, : self.r]
        return v - Q @ (Q.T @ v)

    def multipliers(self, v: np.ndarray) -> np.ndarray:
        """Solve ``B y = v`` for the stacked-column matrix ``B``."""
        r = self.r
        return _tri_solve(self.R[:r, :r], self.Q[:, :r].T @ v)


def _orth_rows(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as rows) of the row space of M."""
    if M.shape[0] == 0:
        return np.zeros((0, M.shape[1]))
    q, r = np.linalg.qr(M.T)
    keep = np.abs(np.diag(r)) > _RANK_TOL * max(1.0, np.abs(np.diag(r)).max())
    return q[:, keep].T


def min_distance_active_set(
    A: np.ndarray,
    G: np.ndarray,
    h: np.ndarray,
    z: np.ndarray,
    x0: np.ndarray,
    w0=None,
    feas_tol: float = FEAS_TOL,
    mult_tol: float = MULT_TOL,
    max_iter: int | None = None,
):
    """Minimize ``|x - z|^2`` subject to ``A x = A x0`` and ``G x <= h``.

    ``x0`` must be feasible.  The equality right-hand side is taken from
    ``x0`` so the routine serves both polytopes and cones (``h = 0``,
    ``x0 = 0``).  Returns ``(x, working_set, eq_mult, ineq_mult, iters)``
    where ``eq_mult`` has one entry per row of ``A`` (zero on redundant
    rows, which are removed internally).
    """
    d = z.size
    m = A.shape[0]
    k = G.shape[0]
    x = np.asarray(x0, dtype=float).copy()
    if k:
        worst = float(np.max(G @ x - h))
        if worst > 1e-6:
            raise ValueError(f"start point infeasible by {worst:.2e}")
    if max_iter is None:
        max_iter = max(50 * (m + k), 100)

    # Redundant equality rows would break the null-space projection.
    if m:
        from .polytope import _independent_rows

        eq_idx = _independent_rows(A)
        A_red = A[eq_idx]
    else:
        eq_idx = np.zeros(0, dtype=int)
        A_red = np.zeros((0, d))
    m_red = A_red.shape[0]

    base_q = _orth_rows(A_red)
    g_norm = np.linalg.norm(G, axis=1) if k else np.zeros(0)
    slack = h - G @ x if k else np.zeros(0)
    tight = np.flatnonzero(slack <= feas_tol) if k else np.zeros(0, dtype=int)
    if w0 is None:
        order = tight
    else:
        w0 = [int(j) for j in w0 if k and slack[j] <= feas_tol]
        order = list(dict.fromkeys(list(w0) + list(tight)))
    W = _extend_independent(base_q, G, order) if k else []
    W.sort()

    zscale = 1.0 + float(np.linalg.norm(z))
    Q = R = None
    it = 0
    while it < max_iter:
        it += 1
        B = np.vstack([A_red, G[W]]) if (m_red or W) else np.zeros((0, d))
        if B.shape[0]:
            Q, R = np.linalg.qr(B.T)
        v = z - x
        dvec = v - Q @ (Q.T @ v) if B.shape[0] else v.copy()
        nd = np.linalg.norm(dvec)
        if nd <= _STEP_TOL * zscale:
            if not B.shape[0]:
                break
            y = _tri_solve(R, Q.T @ v)
            lam = y[m_red:]
            neg = np.flatnonzero(lam < -mult_tol)
            if neg.size == 0:
                break
            # Bland: drop the smallest-index offending row (W is sorted).
            W.pop(int(neg.min()))
            continue
        alpha = 1.0
        blocker = -1
        if k:
            mask = np.ones(k, dtype=bool)
            mask[W] = False
            idx = np.flatnonzero(mask)
            Gd = G[idx] @ dvec
            sl = h[idx] - G[idx] @ x
            pos = Gd > 1e-13 * (1.0 + g_norm[idx] * nd)
            if np.any(pos):
                t = np.maximum(sl[pos], 0.0) / Gd[pos]
                jj = idx[pos]
                tmin = t.min()
                if tmin < alpha:
                    alpha = float(tmin)
                    ties = jj[t <= tmin + 1e-12 * (1.0 + tmin)]
                    blocker = int(ties.min())
        x = x + alpha * dvec
        if blocker >= 0 and alpha < 1.0:
            W.append(blocker)
            W.sort()
    else:
        raise MaxIterationsExceeded(
            f"no convergence in {max_iter} active-set iterations", best_x=x
        )

    B = np.vstack([A_red, G[W]]) if (m_red or W) else np.zeros((0, d))
    mu = np.zeros(m)
    if B.shape[0]:
        Q, R = np.linalg.qr(B.T)
        y = _tri_solve(R, Q.T @ (z - x))
        mu[eq_idx] = y[:m_red]
        lam = y[m_red:]
    else:
        lam = np.zeros(0)
    return x, np.asarray(W, dtype=int), mu, lam, it


def project(
    spec: PolytopeSpec,
    z,
    start=None,
    working_set=None,
    feas_tol: float = FEAS_TOL,
    test_points: np.ndarray | None = None,
) -> ProjectionResult:
    """Project ``z`` onto the polytope.

    Parameters
    ----------
    spec : PolytopeSpec
        Validated polytope.
    z : array_like
        Point to project.
    start, working_set : optional
        Warm start: a feasible point and inequality rows to seed the
        working set.  A cold start uses a vertex or a feasibility solve.
    test_points : ndarray, optional
        Points of ``P`` against which the variational-inequality residual
        ``max <z - x, p - x>`` is reported.  Defaults to ``spec.vertices``.

    Returns
    -------
    ProjectionResult
        Minimizer with KKT certificate data.
    """
    z = np.asarray(z, dtype=float).ravel()
    x0 = None
    if start is not None:
        cand = np.asarray(start, dtype=float).ravel()
        if spec.contains(cand, 1e-7):
            x0 = cand
    if x0 is None:
        x0 = _find_feasible_point(spec)
        working_set = None
    x, W, mu, lam, iters = min_distance_active_set(
        spec.A, spec.G, spec.h, z, x0, w0=working_set, feas_tol=feas_tol
    )
    grad = z - x
    if spec.n_eq:
        grad = grad - spec.A.T @ mu
    if W.size:
        grad = grad - spec.G[W].T @ lam
    kkt = float(np.max(np.abs(grad))) if grad.size else 0.0
    if kkt > KKT_TOL * (1.0 + np.linalg.norm(z)):
        raise NumericalBreakdown(f"KKT stationarity residual {kkt:.2e}")

    active = spec.tight_rows(x, feas_tol)
    mults = np.zeros(active.size)
    pos = {int(j): i for i, j in enumerate(active)}
    for wj, lj in zip(W, lam):
        if int(wj) in pos:
            mults[pos[int(wj)]] = lj

    if test_points is None and spec.vertices is not None:
        test_points = spec.vertices
    if test_points is not None and len(test_points):
        residual = float(np.max((test_points - x) @ (z - x)))
    else:
        residual = kkt
    return ProjectionResult(
        x=x,
        active_set=active,
        multipliers=mults,
        residual=residual,
        working_set=W,
        eq_multipliers=mu,
        iterations=iters,
        kkt_residual=kkt,
    )


def solve_qlp(
    inst: QlpInstance,
    eta: float,
    start=None,
    working_set=None,
) -> ProjectionResult:
    """Unique minimizer of ``<c, x> + |x|^2/eta`` over the polytope."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return project(inst.polytope, inst.target(eta), start=start, working_set=working_set)


@dataclass
class CertReport:
    """Variational-inequality check of a projection against vertices."""

    max_violation: float
    tol: float
    passed: bool
    worst_vertex: int


def certify(
    spec: PolytopeSpec,
    result: ProjectionResult,
    z,
    vertices: VertexSet | np.ndarray,
    tol: float | None = None,
) -> CertReport:
    """Verify ``<z - x, v - x> <= tol`` over all vertices ``v``.

    The default tolerance is ``1e-7 * (1 + |z|)``.
    """
    z = np.asarray(z, dtype=float).ravel()
    V = vertices.vertices if isinstance(vertices, VertexSet) else np.asarray(vertices)
    if tol is None:
        tol = 1e-7 * (1.0 + float(np.linalg.norm(z)))
    vals = (V - result.x) @ (z - result.x)
    worst = int(np.argmax(vals))
    mx = float(vals[worst])
    return CertReport(max_violation=mx, tol=tol, passed=mx <= tol, worst_vertex=worst)
