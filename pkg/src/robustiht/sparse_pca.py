"""Splitting solver for the sparse-PCA spectral relaxation.

Solves, for a general symmetric (not necessarily p.s.d.) matrix A,

    maximize   <A, H>
    subject to H >= 0 (p.s.d.),  tr(H) = 1,  ||H||_{1,1} <= radius.

The feasible set is the intersection of the spectraplex and an entrywise
l1 ball, and the objective is linear, so alternating-direction splitting
with the two projections is enough; no conic solver is needed.  Since
H >= 0 with tr(H) = 1 already forces H <= I, the spectraplex coincides
with the rank-one Fantope and projecting eigenvalues onto the probability
simplex projects onto it exactly.

Termination is by duality gap rather than splitting residuals: for any
mu >= 0, soft-thresholding A entrywise at mu gives the certified bound
lambda* <= lambda_max(soft(A, mu)) + mu * radius, while any feasible
iterate gives a lower bound, so the returned value carries a certificate
of its own accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError, NumericFailureError
from .sparse import SymMatrix, _as_sym_array

GAP_CHECK_EVERY = 20
OVER_RELAXATION = 1.7


@dataclass
class SolverOptions:
    """Splitting-solver knobs.

    ``penalty`` is relative: the effective coupling weight is penalty times
    the largest entry magnitude of the objective matrix, which keeps the
    iteration trajectory invariant under rescaling of the data.  The solver
    stops on a certified duality gap below ``value_tolerance`` (relative),
    on splitting residuals below the primal/dual tolerances, or when the
    best feasible value has stalled by less than ``value_tolerance`` per
    ``stall_window`` iterations.
    """

    max_iterations: int = 5000
    primal_tolerance: float = 1e-7
    dual_tolerance: float = 1e-7
    value_tolerance: float = 1e-7
    stall_window: int = 100
    penalty: float = 1.0
    seed: int = 0
    adaptive_penalty: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidConfigError("max_iterations must be >= 1")
        if min(self.primal_tolerance, self.dual_tolerance, self.value_tolerance) <= 0:
            raise InvalidConfigError("tolerances must be positive")
        if self.penalty <= 0:
            raise InvalidConfigError("penalty must be positive")
        if self.stall_window < 1:
            raise InvalidConfigError("stall_window must be >= 1")


@dataclass
class SparsePcaSolution:
    """Optimal value / matrix pair of the relaxation plus feasibility diagnostics."""

    lambda_star: float
    h_star: SymMatrix
    feasibility_gap: float
    iterations: int
    converged: bool
    duality_gap: float = float("inf")
    # internal splitting state, kept so callers can warm-start nearby solves
    _state: tuple | None = field(default=None, repr=False, compare=False)


def project_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection of a vector onto {w >= 0, sum(w) = total}."""
    if total <= 0:
        raise InvalidInputError("simplex total must be positive")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    ks = np.arange(1, v.shape[0] + 1)
    cond = u - css / ks > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _project_spectraplex_array(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    w = project_simplex(vals, 1.0)
    h = (vecs * w) @ vecs.T
    return (h + h.T) / 2.0


def project_spectraplex(m) -> SymMatrix:
    """Project onto {H >= 0, tr H = 1} via eigenvalue simplex projection."""
    arr = _as_sym_array(m)
    try:
        return SymMatrix(_project_spectraplex_array(arr))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericFailureError("eigendecomposition failed") from exc


def _project_l1_ball_array(m: np.ndarray, radius: float):
    """Returns the projection and the soft-threshold level it applied."""
    flat = m.ravel()
    l1 = np.abs(flat).sum()
    if l1 <= radius:
        return m.copy(), 0.0
    mags = np.abs(flat)
    u = np.sort(mags)[::-1]
    css = np.cumsum(u) - radius
    ks = np.arange(1, flat.shape[0] + 1)
    rho = int(np.nonzero(u - css / ks > 0)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return (np.sign(flat) * np.maximum(mags - theta, 0.0)).reshape(m.shape), float(theta)


def project_l1_ball(m, radius: float) -> SymMatrix:
    """Entrywise l1-ball projection over all d^2 entries (soft threshold)."""
    if radius <= 0:
        raise InvalidInputError("radius must be positive")
    out, _ = _project_l1_ball_array(_as_sym_array(m), float(radius))
    return SymMatrix(out)


def _upper_bound(arr: np.ndarray, radius: float, mu: float) -> float:
    """Certified bound lambda* <= lambda_max(soft(A, mu)) + mu * radius."""
    if mu <= 0:
        return float(np.linalg.eigvalsh(arr)[-1])
    soft = np.sign(arr) * np.maximum(np.abs(arr) - mu, 0.0)
    return float(np.linalg.eigvalsh(soft)[-1]) + mu * radius


def _feasible_value(arr: np.ndarray, h: np.ndarray, radius: float, blend_idx: int):
    """Blend h toward a feasible diagonal point until the l1 constraint holds."""
    l1 = float(np.abs(h).sum())
    if l1 <= radius:
        return float(np.tensordot(arr, h)), h
    theta = (l1 - radius) / (l1 - 1.0)
    w = (1.0 - theta) * h
    w[blend_idx, blend_idx] += theta
    return float(np.tensordot(arr, w)), w


def solve_relaxation(
    a,
    k_tilde: float,
    opts: SolverOptions | None = None,
    warm_start: SparsePcaSolution | None = None,
) -> SparsePcaSolution:
    """Solve the relaxation for symmetric ``a`` with l1 budget ``k_tilde``.

    Returns the best feasible iterate.  ``converged`` reports whether the
    duality gap fell below ``value_tolerance`` (or the splitting residuals
    below their tolerances) within the iteration budget; on timeout the
    best iterate so far is returned flagged, never an exception.  The
    returned matrix is feasible by construction, so ``lambda_star`` can
    never exceed the top eigenvalue of A.
    """
    opts = opts or SolverOptions()
    arr = _as_sym_array(a)
    d = arr.shape[0]
    radius = float(k_tilde)
    if not (1.0 <= radius <= d * d):
        raise InvalidInputError("k_tilde must lie in [1, d^2]")

    scale = float(np.abs(arr).max())
    if scale == 0.0:  # zero matrix: any feasible point is optimal with value 0
        h0 = np.eye(d) / d
        return SparsePcaSolution(0.0, SymMatrix(h0), 0.0, 0, True, 0.0, (h0, h0.copy(), np.zeros_like(h0), opts.penalty))

    rho = opts.penalty * scale
    if warm_start is not None and warm_start._state is not None:
        h, z, u, rho = warm_start._state
        if h.shape != arr.shape:
            raise InvalidInputError("warm start has mismatched dimension")
        h, z, u = h.copy(), z.copy(), u.copy()
    else:
        h = np.eye(d) / d
        z = h.copy()
        u = np.zeros_like(h)

    blend_idx = int(np.argmax(np.diag(arr)))
    value_scale = max(scale, 1e-300)
    best_value, best_point = _feasible_value(arr, h, radius, blend_idx)
    best_upper = _upper_bound(arr, radius, 0.0)
    converged = best_upper - best_value <= opts.value_tolerance * value_scale
    stall_tol = opts.value_tolerance * value_scale
    last_improved = 0
    it = 0
    alpha = OVER_RELAXATION

    while not converged and it < opts.max_iterations:
        it += 1
        h = _project_spectraplex_array(z - u + arr / rho)
        h_relaxed = alpha * h + (1.0 - alpha) * z
        z_prev = z
        z, theta_l1 = _project_l1_ball_array(h_relaxed + u, radius)
        u = u + h_relaxed - z

        value, point = _feasible_value(arr, h, radius, blend_idx)
        if not np.isfinite(value):
            raise NumericFailureError("splitting iterates became non-finite")
        if value > best_value + stall_tol:
            last_improved = it
        if value > best_value:
            best_value, best_point = value, point

        if it % GAP_CHECK_EVERY == 0 or it == opts.max_iterations:
            r_norm = np.linalg.norm(h - z)
            s_norm = rho * np.linalg.norm(z - z_prev)
            mu_hat = rho * theta_l1
            if mu_hat > 0:
                best_upper = min(best_upper, _upper_bound(arr, radius, mu_hat))
            gap_ok = best_upper - best_value <= opts.value_tolerance * value_scale
            eps_pri = opts.primal_tolerance * max(1.0, np.linalg.norm(h))
            eps_dual = opts.dual_tolerance * max(1.0, rho * np.linalg.norm(u))
            residual_ok = r_norm <= eps_pri and s_norm <= eps_dual
            stalled = it - last_improved >= opts.stall_window
            if gap_ok or residual_ok or stalled:
                converged = True
                break
            if opts.adaptive_penalty:
                if r_norm > 10.0 * s_norm and rho < 1e6 * scale:
                    rho *= 2.0
                    u /= 2.0
                elif s_norm > 10.0 * r_norm and rho > 1e-6 * scale:
                    rho /= 2.0
                    u *= 2.0

    l1_violation = max(0.0, float(np.abs(best_point).sum()) - radius)
    trace_violation = abs(float(np.trace(best_point)) - 1.0)
    return SparsePcaSolution(
        lambda_star=best_value,
        h_star=SymMatrix(best_point),
        feasibility_gap=max(l1_violation, trace_violation),
        iterations=it,
        converged=converged,
        duality_gap=best_upper - best_value,
        _state=(h, z, u, rho),
    )
