"""Bounded-variable revised primal simplex.

Solves ``max c.x  s.t.  row_lo <= A x <= row_hi,  lb <= x <= ub``.

Each row gets a logical variable ``r_i = (A x)_i`` carrying the row bounds,
so the working system is ``[A, -I] (x, r) = 0`` with every column bounded.
Phase 1 minimises the sum of bound violations of the basic variables and
can start from any basis, which is what makes warm starts from a parent node
cheap in branch-and-bound.  The basis inverse is a sparse LU factorisation
plus a product-form eta file, refactorised periodically.  Pricing is
Dantzig's rule; a long run of degenerate pivots triggers a solve with
randomly widened bounds followed by a clean-up pass on the true bounds,
and Bland's rule guards both of those passes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
_STALLED = "stalled"


class LPError(RuntimeError):
    """The simplex could not reach a trustworthy answer (stall, singular basis)."""


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: tuple[np.ndarray, np.ndarray] | None = None
    max_violation: float = 0.0


class _Factor:
    def __init__(self, B: sp.csc_matrix):
        self.m = B.shape[0]
        try:
            self.lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise np.linalg.LinAlgError(str(exc)) from None
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = self.lu.solve(a)
        for r, alpha in self.etas:
            xr = x[r] / alpha[r]
            x -= alpha * xr
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        w = c.astype(float, copy=True)
        for r, alpha in reversed(self.etas):
            w[r] = (w[r] - (w @ alpha - w[r] * alpha[r])) / alpha[r]
        return self.lu.solve(w, trans="T")

    def push(self, r: int, alpha: np.ndarray):
        self.etas.append((r, alpha.copy()))


class RevisedSimplex:
    """Reusable solver for one constraint matrix; bounds may change per call."""

    def __init__(self, A, row_lo, row_hi, c, *, feas_tol=1e-9, opt_tol=1e-9, pivot_tol=1e-9,
                 refactor_every=64, bland_after=40, max_iter=None):
        A = sp.csc_matrix(A, dtype=float)
        self.m, self.n = A.shape
        m, n = self.m, self.n
        self.M = sp.hstack([A, -sp.identity(m, format="csc")], format="csc")
        self.MT = self.M.T.tocsr()
        self.cost = np.concatenate([-np.asarray(c, dtype=float), np.zeros(m)])
        self.row_lo = np.asarray(row_lo, dtype=float)
        self.row_hi = np.asarray(row_hi, dtype=float)
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.bland_after = bland_after
        self.max_iter = max_iter or max(5000, 50 * (m + n))
        self._indptr = self.M.indptr
        self._indices = self.M.indices
        self._data = self.M.data

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        s, e = self._indptr[j], self._indptr[j + 1]
        col[self._indices[s:e]] = self._data[s:e]
        return col

    def _factor(self, basis: np.ndarray) -> _Factor:
        return _Factor(self.M[:, basis].tocsc())

    def solve(self, lb, ub, warm: tuple[np.ndarray, np.ndarray] | None = None) -> LPResult:
        m, n = self.m, self.n
        N = n + m
        lo = np.concatenate([np.asarray(lb, dtype=float), self.row_lo])
        hi = np.concatenate([np.asarray(ub, dtype=float), self.row_hi])
        if np.any(lo > hi + self.feas_tol):
            return LPResult(INFEASIBLE, None, -np.inf, 0)
        if m == 0:
            xs = np.where(self.cost[:n] < 0, hi[:n], lo[:n])
            xs = np.where(np.isfinite(xs), xs, np.where(self.cost[:n] == 0, np.clip(0.0, lo[:n], hi[:n]), np.nan))
            if np.isnan(xs).any():
                return LPResult(UNBOUNDED, None, np.inf, 0)
            return LPResult(OPTIMAL, xs, float(-self.cost[:n] @ xs), 0, None)
        tol_vec = self.feas_tol * (1.0 + np.maximum(np.abs(np.where(np.isfinite(lo), lo, 0.0)),
                                                    np.abs(np.where(np.isfinite(hi), hi, 0.0))))
        if warm is not None:
            basis = np.array(warm[0], dtype=np.int64)
            at_upper = np.array(warm[1], dtype=bool)
        else:
            basis = np.arange(n, N, dtype=np.int64)
            at_upper = np.zeros(N, dtype=bool)

        status, basis, at_upper, it = self._iterate(lo, hi, tol_vec, basis, at_upper, stall_limit=self.bland_after)
        total = it
        if status == _STALLED:
            # widen every finite bound by a small random amount so ties break, then clean up
            rng = np.random.default_rng(0x5EED)
            scale = 1e-6 * (1.0 + np.abs(np.where(np.isfinite(lo), lo, 0.0)))
            lo_p = lo - np.where(np.isfinite(lo), rng.uniform(0.5, 1.0, N) * scale, 0.0)
            scale = 1e-6 * (1.0 + np.abs(np.where(np.isfinite(hi), hi, 0.0)))
            hi_p = hi + np.where(np.isfinite(hi), rng.uniform(0.5, 1.0, N) * scale, 0.0)
            status, basis, at_upper, it = self._iterate(lo_p, hi_p, tol_vec, basis, at_upper, stall_limit=None)
            total += it
            if status == OPTIMAL:
                status, basis, at_upper, it = self._iterate(lo, hi, tol_vec, basis, at_upper, stall_limit=None)
                total += it
            elif status == INFEASIBLE:
                # the widened problem is a relaxation, so this is conclusive
                pass
        if status != OPTIMAL:
            return LPResult(status, None, -np.inf if status == INFEASIBLE else np.inf, total)

        # final accuracy check on a fresh factorisation
        x = self._primal(lo, hi, basis, at_upper)
        xs = x[:n].copy()
        act = self.M[:, :n] @ xs
        excess = np.concatenate([
            np.maximum(lo[:n] - xs, 0.0), np.maximum(xs - hi[:n], 0.0),
            np.maximum(self.row_lo - act, 0.0), np.maximum(act - self.row_hi, 0.0),
        ])
        allowed = np.concatenate([tol_vec[:n], tol_vec[:n], tol_vec[n:], tol_vec[n:]])
        allowed = 1e-7 + 1e-3 * allowed  # 1e-7 absolute plus 1e-12 relative
        viol = float(excess.max(initial=0.0))
        if np.any(excess > allowed):
            raise LPError(f"simplex solution violates constraints by {viol:.3g}")
        xs = np.clip(xs, lo[:n], hi[:n])
        return LPResult(OPTIMAL, xs, float(-self.cost[:n] @ xs), total,
                        (basis.copy(), at_upper.copy()), viol)

    def _primal(self, lo, hi, basis, at_upper) -> np.ndarray:
        N = self.n + self.m
        is_basic = np.zeros(N, dtype=bool)
        is_basic[basis] = True
        x = np.zeros(N)
        nb = ~is_basic
        x[nb] = np.where(at_upper[nb], hi[nb], lo[nb])
        x[nb & ~np.isfinite(x)] = 0.0
        F = self._factor(basis)
        x[basis] = F.ftran(-(self.M[:, np.flatnonzero(nb)] @ x[nb]))
        return x

    def _iterate(self, lo, hi, tol_vec, basis, at_upper, *, stall_limit):
        """Primal simplex from the given basis; returns (status, basis, at_upper, iterations).

        With ``stall_limit`` set, a run of that many degenerate pivots returns
        ``_STALLED``; otherwise the run switches to Bland's rule.
        """
        m, n = self.m, self.n
        N = n + m
        basis = basis.copy()
        at_upper = at_upper.copy()
        is_basic = np.zeros(N, dtype=bool)
        is_basic[basis] = True

        x = np.zeros(N)

        def place_nonbasic():
            nb = ~is_basic
            use_hi = nb & ((at_upper & np.isfinite(hi)) | (~np.isfinite(lo) & np.isfinite(hi)))
            use_lo = nb & ~use_hi & np.isfinite(lo)
            x[use_hi] = hi[use_hi]
            x[use_lo] = lo[use_lo]
            free = nb & ~use_hi & ~use_lo
            x[free] = 0.0
            at_upper[:] = use_hi | (at_upper & is_basic)

        place_nonbasic()
        try:
            F = self._factor(basis)
        except np.linalg.LinAlgError:
            logger.debug("warm basis singular; restarting from the slack basis")
            basis = np.arange(n, N, dtype=np.int64)
            is_basic[:] = False
            is_basic[basis] = True
            at_upper[:] = False
            place_nonbasic()
            F = self._factor(basis)

        def recompute_basic():
            nb = ~is_basic
            rhs = -(self.M[:, np.flatnonzero(nb)] @ x[nb])
            x[basis] = F.ftran(rhs)

        recompute_basic()
        it = 0
        degenerate_run = 0
        finite_lo = np.isfinite(lo)
        finite_hi = np.isfinite(hi)
        movable = (hi - lo) > 0

        while True:
            if it >= self.max_iter:
                raise LPError(f"simplex iteration cap {self.max_iter} reached")
            if stall_limit is not None and degenerate_run >= stall_limit:
                return _STALLED, basis, at_upper, it
            xb = x[basis]
            lb_b, ub_b, tb = lo[basis], hi[basis], tol_vec[basis]
            below = xb < lb_b - tb
            above = xb > ub_b + tb
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cn = np.zeros(N)
            else:
                cb = self.cost[basis]
                cn = self.cost
            y = F.btran(cb)
            d = cn - self.MT @ y
            d[is_basic] = 0.0

            # candidates: decrease cost by moving a nonbasic off its bound
            at_lo_side = ~is_basic & movable & (~at_upper | ~finite_hi & ~finite_lo)
            at_hi_side = ~is_basic & movable & (at_upper | ~finite_lo & ~finite_hi)
            inc = at_lo_side & (d < -self.opt_tol)
            dec = at_hi_side & (d > self.opt_tol)
            cand = inc | dec
            if not cand.any():
                if phase1:
                    return INFEASIBLE, basis, at_upper, it
                return OPTIMAL, basis, at_upper, it
            use_bland = degenerate_run >= self.bland_after
            if use_bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if inc[q] else -1.0

            alpha = F.ftran(self._column(q))
            delta = -direction * alpha  # rate of change of basic variables
            big = np.abs(alpha) > self.pivot_tol
            limits = np.full(m, np.inf)
            down = big & (delta < 0)
            target_dn = np.where(above, ub_b, lb_b)
            ok_dn = down & (above | ~below) & np.isfinite(target_dn)
            limits[ok_dn] = (xb[ok_dn] - target_dn[ok_dn]) / (-delta[ok_dn])
            up = big & (delta > 0)
            target_up = np.where(below, lb_b, ub_b)
            ok_up = up & (below | ~above) & np.isfinite(target_up)
            limits[ok_up] = (target_up[ok_up] - xb[ok_up]) / delta[ok_up]
            limits = np.maximum(limits, 0.0)
            t_flip = hi[q] - lo[q] if (finite_hi[q] and finite_lo[q]) else np.inf

            r = -1
            t_row = np.inf
            if np.isfinite(limits).any():
                t_row = float(limits.min())
                ties = np.flatnonzero(limits <= t_row + 1e-12)
                if use_bland:
                    r = int(ties[np.argmin(basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(alpha[ties]))])
            if t_flip <= t_row:
                step = t_flip
                x[q] = hi[q] if direction > 0 else lo[q]
                at_upper[q] = direction > 0
                x[basis] = xb + step * delta
                it += 1
                degenerate_run = 0 if step > 1e-12 else degenerate_run + 1
                continue
            if r < 0:
                if phase1:
                    raise LPError("phase 1 found no blocking row")
                return UNBOUNDED, basis, at_upper, it

            step = t_row
            leaving = int(basis[r])
            new_val = x[q] + direction * step
            x[basis] = xb + step * delta
            # snap the leaving variable onto the bound it reached
            if delta[r] < 0:
                to_upper = bool(above[r])
            else:
                to_upper = not bool(below[r])
            x[leaving] = hi[leaving] if to_upper else lo[leaving]
            at_upper[leaving] = to_upper
            is_basic[leaving] = False
            basis[r] = q
            is_basic[q] = True
            at_upper[q] = False
            x[q] = new_val
            F.push(r, alpha)
            it += 1
            degenerate_run = 0 if step > 1e-12 else degenerate_run + 1
            if len(F.etas) >= self.refactor_every:
                try:
                    F = self._factor(basis)
                except np.linalg.LinAlgError as exc:
                    raise LPError("basis became singular") from exc
                recompute_basic()


def solve_lp(A, row_lo, row_hi, c, lb, ub, **kw) -> LPResult:
    return RevisedSimplex(A, row_lo, row_hi, c, **kw).solve(lb, ub)
