"""Large-system (deterministic-equivalent) rate approximation and gradient.

As the number of paths per user grows, the random vector c = diag((H^H H)^-1)
concentrates on a deterministic limit c_inf computed from the per-user channel
autocorrelation matrices G_k alone:

    c_inf_k = 1 / tr(G_k Y_k^-1),   Y_k = I_N + sum_{i != k} eps_{k,i} G_i,

where for each k the auxiliaries eps_k are the unique positive solution of
tr(eps_{k,l} G_l Y_k^-1) = 1, l = 1..K.  Each row is solved with a damped
Newton method started from zero, using the analytic Jacobian

    J_ul = 1(u = l) tr(G_u Y^-1) - eps_u Re tr(G_u Y^-1 G_l Y^-1) [l != k].

All traces are evaluated in the N x N space (tr(Diag(b_u) D Diag(b_w) D) =
tr(G_u Y^-1 G_w Y^-1) with D the path-domain resolvent), so no L x L matrix
is ever formed.  The surrogate rate is the water-filled sum rate at c_inf, and
its position gradient follows from implicit differentiation of the fixed
point; the per-path structures needed there stay O(L N) as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import AntennaLayout, StatisticalCsi, channel_covariances, steering_matrix
from .errors import ConvergenceError, DegenerateScenarioError, InvalidInputError, NumericError, UnsupportedConfigError
from .montecarlo import LN2, RateGradient
from .precoding import water_fill

DEFAULT_TOL = 1e-3
MAX_HALVINGS = 30


@dataclass
class FixedPointSolution:
    """Fixed-point auxiliaries (row k holds eps_k) and the asymptotic c vector."""

    epsilon: np.ndarray
    c_inf: np.ndarray
    newton_iters: np.ndarray
    residuals: np.ndarray


def _g_stack(source) -> np.ndarray:
    """Normalize the input to a (K, N, N) stack of covariance matrices."""
    if isinstance(source, tuple) and len(source) == 2:
        layout, csi = source
        g = channel_covariances(layout, csi)
    else:
        g = np.asarray(source, dtype=complex)
        if g.ndim != 3 or g.shape[1] != g.shape[2]:
            raise InvalidInputError("asymptotic: need K square covariance matrices")
    k, n = g.shape[0], g.shape[1]
    if k > n:
        raise UnsupportedConfigError(f"asymptotic: K={k} users exceed N={n} antennas")
    traces = np.einsum("knn->k", g).real
    if np.any(traces <= 0):
        raise DegenerateScenarioError("asymptotic: a user has zero channel power")
    return g


def _resolvent(g: np.ndarray, eps: np.ndarray, k: int):
    """(Y^-1, t) with Y = I + sum_{i != k} eps_i G_i and t_u = Re tr(G_u Y^-1)."""
    n = g.shape[1]
    w = eps.copy()
    w[k] = 0.0
    y = np.eye(n) + np.tensordot(w, g, axes=(0, 0))
    a = np.linalg.inv(y)
    a = 0.5 * (a + a.conj().T)
    t = (g.reshape(g.shape[0], -1) @ a.T.ravel()).real
    return a, t


def _jacobian(g: np.ndarray, eps: np.ndarray, k: int, a: np.ndarray, t: np.ndarray) -> np.ndarray:
    ag = a[None] @ g
    p = ag @ a[None]
    x = np.einsum("unm,wmn->uw", g, p).real
    x[:, k] = 0.0
    return np.diag(t) - eps[:, None] * x


def _resolvent_rows(g: np.ndarray, eps: np.ndarray, rows: np.ndarray):
    """Batched (Y^-1, t) for several user rows at once."""
    kk, n = g.shape[0], g.shape[1]
    w = eps.copy()
    w[np.arange(rows.size), rows] = 0.0
    y = np.eye(n) + (w @ g.reshape(kk, -1)).reshape(-1, n, n)
    a = np.linalg.inv(y)
    a = 0.5 * (a + np.conj(np.swapaxes(a, 1, 2)))
    t = (np.swapaxes(a, 1, 2).reshape(-1, n * n) @ g.reshape(kk, -1).T).real
    return a, t


def _newton_rows(g: np.ndarray, rows: np.ndarray, max_iters: int, tol: float):
    """Damped Newton on several independent user rows in lockstep.

    Each row follows exactly the single-row iteration (same updates, same
    per-row damping); batching only vectorizes the linear algebra.  Returns
    (eps, iters, residuals, t_final) with the exact diagonal read-out applied.
    """
    kk = g.shape[0]
    r = rows.size
    eps = np.zeros((r, kk))
    a, t = _resolvent_rows(g, eps, rows)
    gval = eps * t - 1.0
    gnorm = np.linalg.norm(gval, axis=1)
    iters = np.zeros(r, dtype=int)
    active = np.ones(r, dtype=bool)
    for _ in range(max_iters):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        ga, aa, ta, ea = gval[idx], a[idx], t[idx], eps[idx]
        n = g.shape[1]
        p = (aa[:, None] @ g[None]) @ aa[:, None]
        x = (np.swapaxes(p, 2, 3).reshape(idx.size, kk, n * n)
             @ g.reshape(kk, -1).T).real.transpose(0, 2, 1)
        x[np.arange(idx.size), :, rows[idx]] = 0.0
        jac = -ea[:, :, None] * x
        jac[:, np.arange(kk), np.arange(kk)] += ta
        try:
            delta = np.linalg.solve(jac, ga[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NumericError("asymptotic.newton_epsilon: singular Jacobian") from exc
        cand = ea - delta
        a_new, t_new = _resolvent_rows(g, cand, rows[idx])
        g_new = cand * t_new - 1.0
        for j in range(idx.size):
            for _halve in range(MAX_HALVINGS):
                if np.all(cand[j] > 0) and np.linalg.norm(g_new[j]) <= gnorm[idx[j]]:
                    break
                delta[j] *= 0.5
                cand[j] = ea[j] - delta[j]
                a_new[j], tj = _resolvent(g, cand[j], int(rows[idx[j]]))
                t_new[j] = tj
                g_new[j] = cand[j] * tj - 1.0
        step_rel = (np.linalg.norm(cand - ea, axis=1)
                    / np.maximum(np.linalg.norm(cand, axis=1), 1e-300))
        eps[idx], a[idx], t[idx], gval[idx] = cand, a_new, t_new, g_new
        gnorm[idx] = np.linalg.norm(g_new, axis=1)
        iters[idx] += 1
        active[idx] = ~((step_rel < tol) & (gnorm[idx] < tol))
    if active.any():
        bad = int(rows[np.flatnonzero(active)[0]])
        raise ConvergenceError(
            f"asymptotic.newton_epsilon: no convergence for user {bad} in {max_iters} "
            f"iterations (residual {gnorm[np.flatnonzero(active)[0]]:.3e})")
    # Each row's k-th equation is linear in eps_k and decoupled from Y; read it
    # out exactly so the diagonal identity eps_{k,k} = c_inf_k holds.
    ar = np.arange(r)
    eps[ar, rows] = 1.0 / t[ar, rows]
    residuals = np.linalg.norm(eps * t - 1.0, axis=1)
    return eps, iters, residuals, t


def newton_epsilon(source, k: int, max_iters: int = 50, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve the row-k fixed-point auxiliaries eps_k by damped Newton iteration.

    `source` is either a (K, N, N) covariance stack (or list of K matrices) or
    an (AntennaLayout, StatisticalCsi) tuple.  Starts from eps = 0; stops when
    both the relative step and the residual norm fall below `tol`.  After each
    Newton update the step is halved (up to 30 times) whenever a component
    would leave the positive orthant or the residual norm would grow.  The
    k-th component is finally replaced by its exact read-out 1 / tr(G_k Y^-1),
    which the other equations do not couple to.
    """
    g = _g_stack(source)
    eps, _, _, _ = _newton_rows(g, np.array([k]), max_iters, tol)
    return eps[0]


def asymptotic_c(source, max_iters: int = 50, tol: float = DEFAULT_TOL) -> FixedPointSolution:
    """Solve all K fixed-point rows (in lockstep) and assemble c_inf."""
    g = _g_stack(source)
    kk = g.shape[0]
    rows = np.arange(kk)
    eps, iters, res, t = _newton_rows(g, rows, max_iters, tol)
    c_inf = 1.0 / t[rows, rows]
    return FixedPointSolution(epsilon=eps, c_inf=c_inf, newton_iters=iters, residuals=res)


def asymptotic_rate(layout: AntennaLayout, csi: StatisticalCsi, pt: float, sigma2: float,
                    max_iters: int = 50, tol: float = DEFAULT_TOL) -> float:
    """Deterministic surrogate for the ergodic ZF sum rate (no sampling)."""
    sol = asymptotic_c((layout, csi), max_iters=max_iters, tol=tol)
    return water_fill(sol.c_inf, pt, sigma2).rate


def asymptotic_rate_gradient(layout: AntennaLayout, csi: StatisticalCsi, pt: float,
                             sigma2: float, max_iters: int = 50,
                             tol: float = DEFAULT_TOL) -> RateGradient:
    """Closed-form position gradient of the asymptotic rate.

    Differentiates c_inf_k = [tr(G_k Y_k^-1)]^-1 with the implicit-function
    rule for the auxiliaries (d eps / dv = -J^-1 dG/dv), evaluated entirely
    from the converged fixed point; no numerical differentiation.
    """
    q = steering_matrix(layout, csi)
    b = csi.power
    g = channel_covariances(layout, csi)
    kk = g.shape[0]
    sol = asymptotic_c(g, max_iters=max_iters, tol=tol)
    wf = water_fill(sol.c_inf, pt, sigma2)
    dr_dc = -wf.p / (wf.nu * LN2)

    theta = {"x": csi.wavevectors[:, 0], "y": csi.wavevectors[:, 1]}
    grads = {"x": np.zeros(layout.n), "y": np.zeros(layout.n)}
    imag_residual = 0.0
    for k in range(kk):
        eps_k = sol.epsilon[k]
        a, t = _resolvent(g, eps_k, k)
        jac = _jacobian(g, eps_k, k, a, t)
        # chi[w] = Re tr(G_w Y^-1 G_k Y^-1) for w != k (sensitivity of the trace
        # to the auxiliaries), zero at w = k.
        pk = a @ g[k] @ a
        chi = np.einsum("wnm,mn->w", g, pk).real
        chi[k] = 0.0
        try:
            back = np.linalg.solve(jac.T, chi)
        except np.linalg.LinAlgError as exc:
            raise NumericError(
                f"asymptotic.asymptotic_rate_gradient: ill-conditioned Jacobian for user {k}") from exc
        w_paths = b @ np.where(np.arange(kk) == k, 0.0, eps_k)  # omega: path weights of Y_k
        qa = q @ a
        c2 = sol.c_inf[k] ** 2
        for axis in ("x", "y"):
            jtheta = 1j * theta[axis]
            s = q.conj().T @ ((w_paths * jtheta)[:, None] * q)
            p_mat = jtheta[:, None] * q - q @ (a @ s)
            z = p_mat * qa.conj()
            u_full = z.T @ b
            imag_residual = max(imag_residual, float(np.abs(u_full.imag).max(initial=0.0)))
            u_full = 2.0 * u_full.real                      # columns: 2 Re(F_k^v b_l)
            dck = -c2 * (u_full @ (eps_k * back) + u_full[:, k])
            grads[axis] += dr_dc[k] * dck
    return RateGradient(rate=wf.rate, grad_x=grads["x"], grad_y=grads["y"],
                        imag_residual=imag_residual)
