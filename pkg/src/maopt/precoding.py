"""Zero-forcing precoding and water-filling power allocation.

With W = H (H^H H)^{-1} Diag(p)^(1/2) the per-user streams are interference
free and the transmit power is c^T p, where c = diag((H^H H)^{-1}).  The sum
rate therefore depends on the channel only through c, and the optimal p is the
water-filling allocation p_k = (nu / c_k - sigma2)_+ with the water level nu
fixed by the power budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularChannelError, UnsupportedConfigError

CONDITION_LIMIT = 1e12


@dataclass
class GramData:
    """Channel Gram matrix H^H H, its inverse, and c = diag of the inverse."""

    gram: np.ndarray
    gram_inv: np.ndarray
    c: np.ndarray
    condition_estimate: float


@dataclass
class WaterFillResult:
    """Water-filling allocation: powers p, water level nu, active users, rate."""

    p: np.ndarray
    nu: float
    active: frozenset
    rate: float


def gram_inverse_diag(h: np.ndarray) -> GramData:
    """Gram data for a channel matrix H (N x K), requiring K <= N.

    Raises UnsupportedConfigError for K > N and SingularChannelError when the
    Gram condition number exceeds 1e12 (users' channels linearly dependent).
    """
    h = np.asarray(h)
    if h.ndim != 2:
        raise InvalidInputError("precoding.gram_inverse_diag: H must be a matrix")
    n, k = h.shape
    if k > n:
        raise UnsupportedConfigError(
            f"precoding.gram_inverse_diag: K={k} users exceed N={n} antennas")
    gram = h.conj().T @ h
    gram = 0.5 * (gram + gram.conj().T)
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularChannelError(
            f"precoding.gram_inverse_diag: Gram condition {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    gram_inv = np.linalg.inv(gram)
    c = np.real(np.diag(gram_inv)).copy()
    if np.any(c <= 0):
        raise SingularChannelError("precoding.gram_inverse_diag: non-positive diagonal")
    return GramData(gram=gram, gram_inv=gram_inv, c=c, condition_estimate=cond)


def water_fill(c: np.ndarray, pt: float, sigma2: float) -> WaterFillResult:
    """Solve sum_k (nu - sigma2 c_k)_+ = pt for the water level by bisection.

    Bracket [0, pt + sigma2 max(c)]; the left side is monotone in nu, zero at
    the bottom and at least pt at the top, so the root is unique.  After the
    bisection pins the active set, nu is polished to the exact root of the
    resulting linear equation so the budget holds to machine precision.  Users
    with nu = sigma2 c_k exactly are classified inactive.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0) or pt <= 0 or sigma2 <= 0:
        raise InvalidInputError("precoding.water_fill: need c > 0, pt > 0, sigma2 > 0")
    floor = sigma2 * c
    floor_list = floor.tolist()
    lo, hi = 0.0, pt + float(floor.max())
    tol = 1e-12 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        spent = sum(mid - f for f in floor_list if mid > f)
        if spent < pt:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)

    # Exact root on the linear piece selected by the bisection; reclassify
    # until the active set is self-consistent (at most K rounds).
    active = nu > floor
    for _ in range(c.size + 1):
        if not np.any(active):
            active = floor == floor.min()
        nu = (pt + floor[active].sum()) / int(active.sum())
        new_active = nu > floor
        if np.array_equal(new_active, active):
            break
        active = new_active

    p = np.where(active, nu / c - sigma2, 0.0)
    rate = float(np.log2(nu / floor[active]).sum())
    return WaterFillResult(p=p, nu=float(nu), active=frozenset(np.flatnonzero(active)), rate=rate)


def rate_from_c(c: np.ndarray, pt: float, sigma2: float) -> float:
    """Instantaneous ZF sum rate (bits/s/Hz) as a function of c alone."""
    return water_fill(c, pt, sigma2).rate


def zf_precoder(h: np.ndarray, water: WaterFillResult) -> np.ndarray:
    """Explicit precoding matrix W = H (H^H H)^{-1} Diag(p)^(1/2)."""
    gd = gram_inverse_diag(h)
    return h @ gd.gram_inv * np.sqrt(water.p)[None, :]


def sinr_check(h: np.ndarray, w: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user SINR |h_k^H w_k|^2 / (sigma2 + sum_{i != k} |h_k^H w_i|^2)."""
    h = np.asarray(h)
    w = np.asarray(w)
    if h.shape != w.shape:
        raise InvalidInputError("precoding.sinr_check: H and W must be conformable")
    cross = np.abs(h.conj().T @ w) ** 2
    signal = np.diag(cross)
    interference = cross.sum(axis=1) - signal
    return signal / (sigma2 + interference)
