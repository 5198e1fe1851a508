"""Monte-Carlo estimate of the ergodic ZF sum rate and its position gradient.

Each channel draw contributes its instantaneous rate R = sum log2(nu/(sigma2
c_k)) and the exact per-draw gradient.  Writing c_k as the k-th diagonal entry
of (Psi^H Q Q^H Psi)^{-1}, its derivative with respect to antenna coordinate
v_n is the Hermitian quadratic form

    dc_k/dv_n = q_n^H ((xi_k xi_k^H) o Lambda_v) q_n,

where q_n is column n of the steering matrix, xi_k is column k of
Psi (H^H H)^{-1}, o is the elementwise product, and Lambda_v collects the
wavevector differences j(kappa_i^v - kappa_l^v).  Because Lambda_v has the
rank-2 structure j(theta 1^T - 1 theta^T), the quadratic form reduces to
2 Im(conj(s0) s1) with s0 = xi_k^H q_n and s1 = xi_k^H Diag(theta_v) q_n; the
implementation uses that exactly-real form and never builds an L x L matrix.
The chain rule through the water level gives dR/dc_k = -p_k / (nu ln 2), which
holds on both sides of an active-set change, so the per-draw gradient is

    dR/dv_n = -(1 / (nu ln 2)) q_n^H (F o Lambda_v) q_n,
    F = Psi C^{-1} Diag(p) C^{-1} Psi^H.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import AntennaLayout, ChannelSample, StatisticalCsi, sample_path_gains, steering_matrix
from .errors import DegenerateScenarioError, InvalidInputError, SingularChannelError
from .precoding import gram_inverse_diag, water_fill
from .rng import child_rng

LN2 = np.log(2.0)
MAX_RESAMPLE_FRACTION = 0.10


@dataclass
class RateGradient:
    """Surrogate rate and its gradient w.r.t. antenna x/y coordinates.

    imag_residual records the largest imaginary part discarded when taking the
    real value of the Hermitian quadratic forms (diagnostic only); resamples
    counts channel draws replaced due to a singular Gram matrix.
    """

    rate: float
    grad_x: np.ndarray
    grad_y: np.ndarray
    imag_residual: float = 0.0
    resamples: int = 0


def wavevector_diff_matrix(csi: StatisticalCsi, axis: str) -> np.ndarray:
    """L x L Hermitian matrix with entries j(kappa_i^v - kappa_l^v), v in {x, y}."""
    theta = _axis_components(csi, axis)
    return 1j * (theta[:, None] - theta[None, :])


def f_matrix(psi: np.ndarray, gram_inv: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Weighted outer-product matrix F = Psi C^{-1} Diag(p) C^{-1} Psi^H."""
    xi = psi @ gram_inv
    return (xi * p[None, :]) @ xi.conj().T


def _axis_components(csi: StatisticalCsi, axis: str) -> np.ndarray:
    if axis == "x":
        return csi.wavevectors[:, 0]
    if axis == "y":
        return csi.wavevectors[:, 1]
    raise InvalidInputError("axis must be 'x' or 'y'")


def _sample_core(q: np.ndarray, theta_x: np.ndarray, theta_y: np.ndarray,
                 psi: np.ndarray, pt: float, sigma2: float) -> RateGradient:
    """Rate and gradient for one draw, given the precomputed steering matrix."""
    h = q.conj().T @ psi
    gd = gram_inverse_diag(h)
    wf = water_fill(gd.c, pt, sigma2)
    xi = psi @ gd.gram_inv
    s0 = xi.conj().T @ q                                  # (K, N)
    weights = -wf.p / (wf.nu * LN2)                       # dR/dc_k
    grads = []
    for theta in (theta_x, theta_y):
        s1 = xi.conj().T @ (theta[:, None] * q)
        dc = 2.0 * np.imag(np.conj(s0) * s1)              # (K, N), exactly real form
        grads.append(weights @ dc)
    return RateGradient(rate=wf.rate, grad_x=grads[0], grad_y=grads[1])


def sample_rate_gradient(layout: AntennaLayout, csi: StatisticalCsi,
                         sample: ChannelSample, pt: float, sigma2: float) -> RateGradient:
    """Instantaneous rate and exact position gradient for one channel draw."""
    if sample.psi.shape != csi.power.shape:
        raise InvalidInputError("montecarlo.sample_rate_gradient: psi shape mismatch")
    q = steering_matrix(layout, csi)
    return _sample_core(q, csi.wavevectors[:, 0], csi.wavevectors[:, 1],
                        sample.psi, pt, sigma2)


def _draw_psi(csi: StatisticalCsi, seed: int, tag: str, *idx: int) -> np.ndarray:
    return sample_path_gains(csi, child_rng(seed, tag, *idx)).psi


class McSampleSet:
    """Deterministic cache of channel draws for one (csi, seed) pair.

    Draw m comes from the child stream ('mc-sample', m); its replacement
    attempt r from ('mc-resample', m, r).  The draws do not depend on the
    antenna layout, so one set can be shared across the layout evaluations of
    a line search (common random numbers).
    """

    def __init__(self, csi: StatisticalCsi, seed: int):
        self.csi = csi
        self.seed = seed
        self._primary: dict = {}
        self._retry: dict = {}

    def primary(self, m: int) -> np.ndarray:
        if m not in self._primary:
            self._primary[m] = _draw_psi(self.csi, self.seed, "mc-sample", m)
        return self._primary[m]

    def retry(self, m: int, attempt: int) -> np.ndarray:
        key = (m, attempt)
        if key not in self._retry:
            self._retry[key] = _draw_psi(self.csi, self.seed, "mc-resample", m, attempt)
        return self._retry[key]


def _mc_loop(layout, csi, pt, sigma2, n_samples, seed, samples, per_draw, opname):
    """Shared resample-and-accumulate loop; per_draw(q, psi) -> contribution."""
    if n_samples < 1:
        raise InvalidInputError(f"montecarlo.{opname}: n_samples must be >= 1")
    if samples is None:
        samples = McSampleSet(csi, seed)
    q = steering_matrix(layout, csi)
    out = []
    resamples = 0
    for m in range(n_samples):
        psi = samples.primary(m)
        for attempt in range(n_samples + 10):
            try:
                out.append(per_draw(q, psi))
                break
            except SingularChannelError:
                resamples += 1
                if resamples > MAX_RESAMPLE_FRACTION * n_samples:
                    raise DegenerateScenarioError(
                        f"montecarlo.{opname}: singular-channel resample rate "
                        f"exceeded {MAX_RESAMPLE_FRACTION:.0%}")
                psi = samples.retry(m, attempt)
    return out, resamples


def mc_rate_gradient(layout: AntennaLayout, csi: StatisticalCsi, pt: float,
                     sigma2: float, n_samples: int, seed: int,
                     samples: McSampleSet | None = None) -> RateGradient:
    """Average rate and gradient over n_samples independent channel draws.

    Draws whose Gram matrix is singular are replaced and counted; more than
    10% replacements raises DegenerateScenarioError.  Deterministic given
    (seed, n_samples); accumulation is in index order.
    """
    tx, ty = csi.wavevectors[:, 0], csi.wavevectors[:, 1]
    per, resamples = _mc_loop(
        layout, csi, pt, sigma2, n_samples, seed, samples,
        lambda q, psi: _sample_core(q, tx, ty, psi, pt, sigma2), "mc_rate_gradient")
    inv = 1.0 / n_samples
    return RateGradient(rate=sum(r.rate for r in per) * inv,
                        grad_x=sum(r.grad_x for r in per) * inv,
                        grad_y=sum(r.grad_y for r in per) * inv,
                        resamples=resamples)


def mc_rate(layout: AntennaLayout, csi: StatisticalCsi, pt: float, sigma2: float,
            n_samples: int, seed: int, samples: McSampleSet | None = None) -> float:
    """Rate-only Monte-Carlo average over the same draws as mc_rate_gradient."""
    rates, _ = _mc_loop(
        layout, csi, pt, sigma2, n_samples, seed, samples,
        lambda q, psi: water_fill(gram_inverse_diag(q.conj().T @ psi).c, pt, sigma2).rate,
        "mc_rate")
    return sum(rates) / n_samples
