"""Statistical multipath channel model for a planar array of movable antennas.

The downlink channel to user k is h_k = Q_k^H psi_k, where Q_k stacks the
unit-modulus steering responses exp(j r_n . kappa_l) of the antenna positions
r_n against the user's transmit-path wavevectors, and psi_k is the vector of
complex path gains.  Over the timescale of interest only psi_k is random: each
entry is circularly-symmetric complex Gaussian with per-path variance b_{lk}
(the angular power spectrum).  All users share one global path index of length
L, with user k owning a contiguous block of it, so the stacked channel matrix
is H = Q^H Psi with Psi block-diagonal by user.

Positions are in meters, wavevectors in rad/m; phase math is r . kappa with no
hidden unit conversions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateScenarioError, InvalidInputError
from .rng import as_rng

WAVEVECTOR_TOL = 1e-9


@dataclass(frozen=True)
class Wavevector:
    """2D transmit wavevector (rad/m); magnitude at most 2*pi/wavelength."""

    kx: float
    ky: float

    def magnitude(self) -> float:
        return float(np.hypot(self.kx, self.ky))

    @staticmethod
    def from_angles(azimuth: float, elevation: float, wavelength: float) -> "Wavevector":
        """Plane-wave wavevector for departure angles (radians)."""
        k0 = 2.0 * np.pi / wavelength
        return Wavevector(
            kx=k0 * np.cos(elevation) * np.cos(azimuth),
            ky=k0 * np.cos(elevation) * np.sin(azimuth),
        )


@dataclass
class AntennaLayout:
    """Planar antenna coordinates (meters); the optimization variable."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1 or self.x.size < 1:
            raise InvalidInputError("layout needs matching 1-D x/y arrays with N >= 1")

    @property
    def n(self) -> int:
        return self.x.size

    def positions(self) -> np.ndarray:
        """(N, 2) position array."""
        return np.stack([self.x, self.y], axis=1)

    def translated(self, dx: float, dy: float) -> "AntennaLayout":
        return AntennaLayout(self.x + dx, self.y + dy)


@dataclass(frozen=True)
class MovingRegion:
    """Rectangular moving region (sx by sy, centered) with a spacing floor."""

    sx: float
    sy: float
    min_spacing: float

    def __post_init__(self):
        if not (self.sx > 0 and self.sy > 0 and self.min_spacing > 0):
            raise InvalidInputError("region sizes and minimum spacing must be positive")


@dataclass
class StatisticalCsi:
    """Large-timescale channel description.

    wavevectors : (L, 2) array, the global transmit wavevector list
    power       : (L, K) array, expected path power per user (column k is
                  supported only on user k's contiguous block)
    user_path_ranges : per-user (start, end) half-open 0-based index ranges
    los_index   : per-user global path index of the LoS path, or None
    """

    wavelength: float
    wavevectors: np.ndarray
    power: np.ndarray
    user_path_ranges: list
    los_index: list = field(default_factory=list)

    def __post_init__(self):
        self.wavevectors = np.asarray(self.wavevectors, dtype=float).reshape(-1, 2)
        self.power = np.atleast_2d(np.asarray(self.power, dtype=float))
        self.user_path_ranges = [(int(a), int(b)) for a, b in self.user_path_ranges]
        if not self.los_index:
            self.los_index = [None] * self.power.shape[1]
        if self.wavelength <= 0:
            raise InvalidInputError("wavelength must be positive")
        L, K = self.power.shape
        if self.wavevectors.shape[0] != L:
            raise InvalidInputError("power rows must match wavevector count")
        if len(self.user_path_ranges) != K or len(self.los_index) != K:
            raise InvalidInputError("per-user metadata must have K entries")
        kmax = 2.0 * np.pi / self.wavelength + WAVEVECTOR_TOL
        if np.any(np.hypot(self.wavevectors[:, 0], self.wavevectors[:, 1]) > kmax):
            raise InvalidInputError("wavevector magnitude exceeds 2*pi/wavelength")
        if np.any(self.power < 0):
            raise InvalidInputError("path powers must be non-negative")
        for k, (a, b) in enumerate(self.user_path_ranges):
            if not (0 <= a < b <= L):
                raise InvalidInputError(f"bad path range for user {k}")
            outside = np.concatenate([self.power[:a, k], self.power[b:, k]])
            if np.any(outside > 0):
                raise InvalidInputError(f"user {k} has power outside its path block")
            if not np.any(self.power[a:b, k] > 0):
                raise InvalidInputError(f"user {k} has no positive path power")
            li = self.los_index[k]
            if li is not None and not (a <= int(li) < b):
                raise InvalidInputError(f"LoS index of user {k} outside its block")

    @property
    def n_paths(self) -> int:
        return self.power.shape[0]

    @property
    def n_users(self) -> int:
        return self.power.shape[1]

    def block(self, k: int) -> slice:
        a, b = self.user_path_ranges[k]
        return slice(a, b)


@dataclass
class ChannelSample:
    """One draw of the block-diagonal path-gain matrix Psi (and cached H)."""

    psi: np.ndarray
    h: np.ndarray | None = None


@dataclass
class ReceiveSideSpec:
    """Explicit receive-side scatter description used to audit the Gaussian model.

    For each user: the number of receive paths, the path-response magnitudes
    |Sigma| (transmit paths x receive paths), fixed response phases, the 3D
    receive wavevectors, and the radius of the user's local region.  Row l of
    |Sigma| satisfies sum_i |Sigma_{li}|^2 = b_l so the explicit phasor sum has
    the same per-path variance as the Gaussian model it validates.
    """

    rx_path_counts: list
    prm_magnitudes: list
    prm_phases: list
    rx_wavevectors: list
    local_radius: float

    def __post_init__(self):
        for k, mags in enumerate(self.prm_magnitudes):
            if np.any(np.asarray(mags) < 0):
                raise InvalidInputError(f"negative path-response magnitude for user {k}")


def steering_matrix(layout: AntennaLayout, csi: StatisticalCsi) -> np.ndarray:
    """(L, N) matrix whose column n is exp(j r_n . kappa_l), l = 1..L."""
    phase = csi.wavevectors @ layout.positions().T
    return np.exp(1j * phase)


def sample_path_gains(csi: StatisticalCsi, seed) -> ChannelSample:
    """Draw Psi with independent CN(0, b_{lk}) entries inside each user block.

    Real and imaginary parts are i.i.d. zero-mean Gaussian with variance
    b_{lk}/2; entries outside a user's block are exactly zero.  Deterministic
    given the seed (int or Generator).
    """
    rng = as_rng(seed)
    L, K = csi.power.shape
    scale = np.sqrt(csi.power / 2.0)
    z = rng.standard_normal((L, K)) + 1j * rng.standard_normal((L, K))
    return ChannelSample(psi=scale * z)


def channel_from_gains(layout: AntennaLayout, csi: StatisticalCsi,
                       sample: ChannelSample) -> ChannelSample:
    """Fill in H = Q^H Psi for the given layout; returns the same sample."""
    if sample.psi.shape != csi.power.shape:
        raise InvalidInputError("psi must be L x K to match the CSI")
    q = steering_matrix(layout, csi)
    sample.h = q.conj().T @ sample.psi
    return sample


def channel_covariance(layout: AntennaLayout, csi: StatisticalCsi, k: int) -> np.ndarray:
    """User-k channel autocorrelation E[h_k h_k^H] = Q^H Diag(b_k) Q (N x N)."""
    q = steering_matrix(layout, csi)
    g = q.conj().T @ (csi.power[:, k, None] * q)
    return 0.5 * (g + g.conj().T)


def channel_covariances(layout: AntennaLayout, csi: StatisticalCsi) -> np.ndarray:
    """(K, N, N) stack of per-user channel autocorrelation matrices."""
    q = steering_matrix(layout, csi)
    qh = q.conj().T
    g = np.stack([qh @ (csi.power[:, k, None] * q) for k in range(csi.n_users)])
    return 0.5 * (g + np.conj(np.swapaxes(g, 1, 2)))


def _los_nlos_power(csi: StatisticalCsi) -> tuple[float, float]:
    """Summed LoS and NLoS power over all users of one CSI."""
    los = 0.0
    total = float(csi.power.sum())
    for k in range(csi.n_users):
        li = csi.los_index[k]
        if li is None:
            raise DegenerateScenarioError("Rician rescaling requires a LoS index per user")
        los += float(csi.power[int(li), k])
    return los, total - los


def rician_rescale(csi: StatisticalCsi, beta: float,
                   ensemble: list[StatisticalCsi]) -> StatisticalCsi:
    """Rescale LoS/NLoS powers so the site-expected power ratio equals beta.

    The expected LoS and NLoS powers are ensemble averages over the candidate
    CSIs; the two scale factors preserve the expected total power exactly.
    """
    if not ensemble:
        raise InvalidInputError("Rician rescaling needs a non-empty ensemble")
    sums = np.array([_los_nlos_power(m) for m in ensemble], dtype=float)
    p_los, p_nlos = sums.mean(axis=0)
    if p_los <= 0 or p_nlos <= 0:
        raise DegenerateScenarioError("ensemble LoS or NLoS power is zero")
    p_total = p_los + p_nlos
    eta_los2 = (p_total / p_los) * (beta / (1.0 + beta))
    eta_nlos2 = (p_total / p_nlos) * (1.0 / (1.0 + beta))
    power = csi.power * eta_nlos2
    for k in range(csi.n_users):
        li = csi.los_index[k]
        if li is None:
            raise DegenerateScenarioError("Rician rescaling requires a LoS index per user")
        power[int(li), k] = csi.power[int(li), k] * eta_los2
    return StatisticalCsi(
        wavelength=csi.wavelength,
        wavevectors=csi.wavevectors.copy(),
        power=power,
        user_path_ranges=list(csi.user_path_ranges),
        los_index=list(csi.los_index),
    )


def build_receive_side_spec(csi: StatisticalCsi, rx_paths: int, seed,
                            local_radius: float = 1.0) -> ReceiveSideSpec:
    """Random explicit scatter model consistent with the CSI's power spectrum.

    Magnitudes in each transmit-path row are drawn uniform then normalized so
    their squared sum equals b_{lk}; response phases are uniform on [0, 2*pi);
    receive wavevectors are random 3D plane-wave directions scaled 2*pi/lambda.
    """
    rng = as_rng(seed)
    k0 = 2.0 * np.pi / csi.wavelength
    mags, phases, wavevecs, counts = [], [], [], []
    for k in range(csi.n_users):
        blk = csi.block(k)
        b = csi.power[blk, k]
        raw = rng.uniform(0.2, 1.0, size=(b.size, rx_paths))
        row_power = (raw ** 2).sum(axis=1)
        m = raw * np.sqrt(b / row_power)[:, None]
        az = rng.uniform(0, 2 * np.pi, size=rx_paths)
        el = rng.uniform(-np.pi / 2, np.pi / 2, size=rx_paths)
        wv = k0 * np.stack(
            [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=1)
        counts.append(rx_paths)
        mags.append(m)
        phases.append(rng.uniform(0, 2 * np.pi, size=m.shape))
        wavevecs.append(wv)
    return ReceiveSideSpec(
        rx_path_counts=counts,
        prm_magnitudes=mags,
        prm_phases=phases,
        rx_wavevectors=wavevecs,
        local_radius=local_radius,
    )


def phasor_sum_sample(spec: ReceiveSideSpec, csi: StatisticalCsi, k: int, seed) -> np.ndarray:
    """One explicit draw of user k's path gains as a finite phasor sum.

    Draws one i.i.d. uniform phase per receive path and returns
    psi_l = sum_i |Sigma_{li}| exp(j(phi_{li} + rho_i)).  This is the oracle
    the Gaussian approximation of sample_path_gains is audited against.
    """
    rng = as_rng(seed)
    rho = rng.uniform(0, 2 * np.pi, size=spec.rx_path_counts[k])
    sigma = spec.prm_magnitudes[k] * np.exp(1j * spec.prm_phases[k])
    return sigma @ np.exp(1j * rho)


def csi_to_json(csi: StatisticalCsi) -> str:
    """Serialize to the documented JSON schema (full float precision)."""
    doc = {
        "wavelength": csi.wavelength,
        "wavevectors": [[float(kx), float(ky)] for kx, ky in csi.wavevectors],
        "power": [[float(v) for v in row] for row in csi.power],
        "user_path_ranges": [[a, b] for a, b in csi.user_path_ranges],
        "los_index": [None if li is None else int(li) for li in csi.los_index],
    }
    return json.dumps(doc)


def csi_from_json(text: str) -> StatisticalCsi:
    doc = json.loads(text)
    return StatisticalCsi(
        wavelength=float(doc["wavelength"]),
        wavevectors=np.asarray(doc["wavevectors"], dtype=float),
        power=np.asarray(doc["power"], dtype=float),
        user_path_ranges=[tuple(r) for r in doc["user_path_ranges"]],
        los_index=[None if v is None else int(v) for v in doc["los_index"]],
    )
