"""Antenna-position optimization by log-barrier penalized gradient ascent.

The moving-region and minimum-spacing constraints are folded into a log
barrier, and the penalized surrogate objective

    f(x, y) = rate(x, y) + mu * barrier(x, y)

is maximized by normalized-gradient ascent with Armijo backtracking.  An outer
loop shrinks mu geometrically; it stops once a whole inner stage displaces the
layout by less than eps_r (measured against the stage's starting layout, not
the previous iterate).  Every accepted iterate is strictly feasible because
the line search rejects any candidate outside the open feasible set.

The rate surrogate and its gradient come from one of three interchangeable
engines: Monte-Carlo averaging, the deterministic large-system approximation,
or a single pinned channel draw (the instantaneous-CSI baseline).  With the
Monte-Carlo engine the line search reuses the gradient's random draws, so
each backtracking test compares values of one deterministic function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotic import asymptotic_rate, asymptotic_rate_gradient
from .channel import AntennaLayout, ChannelSample, MovingRegion, StatisticalCsi
from .errors import InfeasiblePointError, InvalidInputError
from .montecarlo import (McSampleSet, RateGradient, mc_rate, mc_rate_gradient,
                         sample_rate_gradient)
from .precoding import gram_inverse_diag, water_fill
from .rng import child_rng

ALPHA_UNDERFLOW = 1e-12


@dataclass
class OptimizerConfig:
    """Knobs of the penalized ascent (defaults follow the standard recipe)."""

    mu0: float = 1.0
    rho: float = 0.4
    eps_r: float = 0.01
    alpha0: float = 0.15
    eta: float = 0.2
    inner_iters: int = 20
    engine: str = "de"
    mc_samples: int = 30
    seed: int = 0
    mc_reseed_per_iteration: bool = False
    max_stages: int = 60

    def __post_init__(self):
        if not (0 < self.rho < 1 and 0 < self.eta < 1):
            raise InvalidInputError("optimizer: rho and eta must lie in (0, 1)")
        if self.alpha0 <= 0 or self.eps_r <= 0 or self.inner_iters < 1:
            raise InvalidInputError("optimizer: alpha0, eps_r > 0 and inner_iters >= 1")
        if self.engine not in ("mc", "de"):
            raise InvalidInputError("optimizer: engine must be 'mc' or 'de'")

    @staticmethod
    def defaults(wavelength: float, **overrides) -> "OptimizerConfig":
        """Defaults with the length scales tied to the wavelength."""
        base = dict(eps_r=0.01 * wavelength, alpha0=0.15 * wavelength)
        base.update(overrides)
        return OptimizerConfig(**base)


@dataclass
class TraceRow:
    stage: int
    mu: float
    iteration: int
    f: float
    rate: float
    barrier: float
    alpha: float
    grad_norm: float
    displacement: float


@dataclass
class StageSummary:
    stage: int
    mu: float
    displacement: float


@dataclass
class OptimizerTrace:
    rows: list = field(default_factory=list)
    stages: list = field(default_factory=list)

    def to_csv(self, path, config_hash: str | None = None) -> None:
        with open(path, "w", newline="\n") as fh:
            if config_hash is not None:
                fh.write(f"# config_hash={config_hash}\n")
            fh.write("stage,mu,iter,f,rate,barrier,alpha,grad_norm,displacement\n")
            for r in self.rows:
                fh.write(f"{r.stage},{r.mu!r},{r.iteration},{r.f!r},{r.rate!r},"
                         f"{r.barrier!r},{r.alpha!r},{r.grad_norm!r},{r.displacement!r}\n")


def is_strictly_feasible(layout: AntennaLayout, region: MovingRegion) -> bool:
    """True when all antennas are strictly inside the region and spacing floor."""
    if np.any(np.abs(layout.x) >= region.sx / 2) or np.any(np.abs(layout.y) >= region.sy / 2):
        return False
    pos = layout.positions()
    if layout.n > 1:
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        iu = np.triu_indices(layout.n, k=1)
        if np.any(d2[iu] <= region.min_spacing ** 2):
            return False
    return True


def barrier_value(layout: AntennaLayout, region: MovingRegion) -> float:
    """Log-barrier of the feasible set; -inf sentinel outside its interior.

    Inside:  sum_{n<i} ln(|r_n - r_i|^2 - spacing^2)
           + sum_n [ln(sx^2/4 - x_n^2) + ln(sy^2/4 - y_n^2)].
    The sentinel is only ever compared against, never used in arithmetic.
    """
    if not is_strictly_feasible(layout, region):
        return -math.inf
    val = float(np.log(region.sx ** 2 / 4 - layout.x ** 2).sum()
                + np.log(region.sy ** 2 / 4 - layout.y ** 2).sum())
    if layout.n > 1:
        pos = layout.positions()
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        iu = np.triu_indices(layout.n, k=1)
        val += float(np.log(d2[iu] - region.min_spacing ** 2).sum())
    return val


def barrier_gradient(layout: AntennaLayout, region: MovingRegion):
    """Gradient of the log-barrier at a strictly feasible layout."""
    if not is_strictly_feasible(layout, region):
        raise InfeasiblePointError("optimizer.barrier_gradient: layout not strictly feasible")
    gx = -2.0 * layout.x / (region.sx ** 2 / 4 - layout.x ** 2)
    gy = -2.0 * layout.y / (region.sy ** 2 / 4 - layout.y ** 2)
    if layout.n > 1:
        pos = layout.positions()
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        denom = d2 - region.min_spacing ** 2
        np.fill_diagonal(denom, 1.0)
        gx += (2.0 * diff[:, :, 0] / denom).sum(axis=1)
        gy += (2.0 * diff[:, :, 1] / denom).sum(axis=1)
    return gx, gy


def _grid_shape(n: int) -> tuple[int, int]:
    """(rows_y, cols_x) with rows the largest divisor of n at most sqrt(n)."""
    rows = 1
    for d in range(1, int(math.isqrt(n)) + 1):
        if n % d == 0:
            rows = d
    return rows, n // rows


def _centered_grid(rows: int, cols: int, dx: float, dy: float) -> AntennaLayout:
    xs = (np.arange(cols) - (cols - 1) / 2) * dx
    ys = (np.arange(rows) - (rows - 1) / 2) * dy
    gx, gy = np.meshgrid(xs, ys)
    return AntennaLayout(gx.ravel(), gy.ravel())


def upa_dense_layout(n: int, wavelength: float) -> AntennaLayout:
    """Half-wavelength-spaced centered rectangular grid of n antennas."""
    rows, cols = _grid_shape(n)
    return _centered_grid(rows, cols, wavelength / 2, wavelength / 2)


def upa_sparse_layout(n: int, region: MovingRegion, shrink: float = 1.0) -> AntennaLayout:
    """Region-filling centered grid with spacing (sx/cols, sy/rows) * shrink.

    Raises InfeasiblePointError when the resulting grid touches or violates
    the spacing floor or the region boundary.
    """
    rows, cols = _grid_shape(n)
    layout = _centered_grid(rows, cols, region.sx / cols * shrink, region.sy / rows * shrink)
    if not is_strictly_feasible(layout, region):
        raise InfeasiblePointError(
            "optimizer.upa_sparse_layout: infeasible initialization "
            f"(grid {rows}x{cols}, shrink {shrink})")
    return layout


class McEngine:
    """Monte-Carlo surrogate; value() reuses the gradient's channel draws."""

    def __init__(self, csi: StatisticalCsi, pt: float, sigma2: float,
                 n_samples: int, seed: int, reseed_per_iteration: bool = False):
        self.csi = csi
        self.pt = pt
        self.sigma2 = sigma2
        self.n_samples = n_samples
        self.base_seed = seed
        self.reseed_per_iteration = reseed_per_iteration
        self._samples = McSampleSet(csi, seed)

    def reseed(self, stage: int, iteration: int) -> None:
        if self.reseed_per_iteration:
            seed = int(child_rng(self.base_seed, "mc-iter", stage, iteration)
                       .integers(0, 2 ** 63 - 1))
            self._samples = McSampleSet(self.csi, seed)

    def value_and_grad(self, layout: AntennaLayout) -> RateGradient:
        return mc_rate_gradient(layout, self.csi, self.pt, self.sigma2,
                                self.n_samples, self._samples.seed, samples=self._samples)

    def value(self, layout: AntennaLayout) -> float:
        return mc_rate(layout, self.csi, self.pt, self.sigma2, self.n_samples,
                       self._samples.seed, samples=self._samples)


class DeEngine:
    """Deterministic large-system surrogate (no randomness)."""

    def __init__(self, csi: StatisticalCsi, pt: float, sigma2: float):
        self.csi = csi
        self.pt = pt
        self.sigma2 = sigma2

    def reseed(self, stage: int, iteration: int) -> None:
        pass

    def value_and_grad(self, layout: AntennaLayout) -> RateGradient:
        return asymptotic_rate_gradient(layout, self.csi, self.pt, self.sigma2)

    def value(self, layout: AntennaLayout) -> float:
        return asymptotic_rate(layout, self.csi, self.pt, self.sigma2)


class PinnedSampleEngine:
    """Instantaneous-CSI surrogate: rate/gradient of one fixed channel draw."""

    def __init__(self, csi: StatisticalCsi, sample: ChannelSample, pt: float, sigma2: float):
        self.csi = csi
        self.sample = sample
        self.pt = pt
        self.sigma2 = sigma2

    def reseed(self, stage: int, iteration: int) -> None:
        pass

    def value_and_grad(self, layout: AntennaLayout) -> RateGradient:
        return sample_rate_gradient(layout, self.csi, self.sample, self.pt, self.sigma2)

    def value(self, layout: AntennaLayout) -> float:
        from .channel import steering_matrix

        h = steering_matrix(layout, self.csi).conj().T @ self.sample.psi
        return water_fill(gram_inverse_diag(h).c, self.pt, self.sigma2).rate


def build_engine(cfg: OptimizerConfig, csi: StatisticalCsi, pt: float, sigma2: float):
    if cfg.engine == "mc":
        return McEngine(csi, pt, sigma2, cfg.mc_samples, cfg.seed,
                        cfg.mc_reseed_per_iteration)
    return DeEngine(csi, pt, sigma2)


def optimize_positions(init: AntennaLayout, region: MovingRegion, csi: StatisticalCsi,
                       pt: float, sigma2: float, cfg: OptimizerConfig,
                       engine=None) -> tuple[AntennaLayout, OptimizerTrace]:
    """Run the penalized ascent from a strictly feasible initial layout.

    Returns the final layout and a full trace (one row per inner iteration).
    A backtracking failure (step below 1e-12 * alpha0) is recorded as a zero
    step and the iteration continues.
    """
    if not is_strictly_feasible(init, region):
        raise InfeasiblePointError("optimizer.optimize_positions: infeasible initial layout")
    if engine is None:
        engine = build_engine(cfg, csi, pt, sigma2)

    layout = AntennaLayout(init.x.copy(), init.y.copy())
    trace = OptimizerTrace()
    mu = cfg.mu0
    # With a per-stage-deterministic engine, a rejected (zero) step repeats
    # identically for the rest of the stage, so those rows can be emitted
    # without re-evaluating anything.
    stationary_prune = not getattr(engine, "reseed_per_iteration", False)
    for stage in range(cfg.max_stages):
        start = layout
        for it in range(cfg.inner_iters):
            engine.reseed(stage, it)
            rg = engine.value_and_grad(layout)
            bval = barrier_value(layout, region)
            f_old = rg.rate + mu * bval
            bgx, bgy = barrier_gradient(layout, region)
            dx = rg.grad_x + mu * bgx
            dy = rg.grad_y + mu * bgy
            dnorm = float(np.sqrt(dx @ dx + dy @ dy))
            if dnorm == 0.0:
                disp = float(np.linalg.norm(np.concatenate(
                    [layout.x - start.x, layout.y - start.y])))
                for rest in range(it, cfg.inner_iters if stationary_prune else it + 1):
                    trace.rows.append(TraceRow(stage, mu, rest, f_old, rg.rate, bval,
                                               0.0, 0.0, disp))
                if stationary_prune:
                    break
                continue
            gx, gy = dx / dnorm, dy / dnorm
            alpha = cfg.alpha0
            accepted = False
            while alpha >= ALPHA_UNDERFLOW * cfg.alpha0:
                cand = AntennaLayout(layout.x + alpha * gx, layout.y + alpha * gy)
                if is_strictly_feasible(cand, region):
                    cand_rate = engine.value(cand)
                    cand_barrier = barrier_value(cand, region)
                    f_new = cand_rate + mu * cand_barrier
                    if f_new >= f_old + cfg.eta * alpha * dnorm:
                        accepted = True
                        break
                alpha *= 0.5
            if accepted:
                layout = cand
                row = (f_new, cand_rate, cand_barrier, alpha)
            else:
                row = (f_old, rg.rate, bval, 0.0)
            disp = float(np.linalg.norm(np.concatenate(
                [layout.x - start.x, layout.y - start.y])))
            trace.rows.append(TraceRow(stage, mu, it, row[0], row[1], row[2],
                                       row[3], dnorm, disp))
            if not accepted and stationary_prune:
                for rest in range(it + 1, cfg.inner_iters):
                    trace.rows.append(TraceRow(stage, mu, rest, row[0], row[1],
                                               row[2], 0.0, dnorm, disp))
                break
        displacement = float(np.linalg.norm(np.concatenate(
            [layout.x - start.x, layout.y - start.y])))
        trace.stages.append(StageSummary(stage, mu, displacement))
        mu *= cfg.rho
        if displacement < cfg.eps_r:
            break
    return layout, trace
