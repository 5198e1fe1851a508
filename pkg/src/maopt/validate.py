"""Self-contained validation suites with independent oracles.

Each suite draws its own randomized instances, checks the implementation
against an oracle that does not share code with the path under test (brute
force enumeration, central finite differences, explicit phasor sums, literal
defining equations), and returns a ValidationResult.  The CLI's validate
command runs a quick or full selection and reports a pass/fail table; the
acceptance test suite calls the same functions with its own parameters.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .asymptotic import asymptotic_c, asymptotic_rate_gradient, newton_epsilon
from .channel import (AntennaLayout, ChannelSample, MovingRegion, StatisticalCsi,
                      build_receive_side_spec, channel_from_gains, phasor_sum_sample,
                      sample_path_gains)
from .montecarlo import mc_rate_gradient, sample_rate_gradient
from .optimizer import OptimizerConfig, optimize_positions, upa_sparse_layout
from .precoding import gram_inverse_diag, rate_from_c, water_fill
from .rng import child_rng


@dataclass
class ValidationResult:
    name: str
    passed: bool
    detail: str
    runtime: float


def random_csi(rng: np.random.Generator, n_users: int, paths_per_user: int,
               wavelength: float = 1.0, power_span: tuple = (0.2, 1.5)) -> StatisticalCsi:
    """Random well-spread CSI used across the randomized suites."""
    total = n_users * paths_per_user
    az = rng.uniform(0, 2 * np.pi, total)
    el = rng.uniform(-np.pi / 2, np.pi / 2, total)
    k0 = 2 * np.pi / wavelength
    wv = k0 * np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az)], axis=1)
    power = np.zeros((total, n_users))
    ranges = []
    for k in range(n_users):
        a = k * paths_per_user
        power[a:a + paths_per_user, k] = rng.uniform(*power_span, paths_per_user)
        ranges.append((a, a + paths_per_user))
    return StatisticalCsi(wavelength, wv, power, ranges,
                          los_index=[a for a, _ in ranges])


def random_layout(rng: np.random.Generator, n: int, half_span: float) -> AntennaLayout:
    return AntennaLayout(rng.uniform(-half_span, half_span, n),
                         rng.uniform(-half_span, half_span, n))


def water_fill_oracle(c: np.ndarray, pt: float, sigma2: float):
    """Brute-force active-set enumeration (K <= ~12); returns (p, nu, active)."""
    K = c.size
    floor = sigma2 * c
    for bits in range(1, 2 ** K):
        members = np.array([(bits >> k) & 1 for k in range(K)], dtype=bool)
        nu = (pt + floor[members].sum()) / members.sum()
        if np.all(nu > floor[members]) and np.all(nu <= floor[~members]):
            p = np.where(members, nu / c - sigma2, 0.0)
            return p, nu, members
    raise AssertionError("enumeration found no KKT-consistent active set")


def water_filling_kkt_suite(n_instances: int = 1000, k_max: int = 16, seed: int = 2024,
                            water_fill_fn=water_fill) -> ValidationResult:
    """Budget, complementary slackness, and oracle agreement on random draws."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst_budget = 0.0
    failures = []
    for i in range(n_instances):
        K = int(rng.integers(1, k_max + 1))
        c = 10.0 ** rng.uniform(-2, 2, K)
        pt = 10.0 ** rng.uniform(-1, 2)
        sigma2 = 10.0 ** rng.uniform(-2, 1)
        wf = water_fill_fn(c, pt, sigma2)
        budget = abs(float(c @ wf.p) - pt) / pt
        worst_budget = max(worst_budget, budget)
        if budget > 1e-9:
            failures.append(f"instance {i}: budget rel err {budget:.2e}")
        active = np.array([k in wf.active for k in range(K)])
        if not np.array_equal(active, wf.p > 0):
            failures.append(f"instance {i}: active set inconsistent with p")
        if np.any(active != (wf.nu > sigma2 * c)):
            failures.append(f"instance {i}: slackness p_k>0 <=> nu > sigma2 c_k violated")
        if np.any(np.abs(wf.p[active] - (wf.nu / c[active] - sigma2)) > 1e-9 * wf.nu):
            failures.append(f"instance {i}: active powers differ from nu/c - sigma2")
        if K <= 8:
            p_ref, nu_ref, members = water_fill_oracle(c, pt, sigma2)
            if not np.array_equal(members, active) or \
               np.max(np.abs(p_ref - wf.p)) > 1e-8 * (1 + np.max(p_ref)):
                failures.append(f"instance {i}: enumeration oracle mismatch")
        if failures:
            break
    detail = failures[0] if failures else f"worst budget rel err {worst_budget:.2e}"
    return ValidationResult("water-filling KKT", not failures, detail, time.time() - t0)


def rate_derivative_suite(n_instances: int = 200, seed: int = 77) -> ValidationResult:
    """dR/dc_k = -p_k/(nu ln 2) against central finite differences."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    while checked < n_instances:
        K = int(rng.integers(1, 9))
        c = 10.0 ** rng.uniform(-1, 1, K)
        pt = 10.0 ** rng.uniform(0, 2)
        sigma2 = 10.0 ** rng.uniform(-2, 0)
        wf = water_fill(c, pt, sigma2)
        if np.any(np.abs(wf.nu - sigma2 * c) < 1e-6 * wf.nu):
            continue            # active-set boundary: one-sided kink region
        k = int(rng.integers(K))
        analytic = -wf.p[k] / (wf.nu * np.log(2))
        step = 1e-7 * c[k]
        cp, cm = c.copy(), c.copy()
        cp[k] += step
        cm[k] -= step
        fd = (rate_from_c(cp, pt, sigma2) - rate_from_c(cm, pt, sigma2)) / (2 * step)
        err = abs(analytic - fd) / max(abs(fd), 1e-12)
        if wf.p[k] == 0.0:
            err = abs(analytic - fd)        # both should vanish
        worst = max(worst, err)
        checked += 1
    return ValidationResult("rate derivative dR/dc", worst < 1e-5,
                            f"worst rel err {worst:.2e} over {checked}", time.time() - t0)


def _fd_layout_gradient(fun, layout: AntennaLayout, step: float):
    gx = np.zeros(layout.n)
    gy = np.zeros(layout.n)
    for n in range(layout.n):
        for arr, out in ((layout.x, gx), (layout.y, gy)):
            orig = arr[n]
            arr[n] = orig + step
            fp = fun(layout)
            arr[n] = orig - step
            fm = fun(layout)
            arr[n] = orig
            out[n] = (fp - fm) / (2 * step)
    return gx, gy


def _reldiff(a: np.ndarray, b: np.ndarray) -> float:
    bmax = float(np.abs(b).max())
    if bmax < 1e-10:                     # both sides should vanish
        return float(np.abs(a).max())
    # entries far below the dominant one sit at the FD noise floor; compare
    # them against that floor instead of their own magnitude
    scale = np.maximum(np.abs(b), 1e-7 * bmax)
    return float(np.max(np.abs(a - b) / scale))


def mc_gradient_suite(n_instances: int = 50, seed: int = 5150,
                      wavelength: float = 1.0) -> ValidationResult:
    """Per-draw analytic position gradient against finite differences."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    while checked < n_instances:
        K = int(rng.integers(1, 5))
        N = int(rng.integers(K, 9))
        lk = int(rng.integers(1, max(2, 12 // K + 1)))
        csi = random_csi(rng, K, lk, wavelength)
        layout = random_layout(rng, N, 2 * wavelength)
        sample = sample_path_gains(csi, rng)
        pt = 10.0 ** rng.uniform(0, 1.5)
        sigma2 = 1.0
        try:
            h = channel_from_gains(layout, csi, ChannelSample(psi=sample.psi)).h
            gd = gram_inverse_diag(h)
        except Exception:
            continue
        wf = water_fill(gd.c, pt, sigma2)
        if np.any(np.abs(wf.nu - sigma2 * gd.c) < 1e-6 * wf.nu):
            continue
        rg = sample_rate_gradient(layout, csi, sample, pt, sigma2)

        def rate_at(lay):
            hh = channel_from_gains(lay, csi, ChannelSample(psi=sample.psi)).h
            return water_fill(gram_inverse_diag(hh).c, pt, sigma2).rate

        fx, fy = _fd_layout_gradient(rate_at, layout, 1e-6 * wavelength)
        worst = max(worst, _reldiff(rg.grad_x, fx), _reldiff(rg.grad_y, fy))
        checked += 1
    return ValidationResult("MC gradient vs FD", worst < 1e-4,
                            f"worst per-coordinate rel err {worst:.2e} over {checked}",
                            time.time() - t0)


def de_fixed_point_suite(n_instances: int = 100, seed: int = 99) -> ValidationResult:
    """Newton residuals, diagonal identity, and the two analytic cases."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    failures = []
    # analytic: K=1 and G = g I
    n, gscale = 7, 0.83
    a = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    g1 = a @ a.conj().T
    if abs(newton_epsilon(np.array([g1]), 0)[0] - 1 / np.trace(g1).real) > 1e-9:
        failures.append("K=1 analytic case")
    gi = np.array([gscale * np.eye(n), gscale * np.eye(n)], dtype=complex)
    expect = 1 / (gscale * (n - 1))
    if np.max(np.abs(asymptotic_c(gi).epsilon - expect)) > 1e-9:
        failures.append("G = g*I analytic case")
    worst_res, worst_diag, worst_iters = 0.0, 0.0, 0
    for i in range(n_instances):
        K = int(rng.integers(1, 5))
        N = int(rng.integers(K, 9))
        csi = random_csi(rng, K, int(rng.integers(2, 7)))
        layout = random_layout(rng, N, 1.5)
        sol = asymptotic_c((layout, csi))
        worst_iters = max(worst_iters, int(sol.newton_iters.max()))
        worst_res = max(worst_res, float(sol.residuals.max()))
        # literal defining equations, independent of the solver's algebra
        from .channel import channel_covariance
        gm = [channel_covariance(layout, csi, k) for k in range(K)]
        for k in range(K):
            y = np.eye(N) + sum(sol.epsilon[k, j] * gm[j] for j in range(K) if j != k)
            yi = np.linalg.inv(y)
            for l in range(K):
                res = abs(sol.epsilon[k, l] * np.trace(gm[l] @ yi).real - 1.0)
                worst_res = max(worst_res, res)
            worst_diag = max(worst_diag, abs(sol.epsilon[k, k] - sol.c_inf[k]) / sol.c_inf[k])
    if worst_res >= 1e-3:
        failures.append(f"defining-equation residual {worst_res:.2e}")
    if worst_diag >= 1e-6:
        failures.append(f"diagonal identity err {worst_diag:.2e}")
    detail = "; ".join(failures) if failures else (
        f"max residual {worst_res:.2e}, max diag err {worst_diag:.2e}, "
        f"max iters {worst_iters}")
    return ValidationResult("DE fixed point", not failures, detail, time.time() - t0)


def de_gradient_suite(n_instances: int = 20, seed: int = 31,
                      wavelength: float = 1.0) -> ValidationResult:
    """Analytic asymptotic gradient against FD of the re-solved fixed point."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        K = int(rng.integers(2, 5))      # K = 1 has an exactly zero gradient
        N = int(rng.integers(K, 9))
        csi = random_csi(rng, K, int(rng.integers(2, 7)), wavelength)
        layout = random_layout(rng, N, 1.5 * wavelength)
        pt, sigma2 = 10.0 ** rng.uniform(0, 1.5), 1.0
        sol = asymptotic_c((layout, csi), tol=1e-11)
        wf = water_fill(sol.c_inf, pt, sigma2)
        if np.any(np.abs(wf.nu - sigma2 * sol.c_inf) < 1e-6 * wf.nu):
            continue
        rg = asymptotic_rate_gradient(layout, csi, pt, sigma2, tol=1e-11)

        def rate_at(lay):
            s = asymptotic_c((lay, csi), tol=1e-11)
            return water_fill(s.c_inf, pt, sigma2).rate

        fx, fy = _fd_layout_gradient(rate_at, layout, 1e-5 * wavelength)
        worst = max(worst, _reldiff(rg.grad_x, fx), _reldiff(rg.grad_y, fy))
    return ValidationResult("DE gradient vs FD", worst < 1e-3,
                            f"worst rel err {worst:.2e}", time.time() - t0)


def cross_engine_suite(seed: int = 404, paths_per_user: int = 100,
                       mc_samples: int = 2000) -> ValidationResult:
    """Direction agreement of the two engines deep in the many-path regime."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    csi = random_csi(rng, 4, paths_per_user, power_span=(0.5, 1.5))
    layout = random_layout(rng, 8, 1.5)
    pt, sigma2 = 20.0, 1.0
    de = asymptotic_rate_gradient(layout, csi, pt, sigma2)
    mc = mc_rate_gradient(layout, csi, pt, sigma2, mc_samples, seed=int(rng.integers(2 ** 32)))
    a = np.concatenate([de.grad_x, de.grad_y])
    b = np.concatenate([mc.grad_x, mc.grad_y])
    cosine = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    gap = abs(de.rate - mc.rate) / mc.rate
    return ValidationResult("MC/DE cross engine", cosine > 0.95 and gap < 0.03,
                            f"cosine {cosine:.4f}, rate gap {gap:.2%}", time.time() - t0)


def clt_oracle_suite(rx_paths: int = 64, n_draws: int = 10_000, n_sites: int = 25,
                     seed: int = 55) -> ValidationResult:
    """Explicit phasor-sum statistics against the Gaussian model's moments.

    Variance and pseudo-variance are per-site statistics.  The cross-path
    covariance of a single fixed scatter matrix is itself a random phasor sum
    of magnitude ~ 1/sqrt(rx_paths); what the Gaussian model neglects is the
    site-expected covariance, so the draws are pooled over `n_sites`
    independently drawn scatter matrices before averaging.
    """
    t0 = time.time()
    rng = np.random.default_rng(seed)
    csi = random_csi(rng, 2, 4)
    k = 0
    b = csi.power[csi.block(k), k]
    per_site = max(n_draws // n_sites, 1)
    var_acc = np.zeros_like(b)
    pseudo_acc = np.zeros(b.size, dtype=complex)
    cross_acc = 0.0 + 0.0j
    total = 0
    for site in range(n_sites):
        spec = build_receive_side_spec(csi, rx_paths, child_rng(seed, "clt-site", site))
        draws = np.stack([phasor_sum_sample(spec, csi, k, child_rng(seed, "clt", site, i))
                          for i in range(per_site)])
        var_acc += (np.abs(draws) ** 2).sum(axis=0)
        pseudo_acc += (draws ** 2).sum(axis=0)
        cross_acc += (draws[:, 0].conj() * draws[:, 1]).sum()
        total += per_site
    var = var_acc / total
    pseudo = np.abs(pseudo_acc) / total
    cross = abs(cross_acc) / total
    cross_scale = np.sqrt(b[0] * b[1])
    failures = []
    if np.any(np.abs(var - b) > 0.10 * b):
        failures.append(f"variance off by {np.max(np.abs(var - b) / b):.2%}")
    if np.any(pseudo > 0.05 * b):
        failures.append(f"pseudo-variance {np.max(pseudo / b):.3f} of scale")
    if cross > 0.05 * cross_scale:
        failures.append(f"cross-path correlation {cross / cross_scale:.3f} of scale")
    detail = "; ".join(failures) if failures else (
        f"var err {np.max(np.abs(var - b) / b):.2%}, pseudo {np.max(pseudo / b):.3f}, "
        f"cross {cross / cross_scale:.3f}")
    return ValidationResult("CLT phasor oracle", not failures, detail, time.time() - t0)


def optimizer_behavior_suite(n_runs: int = 10, seed: int = 808,
                             eps_r_factor: float = 1e-7) -> ValidationResult:
    """Feasible iterates, per-stage monotonicity, vanishing penalty, improvement."""
    t0 = time.time()
    lam = 1.0
    region = MovingRegion(4 * lam, 4 * lam, lam / 2)
    failures = []
    for run in range(n_runs):
        rng = np.random.default_rng(seed + run)
        csi = random_csi(rng, 2, 6, lam)
        init = upa_sparse_layout(4, region)
        cfg = OptimizerConfig.defaults(lam, engine="de", seed=seed + run,
                                       eps_r=eps_r_factor * lam)
        final, trace = optimize_positions(init, region, csi, 10.0, 1.0, cfg)
        if not all(np.isfinite(r.barrier) for r in trace.rows):
            failures.append(f"run {run}: infeasible iterate in trace")
        for stg, rows in itertools.groupby(trace.rows, key=lambda r: r.stage):
            fs = [r.f for r in rows]
            if any(fs[i + 1] < fs[i] - 1e-12 for i in range(len(fs) - 1)):
                failures.append(f"run {run}: f decreased within stage {stg}")
        last = trace.rows[-1]
        if abs(last.mu * last.barrier) >= 1e-6 * abs(last.rate):
            failures.append(f"run {run}: final mu*barrier {last.mu * last.barrier:.2e} "
                            f"not negligible vs rate {last.rate:.3f}")
        if trace.rows[-1].rate < trace.rows[0].rate:
            failures.append(f"run {run}: final rate below initial")
        if failures:
            break
    detail = failures[0] if failures else f"{n_runs} runs clean"
    return ValidationResult("optimizer behavior", not failures, detail, time.time() - t0)


def prop_consistency_suite(paths_small: int = 10, paths_large: int = 100,
                           n_draws: int = 200, seed: int = 1234) -> ValidationResult:
    """Concentration of c on its asymptotic value as paths per user grow."""
    t0 = time.time()
    rng = np.random.default_rng(seed)
    layout = random_layout(rng, 8, 1.5)
    devs = {}
    for lk in (paths_small, paths_large):
        csi = random_csi(rng, 4, lk, power_span=(0.5, 1.5))
        # keep per-user total power comparable across path counts
        csi.power *= paths_large / lk / paths_large
        sol = asymptotic_c((layout, csi))
        cs = []
        for m in range(n_draws):
            sample = sample_path_gains(csi, child_rng(seed, "prop", lk, m))
            h = channel_from_gains(layout, csi, sample).h
            cs.append(gram_inverse_diag(h).c)
        mean_c = np.mean(cs, axis=0)
        devs[lk] = np.abs(mean_c - sol.c_inf) / sol.c_inf
    ok_large = bool(np.all(devs[paths_large] < 0.05))
    ok_mono = bool(np.median(devs[paths_large]) < np.median(devs[paths_small]))
    detail = (f"max dev at L={paths_large}: {devs[paths_large].max():.2%}; medians "
              f"{np.median(devs[paths_small]):.3f} -> {np.median(devs[paths_large]):.3f}")
    return ValidationResult("asymptotic consistency", ok_large and ok_mono, detail,
                            time.time() - t0)


def run_suites(level: str = "quick") -> list[ValidationResult]:
    """Validation selection; 'quick' trims instance counts, 'full' runs all."""
    if level == "quick":
        suites = [
            lambda: water_filling_kkt_suite(n_instances=300),
            lambda: rate_derivative_suite(n_instances=60),
            lambda: mc_gradient_suite(n_instances=10),
            lambda: de_fixed_point_suite(n_instances=20),
            lambda: de_gradient_suite(n_instances=5),
            lambda: clt_oracle_suite(n_draws=4000),
            lambda: optimizer_behavior_suite(n_runs=2),
        ]
    elif level == "full":
        suites = [
            water_filling_kkt_suite,
            rate_derivative_suite,
            mc_gradient_suite,
            de_fixed_point_suite,
            de_gradient_suite,
            cross_engine_suite,
            clt_oracle_suite,
            optimizer_behavior_suite,
            prop_consistency_suite,
        ]
    else:
        raise ValueError("level must be 'quick' or 'full'")
    return [s() for s in suites]
