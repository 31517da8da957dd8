"""Acceptance checks, one test per criterion.

Each test prints a single ``[PASS]`` or ``[FAIL]`` line with the measured
quantities, then asserts.  Run directly with ``python tests/test_acceptance.py``
or through pytest.
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from conftest import off_breakpoints, random_catalog
from nilmbound import data
from nilmbound.bounds import (
    AffineBias,
    bound_biased,
    bound_biased_simplified,
    bound_gradient,
    bound_unbiased,
    trace_objective,
)
from nilmbound.correlation import (
    QuadratureSpec,
    SamplingGrid,
    r_continuous,
    r_continuous_partial,
    r_discrete,
    r_discrete_partial,
)
from nilmbound.noise import NoiseKind, NoiseModel
from nilmbound.scheduler import AscentConfig, FeasibleSet, ScheduleProblem, grid_search, optimize, project, sweep_2d
from nilmbound.signatures import DoublePulse, RaisedCosinePulse, SignatureCatalog, SmoothTrapezoid
from nilmbound.simulate import monte_carlo

EPS = np.finfo(float).eps


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, text):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")
        assert ok, text

    return emit


def _stencil(f, x, i, h):
    e = np.zeros_like(x)
    e[i] = h
    return (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)


def _compare(analytic, reference, noise):
    """Largest relative error over entries above the differencing noise floor.

    Entries whose reference value is below ``noise`` are true zeros blurred by
    rounding; for those both values must stay below the floor instead.
    """
    analytic, reference = np.asarray(analytic), np.asarray(reference)
    big = np.abs(reference) > noise
    rel = float(np.max(np.abs(analytic - reference)[big] / np.abs(reference[big]), initial=0.0))
    small_ok = bool(np.all(np.abs(analytic[~big]) <= noise))
    return rel, small_ok


def test_fisher_information(verdict):
    start = time.perf_counter()
    exact = NoiseModel.gaussian(0.1).fisher_information()
    worst = 0.0
    for model in (NoiseModel.gaussian(0.1), NoiseModel.gaussian(1.7), NoiseModel.laplace(0.1), NoiseModel.laplace(0.6)):
        h = 1e-6 * model.scale

        def integrand(w, model=model, h=h):
            dp = (model.pdf(w + h) - model.pdf(w - h)) / (2 * h)
            return dp * dp / model.pdf(w)

        lim = (20 if model.kind is NoiseKind.GAUSSIAN else 60) * model.scale
        pts = [0.0] if model.kind is NoiseKind.LAPLACE else None
        val, _ = integrate.quad(integrand, -lim, lim, points=pts, limit=400, epsabs=0, epsrel=1e-10)
        worst = max(worst, abs(val / model.fisher_information() - 1))
    elapsed = time.perf_counter() - start
    ok = exact == 100.0 and worst <= 1e-6 and elapsed < 1.0
    verdict(1, ok, f"I^w(sigma=0.1) = {exact!r}; quadrature oracle max rel err {worst:.2e} (<= 1e-6); {elapsed:.2f}s (< 1s)")


def test_gram_psd_property_suite(verdict):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst_sym = worst_eig = worst_entry = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        cat = random_catalog(rng, n)
        if rng.random() < 0.2:
            cat = SignatureCatalog(cat.labels, cat.signatures[:-1] + (DoublePulse(1.0, 0.7, rng.uniform(0, 1)),))
        tau = rng.uniform(0, 7, n)
        k = int(rng.integers(3, 80))
        grid = SamplingGrid.linspace(0, 10, k) if rng.random() < 0.5 else SamplingGrid(np.sort(rng.uniform(0, 10, k)))
        r = r_discrete(cat, tau, grid)
        scale = max(r.norm, 1e-300)
        entry = np.array(
            [
                [np.sum(cat[i].eval(grid.times - tau[i], 1) * cat[j].eval(grid.times - tau[j], 1)) for j in range(n)]
                for i in range(n)
            ]
        )
        worst_sym = max(worst_sym, float(np.max(np.abs(r.matrix - r.matrix.T))) / max(scale, 1.0))
        worst_eig = max(worst_eig, -r.smallest_eigenvalue / scale)
        worst_entry = max(worst_entry, float(np.max(np.abs(entry - r.matrix))) / max(scale, 1.0))
    elapsed = time.perf_counter() - start
    ok = worst_sym <= 1e-12 and worst_eig <= 1e-10 and worst_entry <= 1e-12 and elapsed < 30
    verdict(
        2,
        ok,
        f"1000 draws: asymmetry {worst_sym:.1e}, min eig/||R|| {-worst_eig:.1e} (>= -1e-10), "
        f"entry vs M^T M {worst_entry:.1e}; {elapsed:.1f}s (< 30s)",
    )


def test_gradient_oracle(verdict):
    demo = data.demo_scenario()
    cat, grid = demo.catalog, demo.grid
    quad = QuadratureSpec(tolerance=1e-13)
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = {"gradient": 0.0, "discrete partial": 0.0, "continuous partial": 0.0}
    zeros_ok, count = True, 0
    while count < 100:
        tau = rng.uniform(0, 8, 3)
        if not off_breakpoints(cat, tau, grid, 1e-3) or r_discrete(cat, tau, grid).condition_estimate > 1e6:
            continue
        count += 1
        h = 1e-5
        obj = trace_objective(cat, tau, demo.weights, grid)
        fd = np.array([_stencil(lambda x: trace_objective(cat, x, demo.weights, grid), tau, i, h) for i in range(3)])
        rel, small = _compare(bound_gradient(cat, tau, grid, demo.weights), fd, 100 * EPS * obj / h)
        worst["gradient"] = max(worst["gradient"], rel)
        zeros_ok &= small
        rd = r_discrete(cat, tau, grid)
        rc = r_continuous(cat, tau, quad)
        for i in range(3):
            fd = _stencil(lambda x: r_discrete(cat, x, grid).matrix, tau, i, h)
            rel, small = _compare(r_discrete_partial(cat, tau, grid, i), fd, 100 * EPS * rd.norm / h)
            worst["discrete partial"] = max(worst["discrete partial"], rel)
            zeros_ok &= small
            hc = 1e-4
            fd = _stencil(lambda x: r_continuous(cat, x, quad).matrix, tau, i, hc)
            rel, small = _compare(r_continuous_partial(cat, tau, quad, i), fd, 100 * quad.tolerance * rc.norm / hc)
            worst["continuous partial"] = max(worst["continuous partial"], rel)
            zeros_ok &= small
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-5 and zeros_ok and elapsed < 60
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(3, ok, f"100 schedules, max componentwise rel err: {detail} (<= 1e-5); {elapsed:.1f}s (< 60s)")


def test_riemann_convergence_and_surfaces(verdict):
    demo = data.demo_scenario()
    start = time.perf_counter()
    rc = r_continuous(demo.catalog, demo.tau).matrix
    errs = []
    for k in (21, 42, 84, 168):
        g = SamplingGrid.linspace(0, 10, k)
        errs.append(float(np.linalg.norm(g.spacing * r_discrete(demo.catalog, demo.tau, g).matrix - rc) / np.linalg.norm(rc)))
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))

    axis = np.linspace(0, 8, 80)
    stats = {}
    for k in (168, 21):
        problem = replace(demo, grid=SamplingGrid.linspace(0, 10, k)).problem()
        d = sweep_2d(problem, 0, 1, [0, 0, 0], axis, axis)
        c = sweep_2d(problem, 0, 1, [0, 0, 0], axis, axis, flavor="continuous")
        keep = ~(d.capped | c.capped)
        rel = np.abs(d.values - c.values)[keep] / c.values[keep]
        stats[k] = (float(rel.max()), float(np.mean(rel <= 0.05)))
    elapsed = time.perf_counter() - start
    ok = decreasing and errs[-1] < 0.01 and stats[168][0] <= 0.05 and elapsed < 120
    verdict(
        4,
        ok,
        "||dR_d - R_c||_F/||R_c|| for k=21,42,84,168: "
        + ", ".join(f"{e:.2e}" for e in errs)
        + f"; 80x80 surfaces at k=168 max rel diff {stats[168][0]:.2%}"
        + f" (info: at k=21 max {stats[21][0]:.3g}, {stats[21][1]:.0%} of cells within 5%); {elapsed:.1f}s (< 120s)",
    )


def test_singular_privacy_peaks(verdict):
    twins = data.interchangeable_scenario()
    start = time.perf_counter()
    coincident = twins.problem().bound([4.0, 4.0, 2.2])
    axis = np.linspace(0, 8, 80)
    sweep = sweep_2d(twins.problem(), 0, 1, [0.0, 0.0, 0.0], axis, axis)
    capped = int(sweep.capped.sum())
    elapsed = time.perf_counter() - start
    ok = coincident.value == math.inf and coincident.singular and capped >= 2 and elapsed < 120
    verdict(
        5,
        ok,
        f"identical loads at equal start: bound {coincident.value} (singular={coincident.singular}); "
        f"80x80 sweep with tau3=0 has {capped} capped cells (>= 2); {elapsed:.1f}s (< 120s)",
    )


def test_monte_carlo_crb(verdict):
    demo = data.demo_scenario()
    start = time.perf_counter()
    report, bound = monte_carlo(demo.catalog, demo.tau, demo.grid, demo.noise, demo.weights, 500, 1, demo.feasible)
    floor = bound.value - 3 * report.mse_standard_error
    low_noise = NoiseModel.gaussian(0.01)
    report2, bound2 = monte_carlo(demo.catalog, demo.tau, demo.grid, low_noise, demo.weights, 500, 1, demo.feasible)
    ratio = report2.mse / bound2.value
    elapsed = time.perf_counter() - start
    ok = report.mse >= floor and 1 / 3 <= ratio <= 3 and elapsed < 600
    verdict(
        6,
        ok,
        f"sigma=0.1: MSE {report.mse:.4g} +/- {report.mse_standard_error:.2g} vs bound {bound.value:.4g}; "
        f"sigma=0.01: MSE/bound {ratio:.3f} (within x3); 2x500 trials single-threaded {elapsed:.0f}s (< 600s)",
    )


def test_scheduler_correctness(verdict):
    demo = data.demo_scenario()
    twins = data.interchangeable_scenario()
    start = time.perf_counter()
    sol = optimize(demo.problem(), AscentConfig(starts=20, seed=0))
    monotone = all(all(b >= a for a, b in zip(r.trace, r.trace[1:])) for r in sol.starts)
    feasible = all(np.array_equal(project(x, demo.feasible), x) for r in sol.starts for x in r.iterates)

    ratios = []
    plateau, pulse = SmoothTrapezoid(0.7, 0.6, 1.0, 2.0), RaisedCosinePulse(1.0, 2.0)
    for sigs, k, res in (((plateau,), 21, 800), ((plateau, pulse), 101, 120)):
        cat = SignatureCatalog(tuple(f"s{i}" for i in range(len(sigs))), sigs)
        problem = ScheduleProblem(cat, FeasibleSet.for_catalog(cat, 0.0, 8.0, 10.0), SamplingGrid.linspace(0, 10, k))
        _, oracle = grid_search(problem, res)
        ratios.append(optimize(problem, AscentConfig(starts=20)).objective / oracle)

    twin_sol = optimize(twins.problem(), AscentConfig(starts=20, seed=0))
    singular = sum(r.termination == "singular-optimum" for r in twin_sol.starts)
    elapsed = time.perf_counter() - start
    ok = monotone and feasible and min(ratios) >= 1 - 1e-3 and singular >= 1 and elapsed < 180
    verdict(
        7,
        ok,
        f"(a) monotone traces {monotone}; (b) feasible iterates {feasible}; "
        f"(c) best/oracle n=1 {ratios[0]:.5f}, n=2 {ratios[1]:.5f} (>= 0.999); "
        f"(d) {singular}/20 starts reach a singular optimum; {elapsed:.1f}s (< 180s)",
    )


def test_biased_bound_relations(verdict):
    demo = data.demo_scenario()
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    worst_reduction, violations = 0.0, 0
    for draw in range(1000):
        tau = rng.uniform(0, 8, 3)
        r = r_discrete(demo.catalog, tau, demo.grid)
        w = rng.uniform(0.2, 3.0, 3)
        if draw < 100 and r.condition_estimate < 1e8:
            unbiased = bound_unbiased(r, w, 100.0).value
            first = bound_biased(r, w, 100.0, AffineBias.identity(3), tau, "centered").value
            worst_reduction = max(worst_reduction, abs(first / unbiased - 1))
        bias = AffineBias(rng.normal(size=(3, 3)), rng.normal(size=3))
        term = "as_stated" if draw % 2 else "centered"
        full = bound_biased(r, w, 100.0, bias, tau, term).value
        simple = bound_biased_simplified(r, w, 100.0, bias, tau, term)[0].value
        violations += not (simple <= full * (1 + 1e-10) + 1e-15)
    _, c1, _ = bound_biased_simplified(r, None, 100.0, AffineBias(np.zeros((3, 3)), np.zeros(3)), tau)
    elapsed = time.perf_counter() - start
    ok = worst_reduction <= 1e-10 and violations == 0 and c1 == 0.0 and elapsed < 30
    verdict(
        8,
        ok,
        f"mu=tau first term vs unbiased max rel diff {worst_reduction:.1e} (<= 1e-10); "
        f"Cor1 > Thm2 in {violations}/1000 draws; A=0 gives c1={c1}; {elapsed:.1f}s (< 30s)",
    )


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
