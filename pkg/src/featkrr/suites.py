"""Registered verification suites.

Each suite checks one family of claims about the objective at desk scale and
returns self-contained ResultRecords: every record carries the quantities it
compared and the tolerance it used, so a pass/fail verdict can be recomputed
offline from the JSONL emission alone.

Randomness is derived per (suite, case) from the top-level seed; rerunning a
suite with the same seed reproduces every record bit for bit. Scale overrides
(n, runs, draws, fixtures) exist so the determinism contract can be exercised
quickly; the defaults are the pinned desk-scale parameters.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec, gram, psi_prime
from .optimizer import STATIONARY_CERTIFIED, OptimizerConfig, optimize
from .proxy import cnd_quadrature_oracle, decomposition_gap, proxy_anova
from .ridge import SampleSet, krr_fit, objective_value
from .scenarios import (
    EffectTerm,
    ScenarioSpec,
    generate,
    grouped_conditional_mean,
    support_metrics,
)
from .variation import (
    coordinate_decomposition,
    directional_derivative,
    directional_derivative_se,
    finite_difference_check,
    noise_descent_direction,
    onesided_coefficient_se,
    reconstruct_from_report,
)

_SUITE_IDS = {
    "identities": 1,
    "first-variation": 2,
    "laplace-vs-gaussian": 3,
    "cnd-oracle": 4,
    "proxy-decomposition": 5,
    "noise-elimination": 6,
    "main-effect-recovery": 7,
    "interaction-activation": 8,
    "escape": 9,
}


@dataclass(frozen=True)
class ResultRecord:
    suite: str
    case: str
    quantities: dict[str, float]
    passed: bool
    tolerance: float
    seed: int
    runtime_ms: int = 0

    def to_json_dict(self) -> dict:
        return {
            "suite": self.suite,
            "case": self.case,
            "passed": bool(self.passed),
            "tolerance": float(self.tolerance),
            "seed": int(self.seed),
            "runtime_ms": int(self.runtime_ms),
            "quantities": {k: float(v) for k, v in sorted(self.quantities.items())},
        }


def _case_rng(seed: int, suite: str, case: int) -> np.random.Generator:
    return np.random.default_rng([seed, _SUITE_IDS[suite], case])


def _case_seed(seed: int, suite: str, case: int) -> int:
    return int(_case_rng(seed, suite, case).integers(2**31))


class _Recorder:
    def __init__(self, suite: str, seed: int):
        self.suite = suite
        self.seed = seed
        self.records: list[ResultRecord] = []
        self._t0 = time.monotonic()

    def add(self, case: str, passed: bool, tolerance: float, **quantities):
        now = time.monotonic()
        self.records.append(
            ResultRecord(
                suite=self.suite,
                case=case,
                quantities=quantities,
                passed=bool(passed),
                tolerance=float(tolerance),
                seed=self.seed,
                runtime_ms=int((now - self._t0) * 1000),
            )
        )
        self._t0 = now


# ---------------------------------------------------------------------------
# 1. exact-on-empirical identities


def suite_identities(seed: int = 0, fixtures: int = 20, **_) -> list[ResultRecord]:
    rec = _Recorder("identities", seed)
    tol = 1e-8
    for i in range(fixtures):
        rng = _case_rng(seed, "identities", i)
        n = int(rng.integers(2, 65))
        d = int(rng.integers(1, 9))
        X = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        beta = rng.normal(size=d)
        if i % 4 == 2:
            spec = KernelSpec.l1_mixture([(0.7, 0.5), (2.0, 0.5)])
        elif i % 4 == 3:
            spec = KernelSpec.radial_mixture([(0.5, 0.25), (1.5, 0.75)])
        elif i % 2 == 0:
            spec = KernelSpec.laplace()
        else:
            spec = KernelSpec.gaussian()
        data = SampleSet(X, y)
        mean_y_sq = data.mean_y_squared()
        for lam in (1e-2, 1.0):
            fit = krr_fit(spec, data, beta, lam)
            G = gram(spec, beta, X)
            el_err = float(np.max(np.abs(G @ fit.residuals / n - lam * (G @ fit.dual))))
            el_scale = max(1.0, float(np.max(np.abs(y))))
            rrk_lhs = float(fit.residuals @ (G @ fit.residuals)) / n**2
            rrk_rhs = lam**2 * fit.rkhs_norm_sq
            rrk_err = abs(rrk_lhs - rrk_rhs) / max(abs(rrk_rhs), 1e-300)
            sign_gap = abs(objective_value(spec, data, np.abs(beta), lam) - fit.objective)
            ok = (
                el_err <= tol * el_scale
                and rrk_err <= tol
                and fit.objective <= mean_y_sq * (1 + tol)
                and lam * fit.rkhs_norm_sq <= mean_y_sq * (1 + tol)
                and sign_gap <= tol * max(fit.objective, 1.0)
            )
            rec.add(
                f"fixture-{i:02d}-lam-{lam:g}",
                ok,
                tol,
                euler_lagrange_err=el_err / el_scale,
                residual_kernel_identity_err=rrk_err,
                objective=fit.objective,
                mean_y_sq=mean_y_sq,
                penalty=lam * fit.rkhs_norm_sq,
                sign_invariance_gap=sign_gap,
            )
    return rec.records


# ---------------------------------------------------------------------------
# 2. analytic first variation against one-sided finite differences


def suite_first_variation(seed: int = 0, fixtures: int = 10, **_) -> list[ResultRecord]:
    rec = _Recorder("first-variation", seed)
    fd_tol = 1e-4
    rec_tol = 1e-10
    step = 1e-6
    for i in range(fixtures):
        rng = _case_rng(seed, "first-variation", i)
        n = int(rng.integers(8, 65))
        d = int(rng.integers(2, 9))
        X = rng.normal(size=(n, d))
        y = rng.normal(size=n)
        lam = 1e-2 if i % 2 == 0 else 1.0
        data = SampleSet(X, y)
        # bounded deterministic redraws toward a non-degenerate probe: near-zero
        # derivatives turn finite-difference truncation into unbounded relative
        # error, so keep the candidate whose weakest-family derivative is largest
        best = None
        for _ in range(40):
            beta = rng.normal(size=d)
            beta[rng.random(d) < 0.34] = 0.0  # probe the nonsmooth boundary too
            v = rng.normal(size=d)
            v /= float(np.linalg.norm(v))
            floor = min(
                abs(directional_derivative(spec, data, krr_fit(spec, data, beta, lam), v))
                for spec in (KernelSpec.laplace(), KernelSpec.gaussian())
            )
            if best is None or floor > best[0]:
                best = (floor, beta, v)
            if floor > 0.05 / lam:
                break
        _, beta, v = best
        for spec, fam in ((KernelSpec.laplace(), "l1"), (KernelSpec.gaussian(), "radial")):
            rows = finite_difference_check(spec, data, beta, lam, v, [step])
            row = rows[0]
            ok = row.rel_err <= fd_tol
            rec.add(
                f"fd-{fam}-{i:02d}",
                ok,
                fd_tol,
                analytic=row.analytic,
                numeric=row.numeric,
                rel_err=row.rel_err,
                step=step,
                lam=lam,
            )
        spec = KernelSpec.laplace()
        fit = krr_fit(spec, data, beta, lam)
        report = coordinate_decomposition(spec, data, fit)
        worst = 0.0
        for _ in range(50):
            vv = rng.normal(size=d)
            direct = directional_derivative(spec, data, fit, vv)
            rebuilt = reconstruct_from_report(report, vv)
            worst = max(worst, abs(direct - rebuilt) / max(abs(direct), 1e-12))
        rec.add(f"reconstruction-{i:02d}", worst <= rec_tol, rec_tol, worst_rel_err=worst, lam=lam)
    return rec.records


# ---------------------------------------------------------------------------
# 3. Laplace vs Gaussian behavior at the origin


def _three_point_fixture() -> SampleSet:
    x = np.array([[-1.0], [0.0], [1.0]])
    return SampleSet(x, x[:, 0] ** 2 - 2.0 / 3.0)


def suite_laplace_vs_gaussian(seed: int = 0, **_) -> list[ResultRecord]:
    rec = _Recorder("laplace-vs-gaussian", seed)
    lap, gau = KernelSpec.laplace(), KernelSpec.gaussian()
    data = _three_point_fixture()
    for lam in (1e-2, 1.0):
        fit = krr_fit(lap, data, np.zeros(1), lam)
        report = coordinate_decomposition(lap, data, fit)
        h1 = report.onesided_coeff[0]
        target = -4.0 / (81.0 * lam)
        tol = 1e-10 * max(1.0, abs(target))
        rec.add(
            f"laplace-quadratic-h1-lam-{lam:g}",
            abs(h1 - target) <= tol,
            tol,
            h1=h1,
            target=target,
            err=abs(h1 - target),
        )
    for lam in (1e-2, 1.0):
        fitg = krr_fit(gau, data, np.zeros(1), lam)
        d1 = directional_derivative(gau, data, fitg, np.array([1.0]))
        rec.add(f"gaussian-first-order-lam-{lam:g}", abs(d1) <= 1e-12, 1e-12, derivative=d1)
    # second-order quotient at the origin: target 0 because mean(y x) = 0 exactly
    lam, s = 1.0, 1e-3
    j0 = objective_value(gau, data, np.zeros(1), lam)
    quotient = (objective_value(gau, data, np.array([s]), lam) - j0) / s**2
    corr = float(np.mean(data.y * data.x[:, 0]))
    target = 2.0 / lam * psi_prime(gau, 0.0) * corr**2
    rec.add(
        "gaussian-second-order",
        abs(quotient - target) <= 1e-6,
        1e-6,
        quotient=quotient,
        target=target,
        mean_yx=corr,
        step=s,
    )
    # linear fixture: Rademacher pair y = x
    pair = SampleSet(np.array([[-1.0], [1.0]]), np.array([-1.0, 1.0]))
    for lam in (1e-2, 1.0):
        fitp = krr_fit(lap, pair, np.zeros(1), lam)
        rep = coordinate_decomposition(lap, pair, fitp)
        h1 = rep.onesided_coeff[0]
        target = -1.0 / lam
        tol = 1e-10 * max(1.0, abs(target))
        rec.add(
            f"laplace-linear-h1-lam-{lam:g}",
            abs(h1 - target) <= tol,
            tol,
            h1=h1,
            target=target,
        )
    return rec.records


# ---------------------------------------------------------------------------
# 4. conditionally-negative-definite quadrature oracle


def _cnd_double_sum(x, f, w) -> float:
    A = np.abs(x[:, None] - x[None, :])
    return float(np.real((w * f) @ (A @ (w * np.conj(f)))))


def suite_cnd_oracle(seed: int = 0, fixtures: int = 10, **_) -> list[ResultRecord]:
    rec = _Recorder("cnd-oracle", seed)
    tol = 1e-4
    x = np.array([-1.0, 1.0])
    f = np.array([-1.0, 1.0], dtype=complex)
    w = np.array([0.5, 0.5])
    q = cnd_quadrature_oracle(list(zip(x, f, w)))
    rec.add(
        "rademacher",
        abs(q - (-1.0)) <= tol,
        tol,
        quadrature=q,
        double_sum=_cnd_double_sum(x, f, w),
        target=-1.0,
    )
    for i in range(fixtures):
        rng = _case_rng(seed, "cnd-oracle", i)
        m = int(rng.integers(3, 13))
        x = rng.normal(size=m)
        f = rng.normal(size=m) + 1j * rng.normal(size=m)
        w = rng.random(m)
        w = w / w.sum()
        f = f - np.sum(w * f) / np.sum(w)  # enforce sum w f = 0
        ds = _cnd_double_sum(x, f, w)
        q = cnd_quadrature_oracle(list(zip(x, f, w)))
        rec.add(
            f"random-{i:02d}",
            abs(q - ds) <= tol and q <= 1e-12,
            tol,
            quadrature=q,
            double_sum=ds,
            abs_err=abs(q - ds),
            points=float(m),
        )
    return rec.records


# ---------------------------------------------------------------------------
# 5. proxy decomposition scaling (sqrt-lambda remainder)


def _main_effect_scenario(n: int, scenario_seed: int, noise_level: float, dist: str) -> ScenarioSpec:
    return ScenarioSpec(
        d=8,
        n=n,
        effects=(EffectTerm((0,), "linear", 1.0), EffectTerm((1,), "quadratic", 1.0)),
        relevant_dist=dist,
        noise_level=noise_level,
        seed=scenario_seed,
    )


def suite_proxy_decomposition(seed: int = 0, n: int = 2000, draws: int = 12000, **_) -> list[ResultRecord]:
    rec = _Recorder("proxy-decomposition", seed)
    spec = KernelSpec.laplace()
    scenario = _main_effect_scenario(n, _case_seed(seed, "proxy-decomposition", 0), 0.0, "three_point")
    data, truth = generate(scenario)
    beta = np.zeros(scenario.d)
    beta[0] = 1.0
    # exact-on-empirical mode: the empirical measure is the population, so the
    # conditioning uses grouped sample means over the discrete support pattern
    cm = grouped_conditional_mean(data.x, data.y, [0])
    lams = [10 ** (-1 - 0.5 * k) for k in range(7)]
    rows, est = decomposition_gap(spec, data, beta, 1, lams, cm, draws=draws, seed=_case_seed(seed, "proxy-decomposition", 1))
    logs = np.log10([max(abs(g), 1e-300) for _, g in rows])
    slope = float(np.polyfit(np.log10(lams), logs, 1)[0])
    rec.add(
        "gap-scaling-slope",
        slope >= 0.4,
        0.4,
        slope=slope,
        **{f"gap_lam_{lam:g}": gap for lam, gap in rows},
    )
    rec.add(
        "main-effect-proxy-positive",
        est.value > 3.0 * est.std_error,
        3.0,
        value=est.value,
        std_error=est.std_error,
        sigmas=est.value / max(est.std_error, 1e-300),
    )
    saturated = np.zeros(scenario.d)
    saturated[[0, 1]] = 1.0
    cm_sat = grouped_conditional_mean(data.x, data.y, [0, 1])
    est_sat = proxy_anova(spec, data, saturated, 2, cm_sat, draws=min(draws, 2000), seed=_case_seed(seed, "proxy-decomposition", 2))
    rec.add(
        "saturated-proxy-null",
        abs(est_sat.value) <= 3.0 * est_sat.std_error + 1e-12,
        3.0,
        value=est_sat.value,
        std_error=est_sat.std_error,
    )
    return rec.records


# ---------------------------------------------------------------------------
# 6. Gaussian noise elimination at stationary points


def _noise_cfg(lam: float, n: int) -> OptimizerConfig:
    # constants calibrated on the d=8, n=2000, uniform linear+quadratic
    # scenario; tolerances carry the derivative's 1/lam factor and the CLT
    # 1/sqrt(n) scale of the pair-statistic fluctuations
    s = (1e-2 / lam) * np.sqrt(2000.0 / n)
    return OptimizerConfig(
        step0=30.0 * (1e-2 / lam),
        backtrack=0.5,
        max_iters=80,
        tol_g=1.5e-3 * s,
        tol_h=6e-3 * s,
        box_bound=1e3,
    )


def suite_noise_elimination(seed: int = 0, n: int = 2000, runs: int = 10, **_) -> list[ResultRecord]:
    rec = _Recorder("noise-elimination", seed)
    spec = KernelSpec.laplace()
    lam = 1e-2
    cfg = _noise_cfg(lam, n)
    good = 0
    deriv_ok = 0
    for r in range(runs):
        scenario = _main_effect_scenario(n, _case_seed(seed, "noise-elimination", r), 0.25, "uniform")
        data, truth = generate(scenario)
        beta0 = np.ones(scenario.d)
        fit0 = krr_fit(spec, data, beta0, lam)
        v = noise_descent_direction(beta0, truth.noise_coords)
        deriv, se = directional_derivative_se(spec, data, fit0, v)
        d_ok = deriv <= 2.0 * se
        deriv_ok += d_ok
        trace = optimize(spec, data, beta0, lam, cfg)
        noise_zero = all(trace.terminal_beta[k] == 0.0 for k in truth.noise_coords)
        below = trace.terminal_fit.objective < trace.mean_y_sq
        ok = trace.status == STATIONARY_CERTIFIED and noise_zero and below
        good += ok
        rec.add(
            f"run-{r:02d}",
            ok and d_ok,
            2.0,
            certified=float(trace.status == STATIONARY_CERTIFIED),
            noise_zeroed=float(noise_zero),
            terminal_objective=trace.terminal_fit.objective,
            mean_y_sq=trace.mean_y_sq,
            start_derivative=deriv,
            start_derivative_se=se,
            iterations=float(trace.iterations),
        )
    need = max(runs - 1, 1)
    rec.add(
        "ensemble",
        good >= need and deriv_ok >= need,
        float(need),
        successes=float(good),
        derivative_checks=float(deriv_ok),
        runs=float(runs),
    )
    return rec.records


# ---------------------------------------------------------------------------
# 7. main-effect recovery across the lambda sweep


def suite_main_effect_recovery(seed: int = 0, n: int = 2000, runs: int = 10, lambdas=(1e-2, 1e-3), **_) -> list[ResultRecord]:
    rec = _Recorder("main-effect-recovery", seed)
    spec = KernelSpec.laplace()
    for lam in lambdas:
        cfg = _noise_cfg(lam, n)
        good = 0
        for r in range(runs):
            scenario = _main_effect_scenario(n, _case_seed(seed, "main-effect-recovery", r), 0.25, "uniform")
            data, truth = generate(scenario)
            trace = optimize(spec, data, np.ones(scenario.d), lam, cfg)
            metrics = support_metrics(trace.terminal_beta, truth.s_star)
            ok = (
                trace.status == STATIONARY_CERTIFIED
                and float(np.max(trace.terminal_beta)) < cfg.box_bound
                and metrics.missed == 0
            )
            good += ok
            rec.add(
                f"lam-{lam:g}-run-{r:02d}",
                ok,
                0.0,
                certified=float(trace.status == STATIONARY_CERTIFIED),
                missed=float(metrics.missed),
                false_actives=float(metrics.false_actives),
                beta_max=float(np.max(trace.terminal_beta)),
            )
        need = max(runs - 1, 1)
        rec.add(f"lam-{lam:g}-ensemble", good >= need, float(need), successes=float(good), runs=float(runs))
    return rec.records


# ---------------------------------------------------------------------------
# 8. interaction trap at the origin and partner-driven activation


def _xor_scenario(n: int, scenario_seed: int) -> ScenarioSpec:
    return ScenarioSpec(
        d=6,
        n=n,
        effects=(EffectTerm((0, 1), "product", 1.0),),
        relevant_dist="rademacher",
        noise_level=0.25,
        seed=scenario_seed,
    )


def suite_interaction_activation(seed: int = 0, n: int = 2000, runs: int = 10, **_) -> list[ResultRecord]:
    rec = _Recorder("interaction-activation", seed)
    spec = KernelSpec.laplace()
    lam = 1e-2
    scale = np.sqrt(2000.0 / n)
    cfg = OptimizerConfig(step0=8.0, backtrack=0.5, max_iters=80,
                          tol_g=0.02 * scale, tol_h=0.6 * scale, box_bound=1e3)
    trapped = 0
    activated = 0
    h_significant = 0
    for r in range(runs):
        scenario = _xor_scenario(n, _case_seed(seed, "interaction-activation", r))
        data, truth = generate(scenario)
        trap = optimize(spec, data, np.zeros(scenario.d), lam, cfg)
        is_trap = trap.status == STATIONARY_CERTIFIED and trap.iterations == 0 and not trap.terminal_beta.any()
        trapped += is_trap
        partner = np.zeros(scenario.d)
        partner[0] = 1.0
        fitp = krr_fit(spec, data, partner, lam)
        h1, se1 = onesided_coefficient_se(spec, data, fitp, 1)
        sig = h1 < -3.0 * se1
        h_significant += sig
        start = np.zeros(scenario.d)
        start[0], start[1] = 1.0, 0.5
        trace = optimize(spec, data, start, lam, cfg)
        support = set(np.flatnonzero(trace.terminal_beta))
        got_both = {0, 1} <= support
        activated += got_both
        rec.add(
            f"run-{r:02d}",
            is_trap and sig and got_both,
            3.0,
            origin_trap=float(is_trap),
            partner_h=h1,
            partner_h_se=se1,
            support_recovered=float(got_both),
            terminal_objective=trace.terminal_fit.objective,
        )
    need = max(runs - 1, 1)
    rec.add(
        "ensemble",
        trapped >= need and activated >= need and h_significant >= need,
        float(need),
        traps=float(trapped),
        activations=float(activated),
        significant_h=float(h_significant),
        runs=float(runs),
    )
    return rec.records


# ---------------------------------------------------------------------------
# 9. escape to infinity on continuous data


def suite_escape(seed: int = 0, n: int = 256, **_) -> list[ResultRecord]:
    rec = _Recorder("escape", seed)
    spec = KernelSpec.laplace()
    scenario = ScenarioSpec(
        d=4,
        n=n,
        effects=(EffectTerm((0,), "linear", 1.0),),
        relevant_dist="uniform",
        noise_level=0.25,
        seed=_case_seed(seed, "escape", 0),
    )
    data, _ = generate(scenario)
    mean_y_sq = data.mean_y_squared()
    far = np.full(scenario.d, 1e6)
    for lam in (1e-2, 1.0):
        j = objective_value(spec, data, far, lam)
        width = mean_y_sq / (n * lam) + 1e-6
        ok = (mean_y_sq - j) <= width and j <= mean_y_sq * (1 + 1e-12)
        rec.add(
            f"far-field-lam-{lam:g}",
            ok,
            width,
            objective=j,
            mean_y_sq=mean_y_sq,
            deficit=mean_y_sq - j,
        )
    return rec.records


SUITES = {
    "identities": suite_identities,
    "first-variation": suite_first_variation,
    "laplace-vs-gaussian": suite_laplace_vs_gaussian,
    "cnd-oracle": suite_cnd_oracle,
    "proxy-decomposition": suite_proxy_decomposition,
    "noise-elimination": suite_noise_elimination,
    "main-effect-recovery": suite_main_effect_recovery,
    "interaction-activation": suite_interaction_activation,
    "escape": suite_escape,
}
