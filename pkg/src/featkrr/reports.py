"""Experiment configuration, result emission, and CLI command bodies.

File conventions: JSON for configs, RFC-4180 CSV (UTF-8, '.' decimal) for
tables, JSONL (one record per line, sorted keys) for verification records.
All files are written atomically (temp file + rename) and contain no wall
clock quantities, so a rerun with the same config and seed reproduces every
emitted byte; timings go to stdout only.

Scenario coordinates in config files are 1-based to match the x1..xd CSV
headers; the Python API is 0-based throughout.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import KernelSpec
from .optimizer import OptimizerConfig, multistart
from .ridge import SampleSet, krr_fit
from .scenarios import EffectTerm, GroundTruth, ScenarioSpec, generate, support_metrics
from .suites import SUITES, ResultRecord
from .variation import coordinate_decomposition, finite_difference_check
from . import figures


class ConfigError(ValueError):
    """Invalid configuration or input data; maps to exit code 2."""


PRESETS: dict[str, ScenarioSpec] = {
    "main-effect": ScenarioSpec(
        d=8, n=800,
        effects=(EffectTerm((0,), "linear", 1.0), EffectTerm((1,), "quadratic", 1.0)),
        relevant_dist="uniform", noise_level=0.25, seed=3,
    ),
    "xor": ScenarioSpec(
        d=6, n=800,
        effects=(EffectTerm((0, 1), "product", 1.0),),
        relevant_dist="rademacher", noise_level=0.25, seed=3,
    ),
    "noise-elimination": ScenarioSpec(
        d=8, n=2000,
        effects=(EffectTerm((0,), "linear", 1.0), EffectTerm((1,), "quadratic", 1.0)),
        relevant_dist="uniform", noise_level=0.25, seed=3,
    ),
}


@dataclass
class ExperimentConfig:
    kernel: KernelSpec = field(default_factory=KernelSpec.laplace)
    scenario: ScenarioSpec | None = None
    csv_path: Path | None = None
    center_y: bool = False
    preset: str | None = None
    lambda_list: tuple[float, ...] = (1e-2,)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    starts: tuple[str, ...] = ("ones",)
    suites: tuple[str, ...] = ()
    suite_options: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: int = 0
    threads: int = 1


def _parse_kernel(raw) -> KernelSpec:
    family = raw.get("family", "l1")
    atoms = raw.get("atoms", [[1.0, 1.0]])
    try:
        if family == "l1":
            return KernelSpec.l1_mixture(atoms)
        if family == "radial":
            return KernelSpec.radial_mixture(atoms)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad kernel block: {exc}") from exc
    raise ConfigError(f"unknown kernel family {family!r}")


def kernel_to_config(spec: KernelSpec) -> dict:
    """The config-schema form of a kernel; parse_config inverts it."""
    return {"family": spec.family, "atoms": [[t, p] for t, p in spec.mu.atoms]}


def scenario_to_config(spec: ScenarioSpec) -> dict:
    """The config-schema form of a scenario (1-based coords); parse_config inverts it."""
    out = {
        "d": spec.d,
        "n": spec.n,
        "effects": [
            {"coords": [c + 1 for c in t.coords], "kind": t.kind, "amplitude": t.amplitude}
            for t in spec.effects
        ],
        "relevant_dist": spec.relevant_dist,
        "noise_level": spec.noise_level,
        "seed": spec.seed,
        "center_y": spec.center_y,
    }
    if spec.noise_cov is not None:
        out["noise_cov"] = np.asarray(spec.noise_cov).tolist()
    return out


def _parse_scenario(raw) -> ScenarioSpec:
    try:
        effects = []
        for item in raw["effects"]:
            coords = tuple(int(c) - 1 for c in item["coords"])  # configs are 1-based
            effects.append(EffectTerm(coords=coords, kind=item["kind"], amplitude=float(item.get("amplitude", 1.0))))
        return ScenarioSpec(
            d=int(raw["d"]),
            n=int(raw["n"]),
            effects=tuple(effects),
            relevant_dist=raw.get("relevant_dist", "rademacher"),
            noise_level=float(raw.get("noise_level", 0.0)),
            noise_cov=np.asarray(raw["noise_cov"], dtype=float) if raw.get("noise_cov") is not None else None,
            seed=int(raw.get("seed", 0)),
            center_y=bool(raw.get("center_y", True)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario block: {exc}") from exc


def _parse_optimizer(raw) -> OptimizerConfig:
    try:
        return OptimizerConfig(
            step0=float(raw.get("step0", 1.0)),
            backtrack=float(raw.get("backtrack", 0.5)),
            max_iters=int(raw.get("max_iters", 200)),
            tol_g=float(raw["tol_g"]) if raw.get("tol_g") is not None else None,
            tol_h=float(raw["tol_h"]) if raw.get("tol_h") is not None else None,
            activation_threshold=float(raw.get("activation_threshold", 0.0)),
            box_bound=float(raw.get("box_bound", 1e3)),
            seed=int(raw.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad optimizer block: {exc}") from exc


def parse_config(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    cfg = ExperimentConfig()
    cfg.kernel = _parse_kernel(raw.get("kernel", {}))
    if raw.get("scenario") is not None:
        cfg.scenario = _parse_scenario(raw["scenario"])
    if raw.get("csv") is not None:
        cfg.csv_path = (base / raw["csv"]).resolve()
    cfg.center_y = bool(raw.get("center_y", False))
    cfg.preset = raw.get("preset")
    if cfg.preset is not None and cfg.preset not in PRESETS:
        raise ConfigError(f"unknown preset {cfg.preset!r}; choose from {sorted(PRESETS)}")
    lams = raw.get("lambda_list", [1e-2])
    try:
        cfg.lambda_list = tuple(float(v) for v in lams)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad lambda_list: {exc}") from exc
    if not cfg.lambda_list or any(v <= 0 for v in cfg.lambda_list):
        raise ConfigError("lambda_list must be nonempty with strictly positive entries")
    cfg.optimizer = _parse_optimizer(raw.get("optimizer", {}))
    starts = raw.get("starts", ["ones"])
    cfg.starts = tuple(str(s) for s in starts)
    suites = raw.get("suites", [])
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suites {unknown}; registered: {sorted(SUITES)}")
    cfg.suites = tuple(suites)
    cfg.suite_options = dict(raw.get("suite_options", {}))
    cfg.output_dir = (base / raw.get("output_dir", "out")).resolve()
    cfg.seed = int(raw.get("seed", 0))
    cfg.threads = int(raw.get("threads", 1))
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, base_dir=path.parent)


def load_csv(path, center_y: bool = False) -> SampleSet:
    """Read a `x1,...,xd,y` data file into a SampleSet."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read data file {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 1 or header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(d)]:
        raise ConfigError(f"{path}: header must be x1,...,xd,y, got {header}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ConfigError(f"{path}: no data rows")
    X = np.empty((len(body), d))
    y = np.empty(len(body))
    for i, row in enumerate(body):
        line_no = i + 2
        if len(row) != d + 1:
            raise ConfigError(f"{path}: line {line_no}: expected {d + 1} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise ConfigError(f"{path}: line {line_no}: non-numeric value ({exc})") from exc
        X[i] = vals[:-1]
        y[i] = vals[-1]
    try:
        data = SampleSet(X, y)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return data.centered() if center_y else data


def resolve_data(cfg: ExperimentConfig) -> tuple[SampleSet, GroundTruth | None]:
    """Produce the working sample from scenario, preset, or CSV (in that order)."""
    if cfg.scenario is not None:
        return generate(cfg.scenario)
    if cfg.preset is not None:
        return generate(PRESETS[cfg.preset])
    if cfg.csv_path is not None:
        return load_csv(cfg.csv_path, center_y=cfg.center_y), None
    raise ConfigError("config needs one of: scenario, preset, csv")


# ---------------------------------------------------------------------------
# emission helpers


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return _atomic_write(Path(path), buf.getvalue())


def write_jsonl(path, dicts) -> Path:
    lines = [json.dumps(d, sort_keys=True, allow_nan=False) for d in dicts]
    return _atomic_write(Path(path), "".join(line + "\n" for line in lines))


def _banner(cfg: ExperimentConfig, command: str) -> str:
    return f"featkrr {command} | seed={cfg.seed} | threads={cfg.threads} | out={cfg.output_dir}"


# ---------------------------------------------------------------------------
# commands


def run_fit(cfg: ExperimentConfig, log=print) -> list[Path]:
    log(_banner(cfg, "fit"))
    data, _ = resolve_data(cfg)
    rows = []
    plot_rows = []
    for lam in cfg.lambda_list:
        fit = krr_fit(cfg.kernel, data, np.ones(data.dim), lam)
        rms = float(np.sqrt(np.mean(fit.residuals**2)))
        rows.append([lam, fit.objective, rms, fit.rkhs_norm_sq, data.mean_y_squared(), cfg.seed])
        plot_rows.append({"lambda": lam, "objective": fit.objective, "residual_rms": rms,
                          "rkhs_norm_sq": fit.rkhs_norm_sq})
    out = cfg.output_dir
    paths = [write_csv(out / "fit.csv",
                       ["lambda", "objective", "residual_rms", "rkhs_norm_sq", "mean_y_sq", "seed"], rows)]
    paths.append(figures.save_fit_curves(plot_rows, out / "fit_curves.png"))
    for p in paths:
        log(f"wrote {p}")
    return paths


def _probe_points(cfg: ExperimentConfig, data: SampleSet, truth: GroundTruth | None):
    rng = np.random.default_rng([cfg.seed, 97])
    probes = {"origin": np.zeros(data.dim)}
    support = np.zeros(data.dim)
    if truth is not None:
        support[sorted(truth.s_star)] = 1.0
    else:
        support[:] = 1.0
    probes["support"] = support
    probes["random"] = rng.uniform(0.2, 1.5, size=data.dim)
    return probes


def run_derivs(cfg: ExperimentConfig, log=print) -> list[Path]:
    log(_banner(cfg, "derivs"))
    data, truth = resolve_data(cfg)
    table_rows = []
    fd_rows = []
    fd_plot = []
    steps = [1e-3, 1e-4, 1e-5, 1e-6]
    for probe_idx, (probe_name, beta) in enumerate(sorted(_probe_points(cfg, data, truth).items())):
        for lam in cfg.lambda_list:
            fit = krr_fit(cfg.kernel, data, beta, lam)
            report = coordinate_decomposition(cfg.kernel, data, fit)
            for k in range(data.dim):
                kind = "g" if k in report.smooth_grad else "h"
                value = report.smooth_grad.get(k, report.onesided_coeff.get(k))
                table_rows.append([probe_name, lam, k + 1, kind, value, cfg.seed])
            rng = np.random.default_rng([cfg.seed, 11, probe_idx])
            v = rng.normal(size=data.dim)
            for row in finite_difference_check(cfg.kernel, data, beta, lam, v, steps):
                fd_rows.append([probe_name, lam, row.step, row.analytic, row.numeric, row.rel_err, cfg.seed])
                fd_plot.append({"probe": f"{probe_name}@{lam:g}", "step": row.step, "rel_err": row.rel_err})
    out = cfg.output_dir
    paths = [
        write_csv(out / "derivative_table.csv",
                  ["probe", "lambda", "coord", "kind", "value", "seed"], table_rows),
        write_csv(out / "fd_sweep.csv",
                  ["probe", "lambda", "step", "analytic", "numeric", "rel_err", "seed"], fd_rows),
        figures.save_fd_sweep(fd_plot, out / "fd_sweep.png"),
    ]
    for p in paths:
        log(f"wrote {p}")
    return paths


def _start_vector(name: str, dim: int, rng) -> np.ndarray:
    if name == "ones":
        return np.ones(dim)
    if name == "zeros":
        return np.zeros(dim)
    if name == "random":
        return rng.uniform(0.1, 1.5, size=dim)
    try:
        vals = [float(v) for v in name.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad start {name!r}; use ones/zeros/random or comma-separated numbers") from exc
    if len(vals) != dim:
        raise ConfigError(f"start {name!r} has {len(vals)} entries, expected {dim}")
    return np.array(vals)


def run_optimize(cfg: ExperimentConfig, log=print) -> list[Path]:
    log(_banner(cfg, "optimize"))
    data, truth = resolve_data(cfg)
    rng = np.random.default_rng([cfg.seed, 23])
    starts = [(_start_vector(s, data.dim, rng), s) for s in cfg.starts]
    metrics_rows = []
    trace_records = []
    path_rows = []
    paths = []
    out = cfg.output_dir
    for lam in cfg.lambda_list:
        result = multistart(cfg.kernel, data, lam, cfg.optimizer, [b for b, _ in starts], n_threads=cfg.threads)
        for (b0, label), trace in zip(starts, result.traces):
            supp = sorted(int(k) + 1 for k in np.flatnonzero(trace.terminal_beta))
            row = [lam, label, trace.status, trace.iterations,
                   trace.terminal_fit.objective, trace.mean_y_sq,
                   "+".join(map(str, supp)) if supp else "", cfg.seed]
            if truth is not None:
                m = support_metrics(trace.terminal_beta, truth.s_star)
                row.extend([m.false_actives, m.missed])
            metrics_rows.append(row)
            for it, point in enumerate(trace.points):
                trace_records.append({
                    "lambda": lam,
                    "start": label,
                    "iter": it,
                    "beta": [float(v) for v in point.beta],
                    "objective": float(point.objective),
                    "worst_violation": float(point.worst_violation),
                    "seed": cfg.seed,
                })
        best = result.best
        for it, point in enumerate(best.points):
            for k, v in enumerate(point.beta):
                path_rows.append([lam, it, k + 1, float(v), cfg.seed])
        paths.append(figures.save_beta_path([p.beta for p in best.points],
                                            out / f"beta_path_lam_{lam:g}.png"))
        paths.append(figures.save_objective_path(
            [(label, [p.objective for p in tr.points]) for (_, label), tr in zip(starts, result.traces)],
            out / f"objective_path_lam_{lam:g}.png"))
    header = ["lambda", "start", "status", "iterations", "objective", "mean_y_sq", "support", "seed"]
    if truth is not None:
        header.extend(["false_actives", "missed"])
    paths.insert(0, write_csv(out / "optimize_metrics.csv", header, metrics_rows))
    paths.insert(1, write_jsonl(out / "optimize_trace.jsonl", trace_records))
    paths.insert(2, write_csv(out / "beta_path.csv", ["lambda", "iter", "coord", "value", "seed"], path_rows))
    for p in paths:
        log(f"wrote {p}")
    return paths


def run_verify(cfg: ExperimentConfig, log=print) -> tuple[list[ResultRecord], bool]:
    log(_banner(cfg, "verify"))
    names = list(cfg.suites)
    if not names:
        log("no suites requested; nothing to do")
        return [], True
    options = dict(cfg.suite_options)

    def run_one(name: str) -> list[ResultRecord]:
        return SUITES[name](seed=cfg.seed, **options)

    if cfg.threads > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            all_records = list(pool.map(run_one, names))
    else:
        all_records = [run_one(name) for name in names]
    out = cfg.output_dir
    every: list[ResultRecord] = []
    all_ok = True
    for name, records in zip(names, all_records):
        records = sorted(records, key=lambda r: r.case)
        every.extend(records)
        # wall-clock timings stay out of the files so reruns are byte-identical
        dicts = [{k: v for k, v in r.to_json_dict().items() if k != "runtime_ms"} for r in records]
        path = write_jsonl(out / f"verify_{name}.jsonl", dicts)
        _render_suite_figure(name, records, out, log)
        failed = [r for r in records if not r.passed]
        ok = not failed
        all_ok = all_ok and ok
        total_ms = sum(r.runtime_ms for r in records)
        log(f"{name:24s} {'PASS' if ok else 'FAIL'}  {len(records) - len(failed)}/{len(records)} records  "
            f"({total_ms} ms)  -> {path}")
        for r in failed:
            log(f"    failed: {r.case} tolerance={r.tolerance} quantities={r.quantities}")
    return every, all_ok


def _render_suite_figure(name: str, records, out: Path, log) -> None:
    if name != "proxy-decomposition":
        return
    slope_recs = [r for r in records if r.case == "gap-scaling-slope"]
    if not slope_recs:
        return
    rows = sorted(
        (float(key.split("_")[-1]), value)
        for key, value in slope_recs[0].quantities.items()
        if key.startswith("gap_lam_")
    )
    if rows:
        log(f"wrote {figures.save_gap_scaling(rows, out / 'gap_scaling.png')}")


def run_scenario_gen(cfg: ExperimentConfig, log=print) -> list[Path]:
    log(_banner(cfg, "scenario gen"))
    if cfg.scenario is None and cfg.preset is None:
        raise ConfigError("scenario gen needs a scenario block or a preset")
    scenario = cfg.scenario if cfg.scenario is not None else PRESETS[cfg.preset]
    data, truth = generate(scenario)
    out = cfg.output_dir
    header = [f"x{i + 1}" for i in range(data.dim)] + ["y"]
    rows = [list(data.x[i]) + [data.y[i]] for i in range(data.n)]
    paths = [write_csv(out / "scenario.csv", header, rows)]
    meta = {
        "s_star": sorted(int(k) + 1 for k in truth.s_star),
        "noise_coords": [int(k) + 1 for k in truth.noise_coords],
        "y_shift": float(truth.y_shift),
        "effects": [
            {"coords": [c + 1 for c in t.coords], "kind": t.kind, "amplitude": t.amplitude}
            for t in scenario.effects
        ],
        "relevant_dist": scenario.relevant_dist,
        "noise_level": scenario.noise_level,
        "n": scenario.n,
        "d": scenario.d,
        "seed": scenario.seed,
    }
    meta_path = out / "scenario_truth.json"
    paths.append(_atomic_write(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n"))
    for p in paths:
        log(f"wrote {p}")
    return paths
