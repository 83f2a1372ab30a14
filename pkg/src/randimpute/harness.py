"""Monte Carlo harness, single-dataset analysis, and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np

from .core import CompletedDataset, Dataset, Stratification, ValidationError
from .identify import Restriction
from .impute import (
    GibbsConfig,
    complete_cases,
    mean_impute,
    mi_design_stage,
    mi_outcome_stage,
    regression_impute,
)
from .infer import (
    INTERACTION,
    ITT,
    MetricsRow,
    _parse_model,
    aggregate_metrics,
    fit_logistic,
    rubin_combine,
    wald_interval,
)
from .rngkit import RngStream, derive_stream
from .simgen import LoglinearSpec, ScenarioConfig, generate_dataset

METHODS = (
    "MI-R",
    "MI-NR",
    "MI-RY",
    "MI-NRY",
    "Mean-R",
    "Mean-NR",
    "Mean-NRY",
    "Reg-R",
    "Reg-NR",
    "Reg-NRY",
    "CCA",
    "BeforeDeletion",
)
MULTIPLE = {"MI-R", "MI-NR", "MI-RY", "MI-NRY"}
_SUFFIX_STRAT = {"R": Stratification.NONE, "NR": Stratification.BY_T, "NRY": Stratification.BY_TY}

METRIC_COLUMNS = ("method", "coefficient", "abs_bias", "mc_sd", "se", "coverage", "avg_ci_length", "n_used", "n_failed")


class ConfigError(ValidationError):
    """Invalid simulation configuration."""


class MethodFailure(RuntimeError):
    """A method produced no usable estimate for one dataset."""


def coefficients_for(model: str) -> tuple[str, ...]:
    return ("bt",) if _parse_model(model) == ITT else ("bt", "btx2")


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    scenario_config: ScenarioConfig = field(default_factory=ScenarioConfig)
    replications: int = 1000
    imputations: int = 100
    methods: tuple = METHODS
    restriction: str = "icin"
    seed: int = 0
    workers: int = 1
    output_dir: Optional[str] = None
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    model: str = INTERACTION
    level: float = 0.95

    def __post_init__(self):
        if self.replications < 2:
            raise ConfigError("replications must be ≥ 2")
        if self.imputations < 2:
            raise ConfigError("imputations must be ≥ 2")
        methods = tuple(self.methods)
        if not methods:
            raise ConfigError("methods must be nonempty")
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s): {', '.join(unknown)}")
        object.__setattr__(self, "methods", methods)
        try:
            object.__setattr__(self, "restriction", Restriction.parse(self.restriction).value)
            object.__setattr__(self, "model", _parse_model(self.model))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.workers < 1:
            raise ConfigError("workers must be ≥ 1")
        if not 0 < self.level < 1:
            raise ConfigError("level must lie in (0, 1)")
        object.__setattr__(self, "gibbs", replace(self.gibbs, m=self.imputations))

    def to_dict(self, execution: bool = True) -> dict:
        """Field dict; ``execution=False`` drops settings that cannot change results."""
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        if not execution:
            out.pop("workers")
            out.pop("output_dir")
        out["scenario_config"] = self.scenario_config.to_dict()
        out["methods"] = list(self.methods)
        g = asdict(self.gibbs)
        g.pop("m")
        out["gibbs"] = g
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        _reject_unknown(raw, {f.name for f in fields(cls)}, "config")
        kw = dict(raw)
        try:
            if "scenario_config" in kw:
                sc = dict(kw["scenario_config"])
                _reject_unknown(sc, {f.name for f in fields(ScenarioConfig)}, "scenario_config")
                if "loglinear" in sc:
                    _reject_unknown(sc["loglinear"], {f.name for f in fields(LoglinearSpec)}, "loglinear")
                    sc["loglinear"] = LoglinearSpec(**sc["loglinear"])
                if sc.get("rates") is not None:
                    sc["rates"] = tuple(tuple(a) for a in sc["rates"])
                kw["scenario_config"] = ScenarioConfig(**sc)
            if "gibbs" in kw:
                _reject_unknown(kw["gibbs"], {"burnin", "thin", "beta_prior_variance"}, "gibbs")
                kw["gibbs"] = GibbsConfig(**kw["gibbs"])
            if "methods" in kw:
                kw["methods"] = tuple(kw["methods"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw)


def _reject_unknown(raw, allowed, where):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    extra = sorted(set(raw) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


# ---------------------------------------------------------------------------
# one method on one dataset


def impute_with(
    method: str,
    data: Dataset,
    restriction: Restriction | str = Restriction.ICIN,
    m: int = 100,
    stream: RngStream = None,
    gibbs: Optional[GibbsConfig] = None,
) -> list:
    """Completed (or reduced) datasets produced by ``method``."""
    if method == "CCA":
        return [complete_cases(data)]
    if method == "BeforeDeletion":
        raise ValueError("BeforeDeletion needs the data before deletion")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    family, suffix = method.split("-", 1)
    strat = _SUFFIX_STRAT[suffix] if suffix != "RY" else Stratification.NONE
    if family == "Mean":
        return [mean_impute(data, strat)]
    if family == "Reg":
        return [regression_impute(data, strat, stream)]
    if method == "MI-RY":
        cfg = replace(gibbs or GibbsConfig(), m=m)
        return mi_outcome_stage(data, restriction, Stratification.NONE, cfg, stream)
    return mi_design_stage(data, restriction, strat, m, stream)


def _fit(ds, model):
    fit = fit_logistic(ds, model)
    if fit.separation_flag:
        raise MethodFailure("separation in analysis fit")
    return fit


def estimate_with(
    method: str,
    data: Dataset,
    *,
    restriction: Restriction | str = Restriction.ICIN,
    m: int = 100,
    stream: RngStream = None,
    gibbs: Optional[GibbsConfig] = None,
    model: str = INTERACTION,
    level: float = 0.95,
    full: Optional[Dataset] = None,
) -> dict:
    """``{coef: (estimate, variance, (lower, upper), df)}`` for one method."""
    names = coefficients_for(model)
    if method == "BeforeDeletion":
        if full is None:
            raise ValueError("BeforeDeletion needs the data before deletion")
        completed = [full]
    else:
        completed = impute_with(method, data, restriction, m, stream, gibbs)
    fits = [_fit(ds, model) for ds in completed]
    out = {}
    for name in names:
        pairs = [f.estimate(name) for f in fits]
        if method in MULTIPLE:
            pooled = rubin_combine([p[0] for p in pairs], [p[1] for p in pairs], level)
            out[name] = (pooled.qbar, pooled.t_var, pooled.ci, pooled.df)
        else:
            est, var = pairs[0]
            out[name] = (est, var, wald_interval(est, var, level), math.inf)
    return out


# ---------------------------------------------------------------------------
# simulation


_FAILURES = (ValueError, RuntimeError, ArithmeticError)


def _replicate(cfg: SimConfig, r: int) -> list[dict]:
    """All method results for replication ``r`` (stream derived from (seed, r))."""
    root = derive_stream(cfg.seed, r)
    observed, full = generate_dataset(cfg.scenario_config, root.child("data"))
    names = coefficients_for(cfg.model)
    rows = []
    for method in cfg.methods:
        try:
            res = estimate_with(
                method,
                observed,
                restriction=cfg.restriction,
                m=cfg.imputations,
                stream=root.child(method),
                gibbs=cfg.gibbs,
                model=cfg.model,
                level=cfg.level,
                full=full,
            )
        except _FAILURES as exc:
            for name in names:
                rows.append(dict(replication=r, method=method, coefficient=name, estimate=None,
                                 variance=None, lower=None, upper=None, error=f"{type(exc).__name__}: {exc}"))
            continue
        for name in names:
            est, var, (lo, hi), _ = res[name]
            rows.append(dict(replication=r, method=method, coefficient=name, estimate=float(est),
                             variance=float(var), lower=float(lo), upper=float(hi), error=None))
    return rows


@dataclass
class RunReport:
    rows: list
    before_deletion: dict
    config: dict
    failures: dict
    failure_examples: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    wall_clock: float = 0.0

    def row(self, method: str, coefficient: str) -> MetricsRow:
        for r in self.rows:
            if r.method == method and r.coefficient == coefficient:
                return r
        raise KeyError((method, coefficient))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rows"] = [r.to_dict() for r in self.rows]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        d = dict(d)
        d["rows"] = [MetricsRow(**r) for r in d["rows"]]
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        # wall-clock is excluded from equality; NaN metrics compare equal to NaN
        if not isinstance(other, RunReport):
            return NotImplemented
        a, b = self.to_dict(), other.to_dict()
        a.pop("wall_clock")
        b.pop("wall_clock")
        return json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def _truth(cfg: SimConfig, name: str) -> float:
    return float(getattr(cfg.scenario_config.truth, name))


def _summarize(cfg: SimConfig, records: list) -> tuple[list, dict, dict, dict]:
    names = coefficients_for(cfg.model)
    rows, failures, examples = [], {}, {}
    for method in cfg.methods:
        failed = 0
        for name in names:
            recs = [x for x in records if x["method"] == method and x["coefficient"] == name]
            ok = [(x["estimate"], x["variance"], (x["lower"], x["upper"])) for x in recs if x["error"] is None]
            bad = [x for x in recs if x["error"] is not None]
            failed = len(bad)
            if bad and method not in examples:
                examples[method] = bad[0]["error"]
            if len(ok) >= 2:
                row = aggregate_metrics(ok, _truth(cfg, name), method, name, failed)
            else:
                nan = float("nan")
                row = MetricsRow(method, name, nan, nan, nan, nan, nan, len(ok), failed)
            rows.append(row)
        failures[method] = failed
    return rows, failures, examples


def _before_deletion(cfg: SimConfig, records: list) -> dict:
    out = {}
    for name in coefficients_for(cfg.model):
        ok = [x for x in records if x["method"] == "BeforeDeletion" and x["coefficient"] == name and x["error"] is None]
        if len(ok) < 2:
            continue
        est = np.array([x["estimate"] for x in ok])
        truth = _truth(cfg, name)
        out[name] = {
            "mean": float(est.mean()),
            "mc_sd": float(est.std(ddof=1)),
            "se": float(np.sqrt(np.mean([x["variance"] for x in ok]))),
            "coverage": float(np.mean([x["lower"] <= truth <= x["upper"] for x in ok])),
        }
    return out


def run_simulation(cfg: SimConfig, progress=None) -> RunReport:
    """Run ``cfg.replications`` replications and summarize each method.

    The always-computed before-deletion fit feeds ``before_deletion`` even
    when ``BeforeDeletion`` is not among the requested methods.
    """
    start = time.perf_counter()
    inner = cfg if "BeforeDeletion" in cfg.methods else replace(cfg, methods=cfg.methods + ("BeforeDeletion",))
    reps = range(1, cfg.replications + 1)
    work = partial(_replicate, inner)
    records = []
    if cfg.workers == 1:
        for r in reps:
            records.extend(work(r))
            if progress:
                progress(r, cfg.replications)
    else:
        chunk = max(1, cfg.replications // (4 * cfg.workers))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for i, rows in enumerate(pool.map(work, reps, chunksize=chunk), start=1):
                records.extend(rows)
                if progress:
                    progress(i, cfg.replications)

    bd = _before_deletion(inner, records)
    if inner is not cfg:
        records = [x for x in records if x["method"] != "BeforeDeletion"]
    rows, failures, examples = _summarize(cfg, records)
    return RunReport(
        rows=rows,
        before_deletion=bd,
        config=cfg.to_dict(execution=False),
        failures=failures,
        failure_examples=examples,
        records=records,
        wall_clock=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# reports


def _num(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return repr(float(v))


def metrics_csv(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for r in report.rows:
        d = r.to_dict()
        w.writerow([d["method"], d["coefficient"]] + [_num(d[c]) for c in METRIC_COLUMNS[2:]])
    return buf.getvalue()


def records_csv(report: RunReport) -> str:
    """Per-replication estimates, one row per (replication, method, coefficient)."""
    cols = ("replication", "method", "coefficient", "estimate", "variance", "lower", "upper", "error")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for x in report.records:
        w.writerow([x["replication"], x["method"], x["coefficient"]]
                   + [_num(x[c]) for c in cols[3:7]] + [x["error"] or ""])
    return buf.getvalue()


def emit_report(report: RunReport, fmt: str, out_dir) -> list[Path]:
    """Write the metrics table (csv or json) plus a config echo.

    csv output also writes a per-replication plot-ready table. Wall-clock
    time is kept out of the csv files so identical runs give identical bytes.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        if fmt == "csv":
            paths.append(out / "metrics.csv")
            paths[-1].write_text(metrics_csv(report))
            paths.append(out / "replications.csv")
            paths[-1].write_text(records_csv(report))
        elif fmt == "json":
            paths.append(out / "report.json")
            paths[-1].write_text(report.to_json())
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        echo = {"config": report.config, "before_deletion": report.before_deletion, "failures": report.failures}
        paths.append(out / "config.json")
        paths[-1].write_text(json.dumps(echo, indent=2, sort_keys=True))
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return paths


# ---------------------------------------------------------------------------
# single-dataset analysis


@dataclass
class AnalysisResult:
    method: str
    coefficient: str
    estimate: float
    se: float
    ci: tuple
    df: float
    n: int
    n_complete: int

    def to_text(self) -> str:
        return "\n".join(
            [
                f"method = {self.method}",
                f"coefficient = {self.coefficient}",
                f"estimate = {self.estimate:.6f}",
                f"se = {self.se:.6f}",
                f"ci_95 = ({self.ci[0]:.6f}, {self.ci[1]:.6f})",
                f"n = {self.n}",
                f"n_complete = {self.n_complete}",
            ]
        )


def analyze_dataset(
    data: Dataset,
    method: str,
    restriction: Restriction | str = Restriction.ICIN,
    m: int = 100,
    seed: int = 0,
    gibbs: Optional[GibbsConfig] = None,
    level: float = 0.95,
) -> AnalysisResult:
    """One method under the ITT model; reports the treatment coefficient."""
    if method == "BeforeDeletion" or method not in METHODS:
        raise ValueError(f"method {method!r} cannot be used for analysis")
    stream = derive_stream(seed, 0).child(method)
    res = estimate_with(method, data, restriction=restriction, m=m, stream=stream, gibbs=gibbs, model=ITT, level=level)
    est, var, ci, df = res["bt"]
    return AnalysisResult(method, "bt", float(est), float(np.sqrt(var)), (float(ci[0]), float(ci[1])), float(df),
                          data.n, int(data.complete_mask.sum()))
