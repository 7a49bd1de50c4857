"""Rolling real-time forecast exercise and its evaluation tables.

For every forecast origin the information set is rebuilt from the vintage in
force at that date, each model is estimated on the full (expanding) window,
and forecasts for every horizon are scored against the final vintage.  One
JSON record per origin x model x horizon is appended to ``records.jsonl``;
tables are always rebuilt from those records.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from .errors import CoverageError, DegenerateBenchmarkError, ExerciseError, InputError
from .forecast import log_pred_likelihood, point_error, rw_forecast, simulate_predictive
from .model import Family, ModelConfig, run_mcmc
from .rng import make_rng, stream_id_for
from .shrinkage import PriorKind
from .vintages import as_quarter, information_set, parse_vintage_csv, realized_value

log = logging.getLogger(__name__)

RW = "RW"
RECORDS_FILE = "records.jsonl"
HORIZON_LABELS = {1: "One-quarter ahead", 4: "One-year ahead"}
PRIOR_ORDER = [p.value for p in PriorKind]
FAMILY_ORDER = [f.value for f in Family]


@dataclass(frozen=True)
class ModelSpec:
    """A (family, prior) pair, or the random-walk benchmark."""

    family: str
    prior: str = RW

    def __post_init__(self):
        if self.family.upper() == RW:
            object.__setattr__(self, "family", RW)
            object.__setattr__(self, "prior", RW)
        else:
            try:
                object.__setattr__(self, "family", Family.parse(self.family).value)
                object.__setattr__(self, "prior", PriorKind.parse(self.prior).value)
            except ValueError as exc:
                raise InputError(str(exc)) from None

    @property
    def is_benchmark(self) -> bool:
        return self.family == RW

    @property
    def label(self) -> str:
        return RW if self.is_benchmark else f"{self.family}/{self.prior}"

    @classmethod
    def parse(cls, item) -> "ModelSpec":
        if isinstance(item, cls):
            return item
        if isinstance(item, str):
            if item.upper() == RW:
                return cls(RW)
            fam, _, prior = item.partition("/")
            return cls(fam, prior or PriorKind.NONE.value)
        return cls(item["family"], item.get("prior", PriorKind.NONE.value))

    def sort_key(self):
        if self.is_benchmark:
            return (-1, -1)
        return (FAMILY_ORDER.index(self.family), PRIOR_ORDER.index(self.prior))


@dataclass(frozen=True)
class ExerciseConfig:
    """Settings of one real-time exercise (one economy).

    Attributes
    ----------
    economy : str
        Label used in tables.
    vintage_file : str
        Vintage CSV; relative paths are resolved against the config file.
    first_origin, last_origin : str
        Forecast origins are the vintage quarters within this range
        (``last_origin`` defaults to the final vintage).
    sample_start : str, optional
        Observations before this quarter are dropped.
    horizons : tuple of int
    models : tuple of ModelSpec
    chains : int
        Independent chains per job, pooled before forecasting.
    seed : int
    mcmc : dict
        Extra ModelConfig settings (burn_in, keep, hyperparameters).
    max_failed_fraction : float
        Aggregation is refused above this share of failed origins.
    """

    economy: str
    vintage_file: str
    first_origin: str
    last_origin: str | None = None
    sample_start: str | None = None
    horizons: tuple = (1, 4)
    models: tuple = ()
    chains: int = 1
    seed: int = 0
    mcmc: dict = field(default_factory=dict)
    max_failed_fraction: float = 0.10

    def __post_init__(self):
        horizons = tuple(int(h) for h in self.horizons)
        if not horizons or min(horizons) < 1:
            raise InputError("horizons must be a non-empty list of positive integers")
        models = tuple(sorted({ModelSpec.parse(m) for m in self.models}, key=ModelSpec.sort_key))
        if not models:
            raise InputError("no models configured")
        if self.chains < 1:
            raise InputError("chains must be >= 1")
        object.__setattr__(self, "horizons", tuple(sorted(set(horizons))))
        object.__setattr__(self, "models", models)
        for key in ("family", "prior", "seed", "stream_id"):
            if key in self.mcmc:
                raise InputError(f"'{key}' is set per job and cannot appear under mcmc")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExerciseConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown exercise settings: {sorted(unknown)}")
        if base_dir is not None and "vintage_file" in d:
            path = Path(d["vintage_file"])
            if not path.is_absolute():
                d["vintage_file"] = str(Path(base_dir) / path)
        for key in ("first_origin", "last_origin", "sample_start"):
            if d.get(key) is not None:
                d[key] = str(d[key])
        return cls(**d)

    @classmethod
    def from_yaml(cls, path) -> "ExerciseConfig":
        with open(path, encoding="utf-8") as fh:
            d = yaml.safe_load(fh)
        if not isinstance(d, dict):
            raise InputError(f"{path}: expected a mapping at the top level")
        return cls.from_dict(d, base_dir=Path(path).parent)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["horizons"] = list(self.horizons)
        out["models"] = [{"family": m.family, "prior": m.prior} for m in self.models]
        return out

    def model_config(self, spec: ModelSpec, stream_id: int, seed: int | None = None) -> ModelConfig:
        return ModelConfig.from_dict({**self.mcmc, "family": spec.family, "prior": spec.prior,
                                      "seed": self.seed if seed is None else seed, "stream_id": stream_id})


# ---------------------------------------------------------------------------
# scores


def relative_rmse(model_errors, bench_errors) -> float:
    """RMSE of the model divided by RMSE of the benchmark."""
    m = np.asarray(model_errors, dtype=float)
    b = np.asarray(bench_errors, dtype=float)
    if m.size == 0 or m.shape != b.shape:
        raise InputError("error lists must be non-empty and of equal length")
    denom = math.sqrt(float(np.mean(b**2)))
    if denom == 0.0:
        raise DegenerateBenchmarkError("benchmark RMSE is zero")
    return math.sqrt(float(np.mean(m**2))) / denom


def lpl_difference(model_lpls, bench_lpls) -> float:
    """Average log predictive likelihood of the model minus that of the benchmark."""
    m = np.asarray(model_lpls, dtype=float)
    b = np.asarray(bench_lpls, dtype=float)
    if m.size == 0 or m.shape != b.shape:
        raise InputError("LPL lists must be non-empty and of equal length")
    return float(m.mean() - b.mean())


# ---------------------------------------------------------------------------
# jobs


@dataclass(frozen=True)
class _Job:
    economy: str
    origin: str
    spec: ModelSpec
    series: tuple  # inflation values of the information set
    last_date: str
    targets: tuple  # (horizon, target, realized)


def _base_record(job: _Job, horizon: int, target: str) -> dict:
    return {"economy": job.economy, "origin": job.origin, "model": job.spec.family,
            "prior": job.spec.prior, "horizon": horizon, "target": target}


def _run_job(job: _Job, config: ExerciseConfig) -> list[dict]:
    y = np.asarray(job.series)
    out = []
    if job.spec.is_benchmark:
        for horizon, target, realized in job.targets:
            dens = rw_forecast(y, horizon)
            out.append({**_base_record(job, horizon, target), "status": "ok", "point": dens.point,
                        "realized": realized, "error": point_error(dens.point, realized),
                        "lpl": log_pred_likelihood(dens, realized)})
        return out
    key = (job.economy, job.origin, job.spec.family, job.spec.prior)
    try:
        draws = None
        for chain in range(config.chains):
            cfg = config.model_config(job.spec, stream_id_for(*key, "chain", chain))
            d = run_mcmc(y, None, cfg)
            draws = d if draws is None else draws.concat(d)
        acc = draws.diagnostics.get("h_acceptance")
        if acc is None:
            acc = float(np.mean([c["h_acceptance"] for c in draws.diagnostics["chains"]]))
        for horizon, target, realized in job.targets:
            rng = make_rng(config.seed, stream_id_for(*key, "horizon", horizon))
            dens = simulate_predictive(draws, horizon, rng)
            out.append({**_base_record(job, horizon, target), "status": "ok", "point": dens.point,
                        "realized": realized, "error": point_error(dens.point, realized),
                        "lpl": log_pred_likelihood(dens, realized), "clamped": dens.clamped,
                        "median": dens.quantile(0.5),
                        "h_acceptance": acc})
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        out = [{**_base_record(job, h, t), "status": "failed", "reason": f"{type(exc).__name__}: {exc}"}
               for h, t, _ in job.targets]
    return out


def _run_job_star(args):
    return _run_job(*args)


def _record_key(rec: dict):
    return (rec["origin"], rec["model"], rec["prior"], rec["horizon"])


def load_records(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _build_jobs(config: ExerciseConfig, vs) -> list[_Job]:
    first = as_quarter(config.first_origin)
    last = as_quarter(config.last_origin) if config.last_origin else vs.vintages[-1]
    origins = [v for v in vs.vintages if first <= v <= last]
    if not origins:
        raise InputError(f"no vintages between {first} and {last}")
    jobs = []
    for origin in origins:
        pi = information_set(vs, origin, start=config.sample_start)
        last_obs = pi.index[-1]
        targets = []
        for h in config.horizons:
            target = last_obs + h
            try:
                realized = realized_value(vs, target)
            except CoverageError:
                continue
            targets.append((h, str(target), realized))
        if not targets:
            continue
        for spec in config.models:
            jobs.append(_Job(config.economy, str(origin), spec, tuple(pi.to_numpy().tolist()),
                             str(last_obs), tuple(targets)))
    return jobs


def run_exercise(config: ExerciseConfig, out_dir, jobs: int = 1) -> "EvaluationTable":
    """Run (or resume) the exercise, appending records under ``out_dir``.

    Jobs already present in the record file are skipped, so adding later
    origins leaves earlier records untouched.  Output is independent of
    ``jobs``: results are written in job order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    vs = parse_vintage_csv(config.vintage_file)
    rec_path = out_dir / RECORDS_FILE
    done = {_record_key(r) for r in load_records(rec_path)}
    todo = [j for j in _build_jobs(config, vs)
            if any((j.origin, j.spec.family, j.spec.prior, h) not in done for h, _, _ in j.targets)]
    log.info("%s: %d jobs to run (%d records already present)", config.economy, len(todo), len(done))

    def write(records):
        with open(rec_path, "a", encoding="utf-8") as fh:
            for rec in records:
                if _record_key(rec) in done:
                    continue
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
                _log_record(rec)

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for records in pool.map(_run_job_star, [(j, config) for j in todo]):
                write(records)
    else:
        for job in todo:
            write(_run_job(job, config))
    return build_table(load_records(rec_path), config)


def _log_record(rec: dict):
    if rec["status"] != "ok":
        log.warning("%s %s/%s h=%d failed: %s", rec["origin"], rec["model"], rec["prior"],
                    rec["horizon"], rec["reason"])
    elif "h_acceptance" in rec:
        log.info("%s %s/%s h=%d acceptance %.3f", rec["origin"], rec["model"], rec["prior"],
                 rec["horizon"], rec["h_acceptance"])


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class EvaluationTable:
    """Relative RMSE and LPL difference per economy, horizon, family and prior."""

    frame: pd.DataFrame  # economy, horizon, model, prior, rel_rmse, lpl_diff, n

    def value(self, economy, horizon, model, prior=RW):
        row = self.frame[(self.frame.economy == economy) & (self.frame.horizon == horizon)
                         & (self.frame.model == model) & (self.frame.prior == prior)]
        if row.empty:
            raise KeyError((economy, horizon, model, prior))
        return float(row.rel_rmse.iloc[0]), float(row.lpl_diff.iloc[0])

    def render(self) -> str:
        """Plain-text layout: economy, then horizon blocks, prior rows x RMSE/LPL columns."""
        lines = []
        fams = [f for f in FAMILY_ORDER if f in set(self.frame.model)]
        cols = fams or [RW]
        width = 9
        head1 = " " * 8 + "RMSE".center(width * len(cols)) + "LPL".center(width * len(cols))
        head2 = f"{'Model':<8}" + "".join(f"{c:>{width}}" for c in cols) * 2
        for econ, eframe in self.frame.groupby("economy", sort=False):
            lines += [str(econ), head1.rstrip(), head2]
            for horizon, hframe in eframe.groupby("horizon", sort=True):
                lines.append(f"  {HORIZON_LABELS.get(horizon, f'{horizon}-step ahead')}")
                priors = [p for p in [RW] + PRIOR_ORDER if p in set(hframe.prior)]
                for prior in priors:
                    pf = hframe[hframe.prior == prior]
                    cells = []
                    for metric in ("rel_rmse", "lpl_diff"):
                        for c in cols:
                            sel = pf if prior == RW else pf[pf.model == c]
                            cells.append(f"{sel[metric].iloc[0]:>{width}.3f}" if not sel.empty else " " * (width - 1) + "-")
                    lines.append(f"{prior:<8}" + "".join(cells))
            lines.append("")
        return "\n".join(lines)

    def to_csv(self, path=None, sep=","):
        return self.frame.to_csv(path, sep=sep, index=False, float_format="%.6f")


def build_table(records, config: ExerciseConfig | None = None, max_failed_fraction=None) -> EvaluationTable:
    """Aggregate per-origin records into relative RMSEs and LPL differences.

    Model and benchmark are compared on the origins where both succeeded.
    Raises ExerciseError when a model failed at more than the allowed share
    of origins.
    """
    if max_failed_fraction is None:
        max_failed_fraction = config.max_failed_fraction if config else 0.10
    df = pd.DataFrame(records)
    if df.empty:
        raise InputError("no records to aggregate")
    if config is not None:
        wanted = {(m.family, m.prior) for m in config.models}
        df = df[[(m, p) in wanted for m, p in zip(df.model, df.prior)]]
    rows = []
    for (econ, horizon), g in df.groupby(["economy", "horizon"], sort=True):
        bench = g[(g.model == RW) & (g.status == "ok")].set_index("origin")
        if bench.empty:
            raise ExerciseError(f"{econ} h={horizon}: no benchmark records")
        for (model, prior), mg in g.groupby(["model", "prior"], sort=False):
            if model == RW:
                rows.append((econ, horizon, RW, RW, 1.0, 0.0, len(bench)))
                continue
            failed = int((mg.status != "ok").sum())
            if failed > max_failed_fraction * len(mg):
                raise ExerciseError(f"{econ} {model}/{prior} h={horizon}: {failed} of {len(mg)} origins failed")
            ok = mg[mg.status == "ok"].set_index("origin")
            common = ok.index.intersection(bench.index)
            rows.append((econ, horizon, model, prior,
                         relative_rmse(ok.loc[common, "error"], bench.loc[common, "error"]),
                         lpl_difference(ok.loc[common, "lpl"], bench.loc[common, "lpl"]),
                         len(common)))
    frame = pd.DataFrame(rows, columns=["economy", "horizon", "model", "prior", "rel_rmse", "lpl_diff", "n"])
    frame["_m"] = [(-1 if m == RW else FAMILY_ORDER.index(m)) for m in frame.model]
    frame["_p"] = [(-1 if p == RW else PRIOR_ORDER.index(p)) for p in frame.prior]
    frame = frame.sort_values(["horizon", "_p", "_m"], kind="stable").drop(columns=["_m", "_p"])
    return EvaluationTable(frame.reset_index(drop=True))


# ---------------------------------------------------------------------------
# band files


BAND_COLUMNS = ["quantity", "date", "median", "lo68", "hi68", "lo90", "hi90"]


def emit_band_csv(summary: pd.DataFrame, path, dates=None) -> Path:
    """Write posterior bands (output of ``summarize_paths``) with one row per quantity and date.

    ``dates`` optionally maps the time index ``t`` to observation labels.
    """
    if summary is None or len(summary) == 0:
        raise InputError("empty path summary")
    df = summary.copy()
    if dates is not None:
        labels = np.asarray([str(d) for d in dates])
        df["date"] = labels[df["t"].to_numpy()]
    else:
        df["date"] = df["t"]
    path = Path(path)
    df[BAND_COLUMNS].to_csv(path, index=False, float_format="%.8g")
    return path

