"""
Batch service: runs every planner on every generated field, aggregates the
per-(concentration, planner) summary and writes the result tree
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, select_autoescape

from .. import __version__
from ..core.errors import IceNavError, TrialTimeout
from ..core.scheduler import TrialScheduler
from ..models.profiles import load_profile
from ..models.schemas import ExperimentConfig, ExperimentSpec, PlannerType, TrialMetrics, TrialRecordFile
from ..simulation.icefield import FieldSpec, IceField, generate_field, save_field
from .trial_service import TrialRecord, run_trial
from . import plot_service

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
METRIC_COLUMNS = list(TrialMetrics.model_fields)


@dataclass(eq=False)
class BatchResult:
    summary: pd.DataFrame
    per_trial: pd.DataFrame
    records: List[TrialRecordFile]
    failures: List[Dict[str, Any]]
    output_dir: Path
    degenerate: bool = False
    plots: List[str] = field(default_factory=list)


def field_seed(base_seed: int, concentration_index: int, k: int) -> int:
    return base_seed * 100003 + concentration_index * 1000 + k


def trial_name(concentration: float, seed: int, planner: PlannerType) -> str:
    return f"c{round(concentration * 100):02d}_s{seed}_{PlannerType(planner).value}"


def _run_trial_task(field_: IceField, planner: PlannerType, config: ExperimentConfig,
                    concentration: float, trials_dir: str, save_logs: bool) -> TrialRecord:
    """Worker entry point: one trial, trimmed to what the parent aggregates"""
    name = trial_name(concentration, field_.seed, planner)
    event_log = str(Path(trials_dir) / f"{name}.events.ndjson") if save_logs else None
    trajectory_log = str(Path(trials_dir) / f"{name}.trajectory.csv") if save_logs else None
    try:
        record = run_trial(field_, planner, config, event_log_path=event_log, trajectory_path=trajectory_log)
    except TrialTimeout as e:
        if e.record is not None:
            e.record.concentration = concentration
            e.record.tracks, e.record.first_plan = {}, None
        raise
    record.concentration = concentration
    record.tracks, record.first_plan = {}, None
    return record


def success_rates(per_trial: pd.DataFrame) -> pd.Series:
    """
    Percentage of fields, per (concentration, planner), on which the planner's
    mean AND max impact force are both strictly lower than every other planner's.
    """
    wins: Dict[Tuple[float, str], int] = {}
    fields: Dict[float, int] = {}
    for (conc, _seed), group in per_trial.groupby(["concentration", "field_seed"], sort=True):
        fields[conc] = fields.get(conc, 0) + 1
        for _, row in group.iterrows():
            others = group[group["planner"] != row["planner"]]
            strictly_lowest = bool(np.all(row["mean_impact_force"] < others["mean_impact_force"])
                                   and np.all(row["max_impact_force"] < others["max_impact_force"]))
            key = (conc, row["planner"])
            wins[key] = wins.get(key, 0) + int(strictly_lowest)
    return pd.Series({key: 100.0 * n / fields[key[0]] for key, n in wins.items()}, name="success_rate")


def summarize(per_trial: pd.DataFrame, failures: List[Dict[str, Any]], planners: List[PlannerType]) -> pd.DataFrame:
    """One row per (concentration, planner) with trial counts, metric means and success rate"""
    failed = pd.DataFrame(failures, columns=["concentration", "planner", "field_seed", "error"])
    concentrations = sorted(set(per_trial["concentration"]) | set(failed["concentration"].dropna()))
    rates = success_rates(per_trial) if len(per_trial) else pd.Series(dtype=float)
    rows = []
    for conc in concentrations:
        for planner in sorted(p.value for p in planners):
            done = per_trial[(per_trial["concentration"] == conc) & (per_trial["planner"] == planner)]
            n_failed = int(((failed["concentration"] == conc) & (failed["planner"] == planner)).sum())
            row: Dict[str, Any] = {"concentration": conc, "planner": planner,
                                   "trials": len(done), "failures": n_failed}
            for column in METRIC_COLUMNS:
                row[column] = float(done[column].mean()) if len(done) else float("nan")
            row["success_rate"] = float(rates.get((conc, planner), 0.0))
            row["degenerate"] = len(planners) == 1
            rows.append(row)
    return pd.DataFrame(rows).sort_values(["concentration", "planner"]).reset_index(drop=True)


def render_report(result: BatchResult, spec: ExperimentSpec, config: ExperimentConfig) -> str:
    env = Environment(loader=FileSystemLoader(str(TEMPLATE_DIR)), autoescape=select_autoescape(["html"]))
    template = env.get_template("report.html")
    html = template.render(
        version=__version__,
        generated=datetime.now(timezone.utc).strftime("%Y-%m-%d %H:%M UTC"),
        spec=spec,
        profile=config.profile,
        summary=result.summary.to_dict(orient="records"),
        failures=result.failures,
        plots=[Path(p).relative_to(result.output_dir).as_posix() for p in result.plots],
        degenerate=result.degenerate,
    )
    path = result.output_dir / "report.html"
    path.write_text(html, encoding="utf-8")
    return str(path)


def run_batch(spec: ExperimentSpec, config: Optional[ExperimentConfig] = None) -> BatchResult:
    """
    Generate spec.fields_per_concentration fields per concentration, run every
    planner on each, and write summary.csv, trials/*.json, failures.json,
    plots/*.svg and report.html under spec.output_dir.

    Failing trials are recorded and skipped; timed-out trials keep their
    partial record in failures.json.
    """
    config = config or load_profile(spec.profile, spec.overrides)
    out = Path(spec.output_dir)
    trials_dir, fields_dir, plots_dir = out / "trials", out / "fields", out / "plots"
    for directory in (trials_dir, fields_dir, plots_dir):
        directory.mkdir(parents=True, exist_ok=True)
    planners = [PlannerType(p) for p in spec.planners]
    logger.info(f"Starting batch: {len(spec.concentrations)} concentration(s) × {spec.fields_per_concentration} "
                f"field(s) × {len(planners)} planner(s), profile {config.profile}")

    failures: List[Dict[str, Any]] = []
    fields: Dict[int, IceField] = {}
    tasks, labels, keys = [], [], []
    for ci, conc in enumerate(spec.concentrations):
        field_spec = FieldSpec.from_config(config, conc)
        for k in range(spec.fields_per_concentration):
            seed = field_seed(spec.seed, ci, k)
            try:
                field_ = generate_field(field_spec, seed)
            except IceNavError as e:
                logger.error(f"Failed to generate field seed={seed} at concentration {conc}: {e}")
                failures.extend({"concentration": conc, "planner": p.value, "field_seed": seed,
                                 "error": f"{type(e).__name__}: {e}"} for p in planners)
                continue
            fields[seed] = field_
            save_field(field_, str(fields_dir / f"field_{seed}.json"))
            for planner in planners:
                tasks.append((field_, planner, config, conc, str(trials_dir), spec.save_logs))
                labels.append(trial_name(conc, seed, planner))
                keys.append((conc, seed, planner))

    outcomes = TrialScheduler(spec.parallelism).run(_run_trial_task, tasks, labels)

    records: List[TrialRecordFile] = []
    rows: List[Dict[str, Any]] = []
    trajectories: Dict[int, Dict[str, np.ndarray]] = {}
    for outcome, (conc, seed, planner) in zip(outcomes, keys):
        if not outcome.ok:
            failure = {"concentration": conc, "planner": planner.value, "field_seed": seed,
                       "error": f"{type(outcome.error).__name__}: {outcome.error}"}
            partial = getattr(outcome.error, "record", None)
            if partial is not None:
                failure["partial"] = partial.to_file().model_dump(mode="json")
            failures.append(failure)
            continue
        record: TrialRecord = outcome.result
        record_file = record.to_file()
        records.append(record_file)
        (trials_dir / f"{outcome.label}.json").write_text(record_file.model_dump_json(indent=2))
        rows.append({"concentration": conc, "planner": planner.value, "field_seed": seed,
                     **record.metrics.model_dump()})
        trajectories.setdefault(seed, {})[planner.value] = record.trajectory

    per_trial = pd.DataFrame(rows, columns=["concentration", "planner", "field_seed"] + METRIC_COLUMNS)
    summary = summarize(per_trial, failures, planners)
    summary.to_csv(out / "summary.csv", index=False, float_format="%.6g")
    (out / "failures.json").write_text(json.dumps(failures, indent=2, default=str))

    result = BatchResult(summary=summary, per_trial=per_trial, records=records, failures=failures,
                         output_dir=out, degenerate=len(planners) == 1)
    try:
        result.plots = list(plot_service.plot_batch(per_trial, str(plots_dir), fields, trajectories))
        render_report(result, spec, config)
    except Exception as e:
        logger.error(f"Failed to write batch plots or report: {e}")
        raise
    logger.info(f"Finished batch: {len(records)} trials, {len(failures)} failure(s); results in {out}")
    return result
