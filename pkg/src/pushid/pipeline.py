"""Batch stages behind the command-line interface.

Each stage reads files, writes files and returns a JSON-ready report, so
stages can be run one at a time and swapped for external tools.  Per-trial
work runs on a bounded thread pool; a failing trial is recorded in the
report and never stops the batch.  Results are merged by trial id, so the
output does not depend on scheduling.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .config import RunConfig, parse_spec
from .errors import PushIdError, UnsupportedStrategy
from .fitlaw import (ControlLawSpec, FitResult, SegmentFit, fit_segments, fit_trial,
                     predicted_acceleration)
from .plot import initial_state_figure, projection_figure, save_svg, write_series_csv
from .segment import classify_strategy, segment, trajectory_features
from .signal import derive_kinematics, shift_origin, trim_to_push
from .simulate import GainSchedule, synth_archetype, synth_pd_trial
from .stats import (format_fit_table, format_selection_table, group_fit_stats,
                    initial_state, selection_stats)
from .trialdata import (ReferenceState, StartMode, StrategyTag, Trial, load_treadmill,
                        load_trial, save_trial)

TREADMILL_SUFFIX = ".treadmill.csv"
META_SUFFIX = ".meta.json"


# ------------------------------------------------------------------ helpers


def write_json(obj, path) -> Path:
    """Stable JSON: sorted keys, fixed indentation, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8", newline="\n")
    return path


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj


def _describe(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


@dataclass
class Batch:
    """Accumulates per-trial records for one stage."""

    command: str
    config: RunConfig
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    def report(self, **extra) -> dict:
        key = lambda r: (r.get("trial_id", ""), r.get("spec", {}).get("label", "")  # noqa: E731
                         if isinstance(r.get("spec"), dict) else str(r.get("spec", "")))
        return {
            "command": self.command,
            "config": self.config.to_dict(),
            "results": sorted(self.records, key=key),
            "failures": sorted(self.failures, key=key),
            "excluded": sorted(self.excluded, key=key),
            "skipped": sorted(self.skipped, key=key),
            **extra,
        }


def discover(input_dir) -> list[Path]:
    """Trial CSVs in ``input_dir`` (treadmill logs excluded), sorted by name."""
    root = Path(input_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"input directory {root} does not exist")
    return sorted(p for p in root.glob("*.csv") if not p.name.endswith(TREADMILL_SUFFIX))


def _companion(path: Path, suffix: str) -> Optional[Path]:
    candidate = path.with_name(path.stem + suffix)
    return candidate if candidate.exists() else None


def read_trial(path: Path) -> Trial:
    return load_trial(path, _companion(path, META_SUFFIX))


def preprocess(trial: Trial, config: RunConfig, treadmill_path: Optional[Path] = None) -> Trial:
    """Trim to the treadmill stop, derive kinematics, shift the origin."""
    if treadmill_path is not None:
        trial = trim_to_push(trial, load_treadmill(treadmill_path), config.speed_epsilon)
    missing = trial.velocity is None or trial.acceleration is None
    if config.derive == "always" or (config.derive == "auto" and missing):
        trial = derive_kinematics(trial, config.filter_spec(trial.sample_rate), config.prefilter_hz)
    if config.shift_origin:
        trial = shift_origin(trial)
    return trial


def _selected(trial: Trial, config: RunConfig) -> Optional[str]:
    """Reason the trial is excluded by the cohort filters, or None."""
    if trial.abandoned and not config.include_abandoned:
        return "abandoned"
    if config.start_mode != "any" and trial.start_mode is not StartMode(config.start_mode):
        return f"start mode {trial.start_mode.value}"
    return None


def _run(paths: list[Path], work: Callable[[Path], dict], workers: int) -> list[dict]:
    if workers <= 1 or len(paths) <= 1:
        return [work(p) for p in paths]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, paths))


def _load_batch(batch: Batch, input_dir, work: Callable[[Trial, Path], list[dict]]) -> None:
    """Load, filter and preprocess each trial, then hand it to ``work``.

    ``work`` returns records tagged ``kind`` in {result, failure, skipped}.
    """
    paths = discover(input_dir)
    config = batch.config

    def one(path: Path) -> list[dict]:
        stem = path.stem
        try:
            trial = read_trial(path)
        except Exception as exc:  # noqa: BLE001 - any load error is isolated per trial
            return [{"kind": "failure", "trial_id": stem, "stage": "load", "error": _describe(exc)}]
        reason = _selected(trial, config)
        if reason:
            return [{"kind": "excluded", "trial_id": trial.id, "reason": reason}]
        try:
            trial = preprocess(trial, config, _companion(path, TREADMILL_SUFFIX))
        except Exception as exc:  # noqa: BLE001
            return [{"kind": "failure", "trial_id": trial.id, "stage": "preprocess",
                     "error": _describe(exc)}]
        try:
            return work(trial, path)
        except Exception as exc:  # noqa: BLE001
            return [{"kind": "failure", "trial_id": trial.id, "stage": batch.command,
                     "error": _describe(exc)}]

    for group in _run(paths, one, config.workers):
        for record in group:
            kind = record.pop("kind")
            {"result": batch.records, "failure": batch.failures, "excluded": batch.excluded,
             "skipped": batch.skipped}[kind].append(record)


def _strategy_of(trial: Trial, config: RunConfig) -> tuple[StrategyTag, str]:
    if trial.strategy is not None:
        return trial.strategy, "tagged"
    return classify_strategy(trial, config.classifier()), "classified"


def _check_nonempty(batch: Batch) -> None:
    if not (batch.records or batch.failures or batch.excluded or batch.skipped):
        batch.failures.append({"trial_id": "", "stage": batch.command,
                               "error": "EmptyGroup: no trials found in the input directory"})


# ------------------------------------------------------------------ simulate


def run_simulate(config: RunConfig, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.sim_strategy == "all":
        kinds = [t.slug for t in StrategyTag]
    else:
        kinds = [config.sim_strategy]
    batch = Batch("simulate", config)
    modes = (StartMode.INFORMED, StartMode.RANDOM)
    for kind in kinds:
        for i in range(config.sim_n):
            seed = config.seed + i
            if kind == "pd":
                trial, gains = synth_pd_trial(seed, config.pd_params())
                truth = {"trial_id": trial.id, "strategy": None, "breakpoints": [],
                         "labels": ["full"], "schedule": GainSchedule.constant(gains).as_dict(),
                         "impulses": []}
            else:
                arch = synth_archetype(StrategyTag.parse(kind), seed, config.archetype_params())
                trial, truth = arch.trial, arch.ground_truth()
            trial = replace(trial, start_mode=modes[i % 2])
            save_trial(trial, out / f"{trial.id}.csv")
            write_json(truth, out / f"{trial.id}.truth.json")
            batch.records.append({"trial_id": trial.id, "strategy": truth["strategy"],
                                  "n_samples": len(trial)})
    return batch.report()


# ------------------------------------------------------------------ preprocess / classify / segment


def run_preprocess(config: RunConfig, input_dir, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    batch = Batch("preprocess", config)

    def work(trial: Trial, path: Path) -> list[dict]:
        save_trial(trial, out / f"{trial.id}.csv")
        return [{"kind": "result", "trial_id": trial.id, "n_samples": len(trial),
                 "origin_offset_m": trial.origin_offset}]

    _load_batch(batch, input_dir, work)
    _check_nonempty(batch)
    return batch.report()


def run_classify(config: RunConfig, input_dir, out_dir) -> dict:
    out = Path(out_dir)
    batch = Batch("classify", config)

    def work(trial: Trial, path: Path) -> list[dict]:
        features = trajectory_features(trial, config.classifier())
        tag = classify_strategy(trial, config.classifier())
        record = {"trial_id": trial.id, "strategy": tag.value, "breakpoints": [], "labels": [],
                  "features": {"n_valleys": features["n_valleys"],
                               "max_rise": features["max_rise"],
                               "toe_rise": features["toe_rise"]}}
        if trial.strategy is not None:
            record["tagged_strategy"] = trial.strategy.value
        try:
            seg = segment(trial, tag)
            record.update(breakpoints=list(seg.breakpoints), labels=list(seg.phase_labels))
        except PushIdError:
            pass
        write_json(record, out / f"{trial.id}.classify.json")
        return [{"kind": "result", **record}]

    _load_batch(batch, input_dir, work)
    _check_nonempty(batch)
    return batch.report()


def run_segment(config: RunConfig, input_dir, out_dir) -> dict:
    out = Path(out_dir)
    batch = Batch("segment", config)

    def work(trial: Trial, path: Path) -> list[dict]:
        tag, source = _strategy_of(trial, config)
        try:
            seg = segment(trial, tag)
        except UnsupportedStrategy as exc:
            return [{"kind": "skipped", "trial_id": trial.id, "strategy": tag.value,
                     "reason": _describe(exc)}]
        record = {**seg.to_dict(trial.id), "strategy_source": source}
        write_json(record, out / f"{trial.id}.segment.json")
        return [{"kind": "result", **record}]

    _load_batch(batch, input_dir, work)
    _check_nonempty(batch)
    return batch.report()


# ------------------------------------------------------------------ fitting


def _spec_record(spec: ControlLawSpec) -> dict:
    return {**spec.as_dict(), "label": spec.label}


def fit_record(trial: Trial, strategy: Optional[StrategyTag], fit) -> dict:
    phases = fit.phases if isinstance(fit, SegmentFit) else (fit,)
    spec = phases[0].spec
    record = {
        "trial_id": trial.id,
        "strategy": strategy.value if strategy else None,
        "spec": _spec_record(spec),
        "reference": {"p_star": phases[0].reference.p_star,
                      "v_star": phases[0].reference.v_star},
        "phases": [p.to_dict() for p in phases],
        "aggregate": {"rms": fit.rms, "r2": fit.r2},
        "warnings": list(fit.warnings),
    }
    if isinstance(fit, SegmentFit):
        record["breakpoints"] = list(fit.breakpoints)
    return record


def spec_from_record(spec: dict) -> ControlLawSpec:
    return ControlLawSpec.parse(spec["law"], spec["metric"], spec["lambda"],
                                spec.get("derivative_columns") == "powers")


def fit_from_record(record: dict):
    """Rebuild a FitResult (one phase) or SegmentFit from a fit record."""
    spec = spec_from_record(record["spec"])
    ref = ReferenceState(record["reference"]["p_star"], record["reference"]["v_star"])
    phases = []
    for p in record["phases"]:
        columns = spec.columns()
        phases.append(FitResult(spec, columns, np.array([p["gains"][c] for c in columns]),
                                p["rms"], p["r2"], p["n"], ref, p["label"]))
    if "breakpoints" in record:
        agg = record["aggregate"]
        return SegmentFit(tuple(phases), agg["rms"], agg["r2"], sum(p["n"] for p in record["phases"]),
                          tuple(record["breakpoints"]))
    return phases[0]


def _group_tables(records: list[dict], by_phase: bool) -> tuple[list, str]:
    """Group stats per (spec, strategy[/phase]) plus the matching text tables."""
    by_spec: dict[str, list] = {}
    for r in records:
        fit = fit_from_record(r)
        phases = fit.phases if isinstance(fit, SegmentFit) else (fit,)
        strategy = r["strategy"] or "untagged"
        for phase in phases:
            key = f"{strategy}/{phase.label}" if by_phase else strategy
            by_spec.setdefault(phase.spec.label, []).append((key, phase))
    if not by_spec:
        return [], ""
    groups = [g for label in sorted(by_spec) for g in group_fit_stats(by_spec[label])]
    return [g.to_dict() for g in groups], format_fit_table(groups)


def _run_fit(config: RunConfig, input_dir, out_dir, segmented: bool) -> tuple[dict, str]:
    out = Path(out_dir)
    command = "segment-fit" if segmented else "fit"
    suffix = "segfit" if segmented else "fit"
    batch = Batch(command, config)
    specs = config.control_specs()

    def work(trial: Trial, path: Path) -> list[dict]:
        tag = trial.strategy
        seg = None
        if segmented:
            tag, _ = _strategy_of(trial, config)
            try:
                seg = segment(trial, tag)
            except UnsupportedStrategy as exc:
                return [{"kind": "skipped", "trial_id": trial.id, "strategy": tag.value,
                         "reason": _describe(exc)}]
        records = []
        for spec in specs:
            try:
                fit = fit_segments(trial, seg, spec) if segmented else fit_trial(trial, spec)
            except Exception as exc:  # noqa: BLE001
                records.append({"kind": "failure", "trial_id": trial.id, "stage": command,
                                "spec": _spec_record(spec), "error": _describe(exc)})
                continue
            record = fit_record(trial, tag, fit)
            write_json(record, out / f"{trial.id}.{spec.label}.{suffix}.json")
            records.append({"kind": "result", **record})
        return records

    _load_batch(batch, input_dir, work)
    _check_nonempty(batch)
    groups, table = _group_tables(batch.records, by_phase=segmented)
    if not batch.records and not batch.failures:
        batch.failures.append({"trial_id": "", "stage": command,
                               "error": "EmptyGroup: no successful fits to summarise"})
    report = batch.report(groups=groups)
    if table:
        (out / f"{suffix}_table.txt").write_text(table, encoding="utf-8", newline="\n")
    return report, table


def run_fit(config: RunConfig, input_dir, out_dir) -> dict:
    return _run_fit(config, input_dir, out_dir, segmented=False)[0]


def run_segment_fit(config: RunConfig, input_dir, out_dir) -> dict:
    return _run_fit(config, input_dir, out_dir, segmented=True)[0]


# ------------------------------------------------------------------ stats


def _read_fit_records(fits_dir, suffix: str) -> list[dict]:
    if fits_dir is None:
        return []
    return [json.loads(p.read_text(encoding="utf-8"))
            for p in sorted(Path(fits_dir).glob(f"*.{suffix}.json"))]


def run_stats(config: RunConfig, input_dir, out_dir, fits_dir=None) -> dict:
    """Strategy-selection statistics over trials, plus group stats of any fit records."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    batch = Batch("stats", config)
    trials: dict[str, Trial] = {}

    def work(trial: Trial, path: Path) -> list[dict]:
        tag, source = _strategy_of(trial, config)
        trial = replace(trial, strategy=tag)
        trials[trial.id] = trial
        p0, v0 = initial_state(trial, absolute=True)
        return [{"kind": "result", "trial_id": trial.id, "strategy": tag.value,
                 "strategy_source": source, "initial_state": [p0, v0]}]

    _load_batch(batch, input_dir, work)
    _check_nonempty(batch)
    text = []
    selection = None
    if trials:
        sel = selection_stats([trials[k] for k in sorted(trials)], absolute=True)
        selection = sel.to_dict()
        text.append(format_selection_table(sel))
    fit_groups, fit_table = _group_tables(_read_fit_records(fits_dir, "fit"), by_phase=False)
    seg_groups, seg_table = _group_tables(_read_fit_records(fits_dir, "segfit"), by_phase=True)
    text += [t for t in (fit_table, seg_table) if t]
    (out / "stats_tables.txt").write_text("\n".join(text), encoding="utf-8", newline="\n")
    return batch.report(selection=selection, fit_groups=fit_groups, segment_groups=seg_groups)


# ------------------------------------------------------------------ plot


def run_plot(config: RunConfig, input_dir, out_dir, fits_dir=None) -> dict:
    """Projection SVGs per trial, the initial-state scatter, and a series CSV.

    Each projection needs a fit record for ``config.plot_spec``; a segment
    fit is preferred over a full-trial fit when both exist.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    batch = Batch("plot", config)
    label = parse_spec(config.plot_spec, config.lam).label
    fits_root = Path(fits_dir) if fits_dir is not None else None
    prepared: dict[str, tuple] = {}

    def work(trial: Trial, path: Path) -> list[dict]:
        tag, _ = _strategy_of(trial, config)
        record = None
        for suffix in ("segfit", "fit"):
            candidate = fits_root / f"{trial.id}.{label}.{suffix}.json" if fits_root else None
            if candidate is not None and candidate.exists():
                record = json.loads(candidate.read_text(encoding="utf-8"))
                break
        if record is None:
            raise FileNotFoundError(f"no {label} fit record for trial {trial.id}")
        fit = fit_from_record(record)
        predicted = predicted_acceleration(trial, fit)
        if isinstance(fit, SegmentFit):
            breakpoints = fit.breakpoints
        else:
            try:
                breakpoints = segment(trial, tag).breakpoints
            except PushIdError:
                breakpoints = ()
        prepared[trial.id] = (trial, tag, predicted, tuple(breakpoints))
        return [{"kind": "result", "trial_id": trial.id, "strategy": tag.value,
                 "breakpoints": list(breakpoints),
                 "files": [f"{trial.id}.position.svg", f"{trial.id}.velocity.svg"]}]

    _load_batch(batch, input_dir, work)
    _check_nonempty(batch)
    # matplotlib rendering stays on this thread
    series = []
    states = []
    for trial_id in sorted(prepared):
        trial, tag, predicted, breakpoints = prepared[trial_id]
        for view in ("position", "velocity"):
            fig, s = projection_figure(trial, view, predicted, breakpoints)
            save_svg(fig, out / f"{trial.id}.{view}.svg")
            series += s
        p0, v0 = initial_state(trial, absolute=True)
        states.append((p0, v0, tag.value))
    extra = {}
    if states:
        fig, s = initial_state_figure(states)
        save_svg(fig, out / "initial_states.svg")
        series += s
        write_series_csv(series, out / "plot_series.csv")
        extra["files"] = ["initial_states.svg", "plot_series.csv"]
    else:
        batch.failures.append({"trial_id": "", "stage": "plot",
                               "error": "EmptyPlot: nothing to plot"})
    return batch.report(**extra)
