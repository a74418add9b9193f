"""Monte Carlo coverage studies.

A cell is one (setting, method) pair run R times. Run r draws its data from
lane ``run/r/data`` and hands the method lane ``run/r/method/<tag>`` to the
interval constructor, so methods in the same cell see the same datasets and
never share resampling draws. Runs are mapped back in run order, so reports do
not depend on the number of worker processes.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.core.exceptions import MiBootError
from src.core.factory import EngineFactory, EstimatorFactory
from src.core.models import ExperimentConfig, MethodTag, SettingId
from src.data.repositories import ReportRepository
from src.services.interval_service import (
    IntervalService,
    bootstrap_then_mi,
    mi_then_bootstrap,
    point_from_original,
)
from src.services.simulation_service import SimulationService, data_stream
from src.simulation.settings import SettingSpec
from src.stochastics.streams import RngStream

logger = logging.getLogger(__name__)

ABORT_TOLERANCE = 0.05
SWEEP_FIELDS = ["method", "M", "coord", "coverage", "completed", "median_width"]


def method_stream(master_seed: int, run: int, method: MethodTag) -> RngStream:
    return RngStream(master_seed, ("run", run, "method", MethodTag(method).value))


def _build(config: ExperimentConfig, spec: SettingSpec):
    engine = EngineFactory().create_engine(
        config.engine,
        longitudinal=spec.id == SettingId.SETTING_4,
        strata_column=config.abb_strata_column,
    )
    estimator = EstimatorFactory().create_estimator(
        config.estimator, setting=config.setting, regimes=config.regimes, outcome_time=spec.horizon,
        fitting=config.gformula_fitting,
    )
    return engine, estimator


def interval_for_run(config: ExperimentConfig, spec: SettingSpec, method: MethodTag, run: int, M: int):
    """The interval run r of a cell builds, with the estimator that scored it"""
    engine, estimator = _build(config, spec)
    data = spec.generate(data_stream(config.master_seed, run))
    interval = IntervalService().construct(
        data, engine, estimator, config.plan(method, M), method_stream(config.master_seed, run, method)
    )
    return interval, estimator


def run_once(config: ExperimentConfig, spec: SettingSpec, method: MethodTag, run: int, M: int) -> Dict[str, Any]:
    """One Monte Carlo run; estimator or imputation failures mark it aborted"""
    try:
        interval, _ = interval_for_run(config, spec, method, run, M)
    except MiBootError as exc:
        return {"run": run, "status": "aborted", "error": f"{exc.__class__.__name__}: {exc}"}
    return {
        "run": run,
        "status": "ok",
        "lower": interval.lower.tolist(),
        "upper": interval.upper.tolist(),
        "point": None if interval.point is None else interval.point.tolist(),
        "se": None if interval.se is None else interval.se.tolist(),
        "dropped": interval.dropped_replicates,
    }


def _run_task(task) -> Dict[str, Any]:
    return run_once(*task)


def median(values: Sequence[float]) -> float:
    """Exact median; the mean of the central pair for even counts"""
    ordered = sorted(values)
    if not ordered:
        return math.nan
    middle = len(ordered) // 2
    if len(ordered) % 2:
        return float(ordered[middle])
    return (ordered[middle - 1] + ordered[middle]) / 2.0


def summarize(runs: List[Dict[str, Any]], truth: Sequence[float], coordinates: Sequence[str]) -> Dict[str, Any]:
    """Coverage, median width and standard-error summaries over completed runs"""
    completed = [run for run in runs if run["status"] == "ok"]
    aborted = len(runs) - len(completed)
    truth = np.asarray(truth, dtype=float)
    for run in completed:
        lower, upper = np.asarray(run["lower"]), np.asarray(run["upper"])
        run["covered"] = ((lower <= truth) & (truth <= upper)).tolist()
        run["width"] = (upper - lower).tolist()

    rows = []
    for j, coord in enumerate(coordinates):
        covered = [run["covered"][j] for run in completed]
        widths = [run["width"][j] for run in completed]
        points = [run["point"][j] for run in completed if run["point"] is not None]
        ses = [run["se"][j] for run in completed if run["se"] is not None]
        rows.append({
            "coord": coord,
            "truth": float(truth[j]),
            "coverage": sum(covered) / len(covered) if covered else math.nan,
            "coverage_runs": len(covered),
            "median_width": median(widths),
            "mean_point_estimate": float(np.mean(points)) if points else None,
            "simulated_se": float(np.std(points, ddof=1)) if len(points) > 1 else None,
            "mean_reported_se": float(np.mean(ses)) if ses else None,
        })
    return {
        "R": len(runs),
        "completed": len(completed),
        "aborted": aborted,
        "valid": aborted <= ABORT_TOLERANCE * len(runs),
        "dropped_replicate_total": int(sum(run["dropped"] for run in completed)),
        "coordinates": rows,
    }


class StudyService:
    def __init__(self, simulation_service: Optional[SimulationService] = None,
                 report_repo: Optional[ReportRepository] = None):
        self.simulation_service = simulation_service or SimulationService()
        self.report_repo = report_repo

    def resolve_spec(self, config: ExperimentConfig) -> SettingSpec:
        return self.simulation_service.get_spec(
            config.setting, config.n, config.sd_convention, config.a_source,
            config.horizon, config.regimes, config.oracle_subjects,
        )

    def _reports(self, config: ExperimentConfig) -> ReportRepository:
        return self.report_repo or ReportRepository(config.results_dir)

    def _map_runs(self, tasks: List[tuple], workers: int) -> List[Dict[str, Any]]:
        if workers <= 1:
            return [_run_task(task) for task in tasks]
        chunksize = max(1, len(tasks) // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_task, tasks, chunksize=chunksize))

    def run_cell(self, config: ExperimentConfig, method: MethodTag, M: Optional[int] = None,
                 spec: Optional[SettingSpec] = None, save: bool = True) -> Dict[str, Any]:
        """R runs of one method; returns the cell's report and writes it to disk"""
        method = MethodTag(method)
        M = M or config.M
        config.plan(method, M).check()
        spec = spec or self.resolve_spec(config)
        started = time.perf_counter()
        logger.info("cell setting=%s method=%s R=%d M=%d B=%d", config.setting.value, method.value, config.R, M, config.B)

        tasks = [(config, spec, method, run, M) for run in range(1, config.R + 1)]
        runs = self._map_runs(tasks, config.thread_budget)
        summary = summarize(runs, spec.truth, spec.coordinates)

        if summary["aborted"]:
            logger.warning("cell %s: %d of %d runs aborted", method.value, summary["aborted"], config.R)
        if not summary["valid"]:
            logger.error("cell %s marked invalid: more than %.0f%% of runs aborted",
                         method.value, 100 * ABORT_TOLERANCE)

        report = {
            "method": method.value,
            "M": M,
            "config": config.model_dump(mode="json"),
            "config_hash": config.config_hash(),
            "setting": spec.describe(),
            **summary,
            "runs": runs,
            "timing": {"wall_time_s": time.perf_counter() - started},
        }
        if save:
            suffix = "" if M == config.M else f"-M{M}"
            report["path"] = self._reports(config).save_cell({**report, "method": method.value + suffix})
        return report

    def csv_rows(self, report: Dict[str, Any]) -> List[Dict[str, Any]]:
        return [
            {
                "method": report["method"],
                "coord": row["coord"],
                "coverage": row["coverage"],
                "completed": row["coverage_runs"],
                "median_width": row["median_width"],
                "dropped": report["dropped_replicate_total"],
                "runtime_s": round(report["timing"]["wall_time_s"], 3),
            }
            for row in report["coordinates"]
        ]

    def run_study(self, config: ExperimentConfig) -> Dict[str, Any]:
        """Every configured method, plus the M sweep when m_values is set"""
        spec = self.resolve_spec(config)
        reports = [self.run_cell(config, method, spec=spec) for method in config.methods]
        rows = [row for report in reports for row in self.csv_rows(report)]
        repo = self._reports(config)
        stem = f"{config.setting.value}/study-{config.config_hash()}"
        outputs = {"table": repo.save_table(rows, f"{stem}.csv")}
        if config.m_values:
            sweep_rows = []
            for method in config.methods:
                sweep_rows.extend(self.sweep_m(config, method, config.m_values, spec=spec))
            outputs["sweep"] = repo.save_table(sweep_rows, f"{stem}-sweep.csv", SWEEP_FIELDS)
        return {"rows": rows, "outputs": outputs, "cells": [report.get("path") for report in reports]}

    def sweep_m(self, config: ExperimentConfig, method: MethodTag, m_values: Sequence[int],
                spec: Optional[SettingSpec] = None) -> List[Dict[str, Any]]:
        """(M, coverage) rows per coordinate, one cell per M"""
        if not m_values:
            raise ValueError("m_values must be non-empty")
        spec = spec or self.resolve_spec(config)
        rows = []
        for M in m_values:
            report = self.run_cell(config, method, M=int(M), spec=spec)
            for row in report["coordinates"]:
                rows.append({"method": MethodTag(method).value, "M": int(M), "coord": row["coord"],
                             "coverage": row["coverage"], "completed": row["coverage_runs"],
                             "median_width": row["median_width"]})
        return rows

    def export_replicates(self, config: ExperimentConfig, method: MethodTag, path: str, run: int = 1,
                          M: Optional[int] = None) -> str:
        """Replicate estimates behind run r's interval, on the lanes the cell uses"""
        spec = self.resolve_spec(config)
        interval, estimator = interval_for_run(config, spec, MethodTag(method), run, M or config.M)
        written = self._reports(config).save_replicates(interval, estimator.coordinates, path)
        logger.info("replicates of run %d (%s) written to %s", run, MethodTag(method).value, written)
        return written

    def compare_timing(self, config: ExperimentConfig, run: int = 1) -> Dict[str, float]:
        """Wall time of the Boot MI and MI Boot workloads on one generated dataset"""
        spec = self.resolve_spec(config)
        engine, estimator = _build(config, spec)
        data = spec.generate(data_stream(config.master_seed, run))
        M, B = config.M, config.B

        started = time.perf_counter()
        point = point_from_original(data, engine, estimator, M, method_stream(config.master_seed, run, MethodTag.BOOT_MI))
        bootstrap_then_mi(data, engine, estimator, M, B, method_stream(config.master_seed, run, MethodTag.BOOT_MI), point.size)
        boot_mi_seconds = time.perf_counter() - started

        started = time.perf_counter()
        mi_then_bootstrap(data, engine, estimator, M, B, method_stream(config.master_seed, run, MethodTag.MI_BOOT))
        mi_boot_seconds = time.perf_counter() - started

        ratio = boot_mi_seconds / max(mi_boot_seconds, 1e-12)
        logger.info("Boot MI %.3fs, MI Boot %.3fs, ratio %.2f", boot_mi_seconds, mi_boot_seconds, ratio)
        return {"boot_mi_seconds": boot_mi_seconds, "mi_boot_seconds": mi_boot_seconds, "ratio": ratio}
