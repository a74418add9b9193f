import json

import click

from src.core.config import Settings, configure_logging
from src.core.exceptions import MiBootError
from src.core.models import (
    EngineType,
    EstimatorType,
    ExperimentConfig,
    GformulaFitting,
    MethodTag,
    RegimeName,
    SdConvention,
    SettingId,
)
from src.data.repositories import DatasetRepository, ReportRepository
from src.services.analysis_service import AnalysisService
from src.services.simulation_service import SimulationService
from src.services.study_service import SWEEP_FIELDS, StudyService


def _choices(enum) -> click.Choice:
    return click.Choice([member.value for member in enum])


def _load(path: str):
    repo = DatasetRepository()
    if repo.is_longitudinal(path):
        return repo.load_longitudinal(path)
    return repo.load(path)


def _fail(exc: Exception):
    raise click.ClickException(f"{exc.__class__.__name__}: {exc}")


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default from MIBOOT_LOG_LEVEL)")
def cli(log_level):
    """Bootstrap confidence intervals for multiply imputed data"""
    configure_logging(log_level)


@cli.command()
@click.option("--engine", type=_choices(EngineType), default=EngineType.EMB.value, show_default=True)
@click.option("--m", "M", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--strata-column", default=None, help="ABB strata column")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-prefix", required=True, help="Completed datasets go to <prefix>.<m>.csv")
def impute(engine, M, seed, strata_column, in_path, out_prefix):
    """Write M completed copies of a dataset"""
    try:
        data = _load(in_path)
        completions = AnalysisService().impute(data, EngineType(engine), M, seed, strata_column)
        repo = DatasetRepository()
        for m, completed in enumerate(completions, start=1):
            path = f"{out_prefix}.{m}.csv"
            if hasattr(completed, "to_long_frame"):
                repo.save_longitudinal(completed, path)
            else:
                repo.save(completed, path)
            click.echo(path)
    except MiBootError as exc:
        _fail(exc)


@cli.command()
@click.option("--method", type=_choices(MethodTag), required=True)
@click.option("--m", "M", type=int, default=10, show_default=True)
@click.option("--b", "B", type=int, default=200, show_default=True)
@click.option("--alpha", type=float, default=0.025, show_default=True, help="Per-tail level")
@click.option("--engine", type=_choices(EngineType), default=EngineType.EMB.value, show_default=True)
@click.option("--estimator", type=_choices(EstimatorType), default=EstimatorType.OLS.value, show_default=True)
@click.option("--outcome", default="y", show_default=True)
@click.option("--regime", "regimes", type=_choices(RegimeName), multiple=True)
@click.option("--horizon", type=int, default=None, help="Outcome time for the g-formula")
@click.option("--gformula-fitting", "fitting", type=_choices(GformulaFitting),
              default=GformulaFitting.RULE_CONSISTENT.value, show_default=True,
              help="Fit each g-formula step on regime followers or on everyone observed")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None, help="JSON record destination (default stdout)")
@click.option("--replicates-out", "replicates_path", default=None,
              help="Write the raw bootstrap replicate estimates here as CSV")
def analyze(method, M, B, alpha, engine, estimator, outcome, regimes, horizon, fitting, seed, in_path,
            out_path, replicates_path):
    """Confidence interval for one dataset"""
    try:
        record = AnalysisService().analyze(
            _load(in_path), MethodTag(method), M, B, alpha, EngineType(engine), EstimatorType(estimator), seed,
            outcome=outcome, regimes=regimes or (RegimeName.ALWAYS, RegimeName.NEVER), horizon=horizon,
            replicates_path=replicates_path, fitting=GformulaFitting(fitting),
        )
    except (MiBootError, ValueError) as exc:
        _fail(exc)
    text = json.dumps(record, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
        click.echo(out_path)
    else:
        click.echo(text)


@cli.command()
@click.option("--setting", type=_choices(SettingId), required=True)
@click.option("--n", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--sd-convention", type=_choices(SdConvention), default=SdConvention.SD.value, show_default=True)
@click.option("--horizon", type=int, default=12, show_default=True)
@click.option("--out", "out_path", required=True)
@click.option("--emit-truth", "truth_path", default=None, help="Write the truth vector as JSON here")
def simulate(setting, n, seed, sd_convention, horizon, out_path, truth_path):
    """Generate one dataset of a setting (the data of run 1 under --seed)"""
    service = SimulationService()
    try:
        spec = service.get_spec(SettingId(setting), n=n, sd_convention=SdConvention(sd_convention), horizon=horizon)
        data = service.generate(spec, seed)
    except MiBootError as exc:
        _fail(exc)
    repo = DatasetRepository()
    if hasattr(data, "to_long_frame"):
        repo.save_longitudinal(data, out_path)
    else:
        repo.save(data, out_path)
    click.echo(out_path)
    if truth_path:
        with open(truth_path, "w", encoding="utf-8") as handle:
            json.dump({"setting": setting, "truth": service.truth(spec), "constants": spec.constants}, handle, indent=2)
        click.echo(truth_path)


def _config(path: str, threads) -> ExperimentConfig:
    try:
        config = ExperimentConfig.from_file(path)
    except ValueError as exc:
        _fail(exc)
    if threads:
        config = config.model_copy(update={"thread_budget": threads})
    elif "thread_budget" not in config.model_fields_set:
        config = config.model_copy(update={"thread_budget": Settings().thread_budget})
    return config


@cli.command("simulate-study")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threads", type=int, default=None, help="Override thread_budget")
def simulate_study(config_path, threads):
    """Run every configured method of a study config"""
    config = _config(config_path, threads)
    try:
        result = StudyService().run_study(config)
    except MiBootError as exc:
        _fail(exc)
    for row in result["rows"]:
        click.echo(f"{row['method']:>11} {row['coord']:>10}  coverage={row['coverage']:.3f} (n={row['completed']})  "
                   f"median_width={row['median_width']:.4f}  dropped={row['dropped']}")
    for name, path in result["outputs"].items():
        click.echo(f"{name}: {path}")


@cli.command("sweep-m")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=_choices(MethodTag), required=True)
@click.option("--m-values", required=True, help="Comma-separated imputation counts")
@click.option("--threads", type=int, default=None)
def sweep_m(config_path, method, m_values, threads):
    """Coverage as a function of the number of imputations"""
    config = _config(config_path, threads)
    values = [int(v) for v in m_values.split(",") if v.strip()]
    try:
        rows = StudyService().sweep_m(config, MethodTag(method), values)
    except MiBootError as exc:
        _fail(exc)
    path = ReportRepository(config.results_dir).save_table(
        rows, f"{config.setting.value}/sweep-{method}-{config.config_hash()}.csv",
        SWEEP_FIELDS,
    )
    for row in rows:
        click.echo(f"M={row['M']:>3} {row['coord']:>10}  coverage={row['coverage']:.3f} (n={row['completed']})")
    click.echo(path)


@cli.command("export-replicates")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=_choices(MethodTag), required=True)
@click.option("--run", type=int, default=1, show_default=True)
@click.option("--m", "M", type=int, default=None, help="Override the config's M")
@click.option("--out", "out_path", required=True)
def export_replicates(config_path, method, run, M, out_path):
    """Raw bootstrap replicates behind one run of a study cell"""
    config = _config(config_path, None)
    try:
        path = StudyService().export_replicates(config, MethodTag(method), out_path, run=run, M=M)
    except MiBootError as exc:
        _fail(exc)
    click.echo(path)


@cli.command("compare-timing")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def compare_timing(config_path):
    """Wall time of Boot MI against MI Boot on one dataset"""
    config = _config(config_path, None)
    try:
        timing = StudyService().compare_timing(config)
    except MiBootError as exc:
        _fail(exc)
    click.echo(json.dumps(timing, indent=2))


@cli.command()
@click.option("--host", default="0.0.0.0", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP API"""
    import uvicorn

    uvicorn.run("main:app", host=host, port=port)


if __name__ == "__main__":
    cli()
