import pytest

from src.core.config import Settings
from src.core.models import (
    AnalyzeRequest,
    EstimatorType,
    ExperimentConfig,
    GformulaFitting,
    MethodTag,
    Profile,
    SettingId,
)


def test_defaults():
    config = ExperimentConfig(setting="1", methods=["boot-mi"])
    assert (config.R, config.n, config.M, config.B, config.alpha) == (1000, 1000, 10, 200, 0.025)
    assert config.master_seed == 20240601
    assert config.estimator == EstimatorType.OLS


def test_default_estimators_follow_setting():
    assert ExperimentConfig(setting="3", methods=["boot-mi"]).estimator == EstimatorType.COX
    assert ExperimentConfig(setting="4", methods=["boot-mi"]).estimator == EstimatorType.SEQG


def test_estimator_pairing_is_enforced():
    with pytest.raises(ValueError, match="Cox"):
        ExperimentConfig(setting="1", estimator="cox", methods=["boot-mi"])
    with pytest.raises(ValueError, match="g-formula"):
        ExperimentConfig(setting="2low", estimator="seqg", methods=["boot-mi"])


def test_ci_profile_shrinks_setting4():
    config = ExperimentConfig(setting="4", methods=["boot-mi"], profile="ci")
    assert (config.R, config.n, config.B, config.M) == (250, 500, 100, 5)
    explicit = ExperimentConfig(setting="4", methods=["boot-mi"], profile=Profile.CI, R=40)
    assert explicit.R == 40
    assert ExperimentConfig(setting="1", methods=["boot-mi"], profile="ci").R == 1000


def test_config_hash_ignores_execution_fields():
    base = ExperimentConfig(setting="1", methods=["boot-mi"])
    assert base.config_hash() == base.model_copy(update={"thread_budget": 8, "results_dir": "/tmp/x"}).config_hash()
    assert base.config_hash() != ExperimentConfig(setting="1", methods=["boot-mi"], master_seed=7).config_hash()


def test_plan_for_methods():
    config = ExperimentConfig(setting="1", methods=["boot-mi"], M=4, B=50)
    assert config.plan(MethodTag.NO_BOOTSTRAP).B == 0
    plan = config.plan(MethodTag.BOOT_MI, M=7)
    assert (plan.M, plan.B, plan.alpha) == (7, 50, 0.025)


def test_from_file(tmp_path):
    path = tmp_path / "study.env"
    path.write_text("SETTING=2high\nR=20\nN=150\nMETHODS=boot-mi, no-boot\nM_VALUES=2,5\nA_SOURCE=published\n")
    config = ExperimentConfig.from_file(str(path))
    assert config.setting == SettingId.SETTING_2_HIGH
    assert (config.R, config.n) == (20, 150)
    assert config.methods == [MethodTag.BOOT_MI, MethodTag.NO_BOOTSTRAP]
    assert config.m_values == [2, 5]
    assert "thread_budget" not in config.model_fields_set


def test_from_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "study.env"
    path.write_text("SETTING=1\nMETHODS=boot-mi\nREPLICATES=5\n")
    with pytest.raises(ValueError, match="unknown config key"):
        ExperimentConfig.from_file(str(path))


def test_analyze_request_needs_one_source():
    with pytest.raises(ValueError):
        AnalyzeRequest()
    with pytest.raises(ValueError):
        AnalyzeRequest(csv="y\n1\n", setting="1")
    assert AnalyzeRequest(setting="1").method == MethodTag.BOOT_MI


def test_settings_read_environment(monkeypatch):
    monkeypatch.setenv("MIBOOT_THREAD_BUDGET", "3")
    monkeypatch.setenv("MIBOOT_LOG_LEVEL", "debug")
    settings = Settings.reload()
    assert settings.thread_budget == 3
    assert settings.log_level == "DEBUG"
    assert Settings() is settings


def test_settings_reject_zero_threads(monkeypatch):
    monkeypatch.setenv("MIBOOT_THREAD_BUDGET", "0")
    with pytest.raises(ValueError):
        Settings.reload()
    monkeypatch.setenv("MIBOOT_THREAD_BUDGET", "1")
    Settings.reload()


def test_gformula_fitting_from_file(tmp_path):
    assert ExperimentConfig(setting="4", methods=["boot-mi"]).gformula_fitting == GformulaFitting.RULE_CONSISTENT
    path = tmp_path / "study.env"
    path.write_text("SETTING=4\nMETHODS=boot-mi\nGFORMULA_FITTING=pooled\n")
    config = ExperimentConfig.from_file(str(path))
    assert config.gformula_fitting == GformulaFitting.POOLED
    assert config.config_hash() != ExperimentConfig(setting="4", methods=["boot-mi"]).config_hash()
