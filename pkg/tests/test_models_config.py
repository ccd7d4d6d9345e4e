import logging

import pytest
from pydantic import ValidationError

import models
from models import GaborParams, MetricParams, PhantomSpec, ReassignParams, RunConfig, RunReport
from utils.config import get_settings
from utils.errors import GaborFlowError, InputValidationError, require

from tests.conftest import NORMAL


@pytest.mark.parametrize(
    "grid",
    [
        dict(N=30, K=16, M=8, L=2, Q=8),  # N != K*L
        dict(N=32, K=16, M=7, L=2, Q=8),  # M not divisible by L
        dict(N=32, K=16, M=8, L=2, Q=12),  # Q not a multiple of 2P
        dict(N=24, K=12, M=16, L=2, Q=16),  # K not a multiple of P
    ],
)
def test_inconsistent_grids_rejected(grid):
    with pytest.raises(ValidationError):
        GaborParams(a=0.25, **grid)


def test_derived_quantities():
    assert NORMAL.P == 4
    assert NORMAL.dp == pytest.approx(1 / 16)
    assert NORMAL.dq == pytest.approx(4.0)
    assert NORMAL.normal
    assert MetricParams.square_grid(NORMAL).beta == pytest.approx(8.0)


def test_preset_and_scale():
    p = GaborParams.preset("paper128")
    assert (p.N, p.K, p.M, p.L, p.Q) == (128, 128, 128, 1, 256)
    assert p.with_scale(1 / 6).a == pytest.approx(1 / 6)
    assert GaborParams.preset("extreme128") == p
    with pytest.raises(InputValidationError):
        GaborParams.preset("nope")


def test_odd_stride_warns_once(caplog, monkeypatch):
    monkeypatch.setattr(models, "_WARNED_ODD", set())
    with caplog.at_level(logging.WARNING, logger="models"):
        GaborParams.extreme(16, 0.25)
        GaborParams.extreme(16, 0.5)
    assert sum("not normal" in r.getMessage() for r in caplog.records) == 1


def test_reassign_params_validation():
    with pytest.raises(ValidationError):
        ReassignParams(t_final=0.01, dt=0.1)
    with pytest.raises(ValidationError):
        ReassignParams(eta=0.25)
    assert ReassignParams(t_final=0.0, dt=0.1).t_final == 0.0


def test_phantom_net_radii():
    with pytest.raises(ValidationError):
        PhantomSpec(inner_radius=20, outer_radius=8)


def test_run_config_grid_resolution():
    assert RunConfig(command="gabor").gabor_params() is None
    assert RunConfig(command="gabor", preset="paper128").gabor_params().N == 128
    assert RunConfig(command="gabor", gabor=NORMAL, preset="paper128").gabor_params() == NORMAL
    with pytest.raises(ValidationError):
        RunConfig(command="bogus")


def test_report_json_roundtrip():
    report = RunReport(command="reassign", metrics={"eps1": 0.01}, frozen_cells=3, warnings=["w"])
    assert RunReport.model_validate_json(report.model_dump_json()) == report


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("GABORFLOW_THREADS", "3")
    monkeypatch.setenv("LOG_LEVEL", "debug")
    settings = get_settings(refresh=True)
    assert settings.threads == 3
    assert settings.log_level == "DEBUG"
    assert get_settings() is settings


def test_bad_thread_count_falls_back(monkeypatch):
    monkeypatch.setenv("GABORFLOW_THREADS", "many")
    assert get_settings(refresh=True).threads >= 1
    monkeypatch.setenv("GABORFLOW_THREADS", "0")
    assert get_settings(refresh=True).threads == 1


def test_errors_carry_code_and_diagnostics():
    err = GaborFlowError("cfl-violated", "dt too large", dt=1.0, limit=0.25)
    assert err.to_dict() == {"code": "cfl-violated", "message": "dt too large", "diagnostics": {"dt": 1.0, "limit": 0.25}}
    assert str(err).startswith("cfl-violated")
    require(True, "never", "not raised")
    with pytest.raises(InputValidationError) as exc:
        require(False, "missing-file", "gone", path="x")
    assert exc.value.diagnostics == {"path": "x"}
    assert isinstance(exc.value, GaborFlowError)
