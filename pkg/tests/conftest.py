import os

import pytest


# =============================================================================
# Base Fixtures
# =============================================================================

@pytest.fixture(autouse=True)
def quiet_settings(monkeypatch):
    """Pin the settings the numerical tests depend on.

    A local environment may set HNOMA_REWARD_ESTIMATOR, HNOMA_SU_U_ESTIMATOR,
    HNOMA_WORKERS or HNOMA_SWEEP_CACHE; tests that need another value
    monkeypatch it explicitly.
    """
    import settings
    monkeypatch.setattr(settings, "reward_estimator", "conditional", raising=False)
    monkeypatch.setattr(settings, "su_u_estimator", "literal", raising=False)
    monkeypatch.setattr(settings, "default_workers", 1, raising=False)
    monkeypatch.setattr(settings, "sweep_cache", False, raising=False)


@pytest.fixture()
def test_env(tmp_path, monkeypatch):
    """Isolate data and output locations and return the imported modules."""
    data_dir = tmp_path / "data"
    out_dir = tmp_path / "out"
    data_dir.mkdir(parents=True, exist_ok=True)
    monkeypatch.setenv("HNOMA_DATA_DIR", str(data_dir))

    from hnoma import cli as _cli
    from hnoma import controller as _controller
    from hnoma import core as _core
    from hnoma import model as _model
    import settings as _settings

    monkeypatch.setattr(_settings, "data_location", str(data_dir), raising=False)
    monkeypatch.setattr(_settings, "output_location", str(out_dir), raising=False)

    return {
        "cli": _cli,
        "controller": _controller,
        "model": _model,
        "core": _core,
        "data_dir": data_dir,
        "out_dir": out_dir,
        "tmp_path": tmp_path,
    }


@pytest.fixture()
def fresh_db(test_env):
    """Bind the ESS cache to an empty database under the isolated data dir."""
    model = test_env["model"]
    db_path = os.path.join(str(test_env["data_dir"]), "hnoma.db")
    model.init_db(db_path)
    yield test_env
    if not model.DB.is_closed():
        model.DB.close()


# =============================================================================
# Game fixtures
# =============================================================================

@pytest.fixture()
def fig_params():
    """(R, c) = (1, 2), Gamma = 4, gbar = 10."""
    from hnoma.game import GameParams, SnrScaledCosts
    return GameParams.from_gamma(1.0, 4.0, 10.0, SnrScaledCosts(2.0))


@pytest.fixture()
def unit_cost_params():
    """(R, c) = (1, 1), Gamma = 4, gbar = 10."""
    from hnoma.game import GameParams, SnrScaledCosts
    return GameParams.from_gamma(1.0, 4.0, 10.0, SnrScaledCosts(1.0))
