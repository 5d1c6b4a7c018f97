import numpy as np
import pytest

from csb.config import bundled_configs, load_config, parse_config
from csb.exceptions import ValidationError


def test_bundled_configs_parse():
    names = {p.name for p in bundled_configs()}
    assert {"tgate.cfg", "fsim.cfg", "toffoli.cfg", "ising.cfg"} <= names
    for p in bundled_configs():
        cfg = load_config(p)
        assert cfg.points()


def test_tgate_sweep_points():
    cfg = load_config("tgate.cfg")
    pts = cfg.points()
    assert [p.noise.p1 for p in pts] == [0.001, 0.003, 0.01]
    assert [p.L_max for p in pts] == [100, 50, 50]
    assert all(p.noise.rotation_overshoot == -0.01 for p in pts)
    assert cfg.swept_key() == "p_damping"


def test_seed_is_mandatory():
    with pytest.raises(ValidationError, match="seed"):
        parse_config('target = "rz"\n')


def test_field_paths_in_errors():
    with pytest.raises(ValidationError) as exc:
        parse_config('target = "rz"\nseed = 1\nshots = 0\nK = -2\n')
    msg = str(exc.value)
    assert "shots:" in msg and "K:" in msg


def test_unknown_keys_and_tables_rejected():
    with pytest.raises(ValidationError, match="typo"):
        parse_config('target = "rz"\nseed = 1\ntypo = 3\n')
    with pytest.raises(ValidationError, match="flat"):
        parse_config('target = "rz"\nseed = 1\n[noise]\np = 1\n')


def test_sweep_length_mismatch():
    with pytest.raises(ValidationError, match="lengths"):
        parse_config('target = "rz"\nseed = 1\np_damping = [0.1, 0.2]\novershoot_rad = [0.1]\n')


def test_rc_with_overshoot_rejected():
    with pytest.raises(ValidationError, match="rc"):
        parse_config('target = "rz"\nseed = 1\nrc = true\novershoot_rad = 0.01\n')


def test_ising_draw_is_seeded():
    cfg = load_config("ising.cfg")
    a, b = cfg.ising_params(), cfg.ising_params()
    assert np.array_equal(a["h"], b["h"])
    assert cfg.build_target().n_qubits == 6


def test_invalid_noise_reported():
    cfg = parse_config('target = "rz"\nseed = 1\np_damping = 0.9\n')
    with pytest.raises(ValidationError):
        cfg.points()
