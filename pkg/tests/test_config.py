import json

import pytest

from kpplattice import dispersion as D
from kpplattice import media as M
from kpplattice.config import SCHEMA, default_document, load_config, parse_config
from kpplattice.errors import ConfigurationError


def _doc(**over):
    d = {"version": 1}
    d.update(over)
    return json.dumps(d, indent=2)


def test_defaults_validate_against_schema():
    import jsonschema

    jsonschema.validate(default_document(), SCHEMA)
    cfg = load_config(None)
    assert cfg.media.kind == "periodic-sum"
    assert cfg.width == 2000


def test_unknown_key_reports_line():
    text = '{\n  "version": 1,\n  "sim": {\n    "widht": 10\n  }\n}\n'
    with pytest.raises(ConfigurationError, match=r"line 4: sim/widht: unknown key 'widht'"):
        parse_config(text)


def test_bad_json_reports_line():
    with pytest.raises(ConfigurationError, match=r"line 3"):
        parse_config('{\n  "version": 1,\n  "mu": ,\n}')


def test_type_error_reports_line():
    text = '{\n  "version": 1,\n  "mu": "fast"\n}'
    with pytest.raises(ConfigurationError, match=r"line 3: mu"):
        parse_config(text)


def test_version_required():
    with pytest.raises(ConfigurationError):
        parse_config('{"mu": 0.5}')
    with pytest.raises(ConfigurationError):
        parse_config('{"version": 2}')


def test_mu_and_gamma_exclusive():
    with pytest.raises(ConfigurationError, match="exactly one"):
        parse_config(_doc(mu=0.4, gamma=3.0))


def test_gamma_readback():
    cfg = parse_config(_doc(gamma=3.0))
    path = M.build_media(cfg.media)
    mu = cfg.resolve_mu(path)
    assert abs(D.envelope_speed(mu, 1.0) - 3.0) < 1e-9


def test_mu_outside_range():
    cfg = parse_config(_doc(mu=1.2))
    with pytest.raises(ConfigurationError, match="line 3"):
        cfg.resolve_mu(M.build_media(cfg.media))


def test_tail_ratio_rejected():
    with pytest.raises(ConfigurationError, match="tail ratio"):
        parse_config(_doc(perturbation={"tail_ratio": 1.5}))


def test_invalid_media_bounds():
    doc = _doc(media={"kind": "bounded-random-spline", "params": {"a_min": 0.0, "a_max": 2.0}})
    with pytest.raises(ConfigurationError, match="a_min"):
        parse_config(doc)


def test_seed_override():
    cfg = parse_config(_doc(media={"kind": "telegraph", "seed": 3}, seeds=[1, 2, 3]), seed_override=9)
    assert cfg.seeds == [9]
    assert cfg.media.seed == 9


def test_kind_switch_drops_default_params():
    cfg = parse_config(_doc(media={"kind": "constant"}))
    assert cfg.media.params == {}
    assert cfg.media.bounds() == (1.0, 1.0)
