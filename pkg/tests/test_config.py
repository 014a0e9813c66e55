import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binormal.config import SCHEMA, RunConfig, schema_text
from binormal.errors import ValidationError


def test_defaults_valid():
    cfg = RunConfig().validate()
    assert cfg.alphas == [0.25, 0.5, 1.0]
    assert math.isnan(cfg.alpha)


def test_schema_covers_every_field():
    assert set(SCHEMA) == set(RunConfig().to_dict())
    text = schema_text()
    for k in SCHEMA:
        assert k in text


def test_round_trip_defaults():
    cfg = RunConfig()
    assert RunConfig.loads(cfg.dumps()).dumps() == cfg.dumps()


def test_round_trip_file(tmp_path):
    cfg = RunConfig(theta=math.pi / 3, alphas=[], eps=[0.1, 1 / 3], out="a b", snap_8pi=True,
                    alpha=0.75)
    p = tmp_path / "c.cfg"
    p.write_text(cfg.dumps())
    assert RunConfig.load(p) == cfg


finite = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@settings(max_examples=60)
@given(theta=st.floats(min_value=1e-3, max_value=math.pi), kappa=finite,
       eps=st.lists(finite, max_size=4), n=st.lists(st.integers(2, 512), max_size=4),
       seed=st.integers(0, 2 ** 31), flag=st.booleans())
def test_round_trip_property(theta, kappa, eps, n, seed, flag):
    cfg = RunConfig(theta=theta, kappa=kappa, eps=eps, n_values=n, seed=seed, snap_8pi=flag,
                    alpha=0.5)
    back = RunConfig.loads(cfg.dumps())
    assert back == cfg


def test_comments_and_blank_lines():
    cfg = RunConfig.loads("# header\n\ntheta = 1.0  # trailing\nn_values = 16, 32\n")
    assert cfg.theta == 1.0 and cfg.n_values == [16, 32]


@pytest.mark.parametrize("text", ["bogus = 1", "theta", "theta = abc", "snap_8pi = yes",
                                  "n_values = 1.5"])
def test_parse_errors(text):
    with pytest.raises(ValidationError):
        RunConfig.loads(text)


@pytest.mark.parametrize("pairs", [[("theta", "4.0")], [("positions", "1, 0")],
                                   [("n_values", "1")], [("eps", "0.1, -0.1")],
                                   [("threads", "0")], [("alpha", "-1")], [("m", "0")],
                                   [("thetas", "0")], [("xi_times", "0")]])
def test_range_errors(pairs):
    with pytest.raises(ValidationError):
        RunConfig().with_pairs(pairs).validate()


def test_type_check():
    with pytest.raises(ValidationError):
        RunConfig(theta=1).validate()
    with pytest.raises(ValidationError):
        RunConfig(n_values=[16.0]).validate()
