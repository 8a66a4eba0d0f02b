import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlfea import config as cfgmod
from tlfea.errors import ConfigError
from tlfea.scenarios import build

SAMPLE = """
# demo
scenario.name = demo
time.h = 1e-3   # step
time.n_steps = 5
time.gravity = 0, 0, -9.81
solver.method = adamw
adamw.commit_velocity = no
[body]
body.name = a
body.shape = box
body.size = 1 1 1
[load]
load.body = a
load.force = 0 0 -1
"""


def test_parse_types():
    cfg = cfgmod.parse(SAMPLE)
    assert cfg.get("time", "h") == 1e-3
    assert cfg.get("time", "gravity") == (0.0, 0.0, -9.81)
    assert cfg.get("adamw", "commit_velocity") is False
    assert cfg.blocks["body"][0]["size"] == (1.0, 1.0, 1.0)
    assert cfg.blocks["load"][0]["force"] == (0.0, 0.0, -1.0)


def test_dumps_round_trip_identity():
    cfg = cfgmod.parse(SAMPLE)
    text = cfgmod.dumps(cfg)
    assert cfgmod.parse(text) == cfg
    assert cfgmod.dumps(cfgmod.parse(text)) == text


@pytest.mark.parametrize("text,line,fragment", [
    ("time.h = 1\ntime.h = 2", 2, "duplicate"),
    ("time.hh = 1", 1, "unknown key"),
    ("timer.h = 1", 1, "unknown section"),
    ("\n\ntime.n_steps = 1.5", 3, "bad value"),
    ("solver.method = cg", 1, "expected one of"),
    ("time.gravity = 1 2", 1, "expected 3 numbers"),
    ("body.name = x", 1, "must follow"),
    ("[widget]", 1, "unknown block"),
    ("just words", 1, "expected 'section.key = value'"),
    ("time.h =", 1, "empty value"),
    ("async.enabled = maybe", 1, "true or false"),
])
def test_errors_carry_line_numbers(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        cfgmod.parse(text)
    assert info.value.line == line
    assert fragment in str(info.value)


def test_set_validates_keys_and_parses_text():
    cfg = cfgmod.parse(SAMPLE)
    cfg.set("time", "n_steps", "7")
    assert cfg.get("time", "n_steps") == 7
    with pytest.raises(ConfigError):
        cfg.set("time", "nope", 1)
    with pytest.raises(ConfigError):
        cfg.set("body", "name", "x")


_scalar_keys = [(s, k) for s, keys in cfgmod.SCHEMA.items() if s not in cfgmod.BLOCKS
                for k, conv in keys.items() if conv in (cfgmod.FLOAT, cfgmod.INT, cfgmod.BOOL)]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(_scalar_keys), st.integers(-10**6, 10**6),
                          st.floats(allow_nan=False, allow_infinity=False)), max_size=12))
def test_round_trip_property(items):
    cfg = cfgmod.Config()
    for (sec, key), i, x in items:
        conv = cfgmod.SCHEMA[sec][key]
        val = x if conv is cfgmod.FLOAT else i if conv is cfgmod.INT else bool(i % 2)
        cfg.sections.setdefault(sec, {})[key] = val
    again = cfgmod.parse(cfgmod.dumps(cfg))
    assert again == cfg
    assert cfgmod.dumps(again) == cfgmod.dumps(cfg)


def test_every_preset_parses_round_trips_and_builds():
    names = cfgmod.preset_names()
    assert {"brick", "oblique_exp1", "oblique_exp2", "joint_motion_spherical", "joint_motion_revolute",
            "joint_pull_spherical", "joint_pull_revolute", "cantilever_svk", "cantilever_mr"} <= set(names)
    for name in names:
        cfg = cfgmod.load_preset(name)
        assert cfgmod.parse(cfgmod.dumps(cfg)) == cfg
        build(cfg)


def _body(cfg):
    return cfg.blocks["body"][0]


def test_brick_table_values():
    c = cfgmod.load_preset("brick")
    assert c.get("time", "h") == 5e-4
    assert c.get("solver", "eps_in") == c.get("solver", "eps_out") == 1e-6
    assert c.get("solver", "rho") == 1e12
    assert (c.get("solver", "max_outer"), c.get("solver", "max_inner")) == (3, 10)
    assert c.get("time", "gravity") == (0.0, 0.0, -9.81)
    assert _body(c)["E"] == 1e7
    assert (c.get("contact", "e"), c.get("contact", "mu_s"), c.get("contact", "mu_k")) == (0.0, 0.25, 0.2)
    assert c.get("contact", "k_n") == 1e8


@pytest.mark.parametrize("name,mu,e,damp", [("oblique_exp1", 0.3, 1.0, 50.0), ("oblique_exp2", 0.35, 0.9, 500.0)])
def test_oblique_table_values(name, mu, e, damp):
    c = cfgmod.load_preset(name)
    b = _body(c)
    assert c.get("time", "h") == 1e-4
    assert c.get("solver", "rho") == 1e12
    assert c.get("time", "gravity", (0.0, 0.0, 0.0)) == (0.0, 0.0, 0.0)
    assert (b["material"], b["E"], b["nu"], b["density"]) == ("svk", 1e7, 0.3, 70.7355)
    assert b["eta_damp"] == b["lambda_damp"] == damp
    assert c.get("contact", "mu_s") == mu and c.get("contact", "e") == e


@pytest.mark.parametrize("kind", ["spherical", "revolute"])
def test_joint_table_values(kind):
    pull = cfgmod.load_preset(f"joint_pull_{kind}")
    motion = cfgmod.load_preset(f"joint_motion_{kind}")
    for c, steps, E in ((pull, 1000, 1e7), (motion, 5000, 2e6)):
        assert c.get("time", "h") == 5e-4 and c.get("time", "n_steps") == steps
        assert c.get("solver", "rho") == 1e10
        assert c.get("solver", "eps_out") == 1e-8 and c.get("solver", "eps_in") == 1e-6
        assert (c.get("solver", "max_outer"), c.get("solver", "max_inner")) == (8, 10)
        for b in c.blocks["body"]:
            assert (b["E"], b["nu"], b["density"]) == (E, 0.3, 1200.0)
            assert sorted(b["size"]) == [0.04, 0.04, 0.5]
    assert _body(pull)["eta_damp"] == _body(pull)["lambda_damp"] == 1e4


def test_cantilever_table_values():
    svk, mr = cfgmod.load_preset("cantilever_svk"), cfgmod.load_preset("cantilever_mr")
    for c in (svk, mr):
        assert c.get("time", "h") == 1e-3 and c.get("time", "n_steps") == 50
        assert c.get("solver", "eps_in") == c.get("solver", "eps_out") == 1e-4
        assert _body(c)["density"] == 2700.0
    assert (_body(svk)["E"], _body(svk)["nu"]) == (7e8, 0.33)
    assert (_body(mr)["C10"], _body(mr)["C01"], _body(mr)["kappa"]) == (7.89e7, 5.26e7, 1.03e9)


def test_key_reference_lists_every_key():
    ref = cfgmod.key_reference()
    for sec, keys in cfgmod.SCHEMA.items():
        for k in keys:
            assert k in ref
        assert sec in ref


def test_resolve_unknown_preset():
    with pytest.raises(FileNotFoundError):
        cfgmod.resolve("no_such_preset")
