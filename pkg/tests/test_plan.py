import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salmon.plan import (
    Arc,
    Final,
    Initial,
    Line,
    MeanderElement,
    MissingKeyError,
    MissionPlan,
    OrderingError,
    PlanError,
    PlanSyntaxError,
    UnknownElementError,
    WaypointElement,
    load_plan,
    parse_plan,
    serialize_plan,
    validate_plan,
)

from .conftest import FJORD

MINIMAL = """\
[mission]
name = minimal
origin_lat = 60.0
origin_lon = 5.0

[element.1]
type = initial
x = 0
y = 0

[element.2]
type = meander
x = 0
y = 0
z_max = 20
rotation_deg = 0
leg_length = 200
leg_distance = 30
n_legs = 4

[element.3]
type = final
x = 0
y = 0
"""


def test_minimal_plan_has_three_elements():
    plan = parse_plan(MINIMAL)
    assert len(plan.elements) == 3
    assert isinstance(plan.elements[0], Initial)
    assert plan.elements[1] == MeanderElement(0.0, 0.0, 20.0, 0.0, 200.0, 30.0, 4)
    assert isinstance(plan.elements[2], Final)
    assert validate_plan(plan) == []


def test_missing_n_legs_names_the_key():
    text = MINIMAL.replace("n_legs = 4\n", "")
    with pytest.raises(MissingKeyError) as info:
        parse_plan(text)
    assert info.value.key == "n_legs"
    assert "n_legs" in str(info.value)
    assert info.value.line == 11


def test_fjord_meander_fields():
    plan = load_plan(FJORD)
    expected = MeanderElement(
        x_meander=20.0, y_meander=10.0, z_max=20.0, theta_meander=35.0, l_leg=200.0, d_leg=30.0, n_legs=4
    )
    assert plan.name == "fjord"
    assert (plan.origin_lat, plan.origin_lon) == (60.3913, 5.3221)
    assert plan.elements[0] == Initial(0.0, 0.0)
    assert plan.elements[1] == expected
    assert plan.elements[2] == Final(-64.388, 60.781)
    assert validate_plan(plan) == []


def test_serialized_format():
    text = serialize_plan(parse_plan(MINIMAL))
    assert "[element.2]" in text
    assert "type = meander" in text


def test_empty_name_round_trips():
    plan = MissionPlan("", 0.0, 0.0, (Initial(0.0, 0.0), Final(1.0, 1.0)))
    text = serialize_plan(plan)
    assert "name =" in text
    assert parse_plan(text) == plan


@pytest.mark.parametrize(
    "text, exc",
    [
        (MINIMAL.replace("type = meander", "type = spiral"), UnknownElementError),
        (MINIMAL.replace("type = initial", "type = waypoint\nz = 1"), OrderingError),
        (MINIMAL.replace("[element.3]", "[element.4]"), PlanSyntaxError),
        (MINIMAL.replace("x = 0\ny = 0\n\n[element.2]", "x = 0\nx = 1\ny = 0\n\n[element.2]"), PlanSyntaxError),
        (MINIMAL.replace("n_legs = 4", "n_legs = four"), PlanError),
        (MINIMAL.replace("leg_length = 200", "leg_length = nan"), PlanError),
        (MINIMAL + "garbage line\n", PlanSyntaxError),
        ("", PlanSyntaxError),
    ],
)
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_plan(text)


def test_syntax_error_reports_line():
    text = MINIMAL.replace("x = 0\ny = 0\n\n[element.2]", "x = 0\nnot a pair\n\n[element.2]", 1)
    with pytest.raises(PlanSyntaxError) as info:
        parse_plan(text)
    assert info.value.line == 9


def _plan_with(**changes):
    base = parse_plan(MINIMAL)
    m = base.elements[1]
    fields = dict(m.__dict__)
    fields.update(changes)
    return MissionPlan(base.name, base.origin_lat, base.origin_lon,
                       (base.elements[0], MeanderElement(**fields), base.elements[2]))


def test_validate_n_legs_zero():
    out = validate_plan(_plan_with(n_legs=0))
    assert len(out) == 1 and "n_legs" in out[0]


def test_validate_negative_z_max():
    out = validate_plan(_plan_with(z_max=-5.0))
    assert len(out) == 1 and "z_max" in out[0]


def test_validate_base_elements():
    plan = MissionPlan("x", 0.0, 0.0, (
        Initial(0.0, 0.0),
        Line(1.0, 1.0, 1.0, 1.0, 5.0),
        Arc(0.0, 0.0, 0.0, 0.0, 90.0, 5.0),
        WaypointElement(1.0, 2.0, -1.0),
        Final(0.0, 0.0),
    ))
    out = validate_plan(plan)
    assert len(out) == 3
    assert any("line endpoints" in v for v in out)
    assert any("radius" in v for v in out)
    assert any("z must be" in v for v in out)


def test_validate_is_pure():
    plan = _plan_with(n_legs=0, l_leg=-1.0)
    assert validate_plan(plan) == validate_plan(plan)


# --------------------------------------------------------------------------
# property tests

coord = st.floats(-1e5, 1e5, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e4, allow_nan=False, allow_infinity=False)
depth = st.floats(0.0, 500.0, allow_nan=False)
angle = st.floats(-720.0, 720.0, allow_nan=False)
name_chars = st.characters(blacklist_categories=("Cs", "Cc", "Zl", "Zp"))
names = st.text(name_chars, max_size=30).map(str.strip)

base_element = st.one_of(
    st.builds(WaypointElement, coord, coord, depth),
    st.builds(Line, coord, coord, coord, coord, depth).filter(lambda l: (l.x1, l.y1) != (l.x2, l.y2)),
    st.builds(Arc, coord, coord, positive, angle, angle, depth).filter(lambda a: a.start_angle != a.end_angle),
    st.builds(MeanderElement, coord, coord, positive, angle, positive, positive, st.integers(1, 50)),
)

plans = st.builds(
    lambda name, lat, lon, first, middle, last: MissionPlan(name, lat, lon, (first, *middle, last)),
    names,
    st.floats(-90.0, 90.0),
    st.floats(-180.0, 180.0, exclude_max=True),
    st.builds(Initial, coord, coord),
    st.lists(base_element, max_size=6),
    st.builds(Final, coord, coord),
)


@settings(max_examples=1000, deadline=None)
@given(plans)
def test_round_trip(plan):
    assert validate_plan(plan) == []
    assert parse_plan(serialize_plan(plan)) == plan


def test_parser_fuzz_never_crashes():
    rng = random.Random(7)
    alphabet = string.printable + "[]=.#é\x00"
    seeds = [MINIMAL, serialize_plan(load_plan(FJORD))]
    outcomes = {"ok": 0, "error": 0}
    for i in range(100_000):
        if i % 2:
            raw = bytes(rng.getrandbits(8) for _ in range(rng.randrange(0, 64)))
        else:
            src = list(rng.choice(seeds))
            for _ in range(rng.randrange(1, 6)):
                pos = rng.randrange(len(src))
                src[pos] = rng.choice(alphabet)
            raw = "".join(src).encode("utf-8", "surrogatepass")
        try:
            parse_plan(raw)
            outcomes["ok"] += 1
        except PlanError:
            outcomes["error"] += 1
    assert sum(outcomes.values()) == 100_000
