from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from scensim.values import (
    DataType,
    Position,
    Route,
    decode_route,
    default_value,
    encode_route,
    flatten_attribute,
    flatten_value,
    matches_kind,
    parse_datatype,
    parse_scalar_text,
    recompose,
    to_json,
)
from strategies import positions, routes


def test_flatten_position_into_three_doubles():
    assert flatten_attribute("position", DataType.POSITION) == [
        ("position.latitude", DataType.DOUBLE),
        ("position.longitude", DataType.DOUBLE),
        ("position.altitude", DataType.DOUBLE),
    ]


def test_flatten_scalar_is_identity():
    assert flatten_attribute("speed", DataType.DOUBLE) == [("speed", DataType.DOUBLE)]


def test_flatten_route_is_one_encoded_string():
    assert flatten_attribute("route", DataType.ROUTE) == [("route.encoded", DataType.STRING)]


@given(routes)
def test_route_encoding_round_trips_exactly(route):
    text = encode_route(route)
    json.loads(text)
    assert decode_route(text) == route


@given(positions())
def test_position_flatten_recompose(p):
    leaves = {k.split(".", 1)[1]: v for k, v in flatten_value("position", DataType.POSITION, p).items()}
    assert recompose(DataType.POSITION, None, leaves) == p


def test_partial_position_keeps_other_leaves():
    before = Position(1.0, 2.0, 3.0)
    assert recompose(DataType.POSITION, before, {"latitude": 5.0}) == Position(5.0, 2.0, 3.0)


def test_position_json_uses_listing_keys():
    assert to_json(Position(53.84, 8.115, 0.0)) == {"Lat": 53.84, "Lon": 8.115, "Alt": 0.0}


@pytest.mark.parametrize(
    "value,dt,ok",
    [
        (True, DataType.BOOLEAN, True),
        (1, DataType.BOOLEAN, False),
        (True, DataType.INTEGER, False),
        (3, DataType.INTEGER, True),
        (3, DataType.DOUBLE, False),
        (3.0, DataType.DOUBLE, True),
        ("x", DataType.STRING, True),
        (Position(0, 0), DataType.POSITION, True),
        (Position(0, 0), DataType.ROUTE, False),
    ],
)
def test_matches_kind_is_exact(value, dt, ok):
    assert matches_kind(value, dt) is ok


def test_defaults():
    assert default_value(DataType.DOUBLE) == 0.0
    assert default_value(DataType.BOOLEAN) is False
    assert default_value(DataType.STRING) == ""
    assert default_value(DataType.POSITION) == Position(0.0, 0.0, 0.0)


def test_java_type_aliases():
    assert parse_datatype("java.lang.String") is DataType.STRING
    assert parse_datatype("java.lang.Double") is DataType.DOUBLE
    with pytest.raises(ValueError):
        parse_datatype("java.lang.Object")


@pytest.mark.parametrize("text,dt", [("abc", DataType.DOUBLE), ("nan", DataType.DOUBLE), ("1.5", DataType.INTEGER),
                                     ("yes", DataType.BOOLEAN), (str(2**63), DataType.INTEGER)])
def test_bad_scalar_text(text, dt):
    with pytest.raises(ValueError):
        parse_scalar_text(text, dt)


def test_position_and_route_invariants():
    with pytest.raises(ValueError):
        Position(91.0, 0.0)
    with pytest.raises(ValueError):
        Position(0.0, -181.0)
    with pytest.raises(ValueError):
        Route((Position(0, 0),))


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_double_text_round_trip(x):
    assert parse_scalar_text(repr(x), DataType.DOUBLE) == x
