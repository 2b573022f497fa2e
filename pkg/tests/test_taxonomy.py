import json

import pytest
from hypothesis import given, strategies as st

from regcov.errors import ConfigError, UnknownCode, UnknownRisk
from regcov.taxonomy import (
    CategoryCode,
    Kind,
    SystemicRisk,
    all_categories,
    capabilities,
    category,
    code_for_name,
    default_risk_map,
    load_risk_map,
    parse_code,
    propensities,
    risk_components,
)


def codes(*names):
    return frozenset(parse_code(n) for n in names)


def test_sizes_and_order():
    cats = all_categories()
    assert len(cats) == 22
    assert [str(c.code) for c in cats] == [f"C{i}" for i in range(1, 14)] + [f"P{i}" for i in range(1, 10)]
    assert len(capabilities()) == 13 and len(propensities()) == 9


def test_names_round_trip():
    for d in all_categories():
        assert code_for_name(d.name) == d.code
        assert category(str(d.code)) is d
    assert category("C6").name == "Long-horizon planning, forecasting, or strategising"
    assert category("P3").name == "Tendency to hallucinate"


@pytest.mark.parametrize("text", ["C0", "C14", "P10", "P0", "c1", "X1", "C01", " C1", "C1 ", "", "C", "P-1"])
def test_parse_rejects(text):
    with pytest.raises(UnknownCode):
        parse_code(text)


def test_unknown_code_is_value_error():
    with pytest.raises(ValueError):
        parse_code("C99")


@given(st.sampled_from(list(Kind)), st.integers(1, 13))
def test_parse_str_round_trip(kind, i):
    if i > kind.size:
        with pytest.raises(ValueError):
            CategoryCode(kind, i)
        return
    code = CategoryCode(kind, i)
    assert parse_code(str(code)) == code


def test_code_ordering():
    assert sorted(codes("P1", "C10", "C2")) == [parse_code("C2"), parse_code("C10"), parse_code("P1")]


def test_default_risk_map():
    rm = default_risk_map()
    assert rm[SystemicRisk.HARMFUL_MANIPULATION] == codes("P3", "P4", "C3", "C11", "P1")
    assert rm[SystemicRisk.CYBER_OFFENCE] == codes("C1", "C12", "P6", "P7", "C4")
    assert rm[SystemicRisk.CBRN_RISKS] == codes("C2", "P2", "P6", "C5")
    assert rm[SystemicRisk.LOSS_OF_CONTROL] == codes("C4", "C7", "C8", "C9", "C10", "P1", "P7")


def test_risk_map_union_and_complement():
    rm = default_risk_map()
    union = frozenset().union(*rm.values())
    assert len(union) == 17
    everything = frozenset(d.code for d in all_categories())
    assert everything - union == codes("C6", "C13", "P5", "P8", "P9")


def test_risk_components_lookup_by_name():
    assert risk_components("Loss of Control") == risk_components(SystemicRisk.LOSS_OF_CONTROL)
    assert risk_components("CbrnRisks") == codes("C2", "P2", "P6", "C5")
    with pytest.raises(UnknownRisk):
        risk_components("Meteor Strike")


def test_user_risk_map(tmp_path):
    p = tmp_path / "rm.json"
    p.write_text(json.dumps({"CyberOffence": ["C1"], "LossOfControl": ["C8", "C9"]}))
    rm = load_risk_map(p)
    assert risk_components("CyberOffence", rm) == codes("C1")
    with pytest.raises(UnknownRisk):
        rm[SystemicRisk.CBRN_RISKS]


@pytest.mark.parametrize("bad", [{"CyberOffence": ["C99"]}, {"Alien": ["C1"]}, {"CyberOffence": "C1"}, ["C1"]])
def test_bad_risk_map(tmp_path, bad):
    p = tmp_path / "rm.json"
    p.write_text(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_risk_map(p)
