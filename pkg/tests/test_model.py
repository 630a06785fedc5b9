import pytest

from flangraph import Application, Claim, DatasetSplit
from flangraph.errors import InvariantViolation


def _app(app_id="A1", date="2019-01-01", claims=None):
    claims = claims or (Claim(1, "A widget.", label=1),)
    return Application(app_id, date, tuple(claims))


def test_json_round_trip_is_identity():
    app = _app(claims=(Claim(1, "A widget.", label=1), Claim(2, "The widget of claim 1, painted.", label=0)))
    assert Application.from_json(app.to_json()) == app


def test_round_trip_preserves_missing_label():
    app = _app(claims=(Claim(1, "A widget."),))
    again = Application.from_json(app.to_json())
    assert again.claims[0].label is None


def test_duplicate_claim_numbers_rejected():
    with pytest.raises(InvariantViolation, match="duplicate claim numbers"):
        _app(claims=(Claim(1, "A widget."), Claim(1, "Another widget.")))


def test_claims_sorted_by_number():
    app = _app(claims=(Claim(3, "c"), Claim(1, "a"), Claim(2, "b")))
    assert [c.number for c in app.claims] == [1, 2, 3]


def test_claim_validation():
    with pytest.raises(InvariantViolation):
        Claim(0, "text")
    with pytest.raises(InvariantViolation):
        Claim(1, "   ")
    with pytest.raises(InvariantViolation):
        Claim(1, "text", label=2)


def test_bad_date_rejected():
    with pytest.raises(InvariantViolation, match="ISO-8601"):
        _app(date="03/15/2019")


def test_split_ordering_enforced():
    early = _app("A", "2018-01-01")
    late = _app("B", "2020-01-01")
    DatasetSplit(train=(early,), valid=(late,), test=())
    with pytest.raises(InvariantViolation, match="ordering"):
        DatasetSplit(train=(late,), valid=(early,), test=())


def test_split_disjointness_enforced():
    app = _app("A")
    with pytest.raises(InvariantViolation, match="disjoint"):
        DatasetSplit(train=(app,), valid=(app,), test=())
