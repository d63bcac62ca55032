from __future__ import annotations

import io

import pytest
from hypothesis import given, strategies as st

from eventlens.gazetteer import (
    GeoPoint,
    deepest_level,
    load_gazetteer,
    resolve,
)
from eventlens.schema import GeoName


def gz_from(text: str):
    return load_gazetteer(io.StringIO(text))


FIXTURE_CSV = """country,state_or_province,city,lat,lon
Indonesia,,,-6.2088,106.8456
Indonesia,,Jakarta,-6.2088,106.8456
United States,New York,New York,40.7128,-74.0060
United States,New York,,42.9539,-75.5268
United States,,,38.9072,-77.0369
"""


class TestLoad:
    def test_city_level_entry(self):
        gz = gz_from("Indonesia,,Jakarta,-6.2088,106.8456\n")
        point = gz.lookup("indonesia", None, "jakarta")
        assert point is not None
        assert point.lat_deg == pytest.approx(-6.2088, abs=0.01)
        assert point.lon_deg == pytest.approx(106.8456, abs=0.01)

    def test_out_of_range_latitude_rejected(self):
        gz = gz_from("Nowhere,,,123,10\n")
        assert len(gz) == 0
        assert any(w.startswith("out-of-range-row") for w in gz.warnings)

    def test_duplicate_keys_last_wins_with_warning(self):
        gz = gz_from("France,,Paris,1.0,1.0\nFrance,,Paris,2.0,2.0\n")
        assert len(gz) == 1
        assert gz.lookup("france", None, "paris") == GeoPoint(2.0, 2.0)
        assert any(w.startswith("duplicate-key") for w in gz.warnings)

    def test_malformed_rows_collected(self):
        gz = gz_from("OnlyTwo,fields\nOk,,,1.0,2.0\n,,missing country,3.0,4.0\nBad,,City,abc,4\n")
        assert len(gz) == 1
        assert sum(w.startswith("malformed-row") for w in gz.warnings) == 3

    def test_header_and_comments_skipped(self):
        gz = gz_from("country,state_or_province,city,lat,lon\n# comment, with commas\nJapan,,,35.0,139.0\n")
        assert len(gz) == 1


class TestDeepestLevel:
    @pytest.mark.parametrize(
        "name,expected",
        [
            (GeoName(country="Indonesia", city="Jakarta"), "city"),
            (GeoName(country="Indonesia"), "country"),
            (GeoName(country="US", state_or_province="NY"), "state"),
            (GeoName(city="Jakarta"), "city"),
            (GeoName(), "none"),
        ],
    )
    def test_cases(self, name, expected):
        assert deepest_level(name) == expected


class TestResolve:
    @pytest.fixture()
    def gz(self):
        return gz_from(FIXTURE_CSV)

    def test_city_hit(self, gz):
        point = resolve(GeoName(country="Indonesia", city="Jakarta"), gz)
        assert point.lat_deg == pytest.approx(-6.21, abs=0.1)
        assert point.lon_deg == pytest.approx(106.85, abs=0.1)

    def test_country_hit_equals_loaded_row(self, gz):
        assert resolve(GeoName(country="Indonesia"), gz) == GeoPoint(-6.2088, 106.8456)

    def test_all_absent(self, gz):
        assert resolve(GeoName(), gz) is None

    def test_state_relaxed_for_city_lookup(self, gz):
        # No (Indonesia, Java, Jakarta) row exists; the state is dropped first.
        point = resolve(
            GeoName(country="Indonesia", state_or_province="Java", city="Jakarta"), gz
        )
        assert point == GeoPoint(-6.2088, 106.8456)

    def test_fallback_to_state_then_country(self, gz):
        point = resolve(
            GeoName(country="United States", state_or_province="New York", city="Utica"), gz
        )
        assert point == GeoPoint(42.9539, -75.5268)
        point = resolve(GeoName(country="United States", city="Nowhereville"), gz)
        assert point == GeoPoint(38.9072, -77.0369)

    def test_unresolvable_city_without_country(self, gz):
        assert resolve(GeoName(city="Jakarta"), gz) is None

    def test_unresolvable_country(self, gz):
        assert resolve(GeoName(country="Atlantis"), gz) is None

    @given(
        st.sampled_from(["Indonesia", "INDONESIA", " indonesia ", "InDoNeSiA"]),
        st.sampled_from(["Jakarta", "JAKARTA", "  jakarta", "jAKARTA  "]),
    )
    def test_case_and_whitespace_invariance(self, country, city):
        gz = gz_from(FIXTURE_CSV)
        assert resolve(GeoName(country=country, city=city), gz) == GeoPoint(-6.2088, 106.8456)

    def test_deterministic(self, gz):
        name = GeoName(country="United States", state_or_province="New York", city="New York")
        assert resolve(name, gz) == resolve(name, gz) == GeoPoint(40.7128, -74.0060)
