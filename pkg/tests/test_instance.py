import dataclasses
import json

import pytest

from vaxopt.instance import (InstanceError, load_instance, save_instance,
                             validate_instance, instance_from_dict)


def test_load_minimal(load):
    inst = load("tiny.json")
    assert len(inst.network.manufacturers) == 1
    assert len(inst.network.dcs) == 1
    assert len(inst.network.vcs) == 1
    assert inst.horizon == 1
    assert not validate_instance(inst)


def test_vaccine_characteristics(load):
    inst = load("pfizer.json")
    v = inst.vaccine("pfz")
    assert v.doses_per_vial == 5
    assert v.shelf_life == 30
    assert v.open_vial_life == 1
    assert v.needs_ultra_cold and v.needs_very_cold


def test_reference_error_names_culprit(tmp_path):
    doc = {
        "time": {"horizon": 1},
        "distribution_centers": ["D1"],
        "capacities": {"dc": [{"dc": "D9", "value": 5}]},
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InstanceError, match="D9") as err:
        load_instance(str(path))
    assert err.value.kind == "reference"


def test_parse_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(InstanceError) as err:
        load_instance(str(path))
    assert err.value.kind == "parse"


def test_schema_error_missing_value(tmp_path):
    doc = {"time": {"horizon": 1}, "distribution_centers": ["D1"],
           "capacities": {"dc": [{"dc": "D1"}]}}
    path = tmp_path / "schema.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(InstanceError) as err:
        load_instance(str(path))
    assert err.value.kind == "schema"


def test_defaults_are_neutral(load):
    inst = load("tiny.json")
    c = inst.catalog
    assert c.budget == float("inf")
    assert c.fleet_capacity == float("inf")
    assert c.ordering_cost == {}
    assert c.min_satisfaction == 0.0


def test_scenario_probabilities_validated(load):
    inst = load("scenarios.json")
    assert not validate_instance(inst)
    inst.scenario_set.scenarios[0].probability = 0.1  # now sums to 0.8
    violations = validate_instance(inst)
    assert any("scenarios" in str(v) for v in violations)


def test_coverage_level_invariants():
    doc = {"time": {"horizon": 1},
           "logistics": {"level_fraction": [1.0, 0.5, 0.2],
                         "level_distance": [1.0, 2.0, 3.0]}}
    inst = instance_from_dict(doc)
    assert not validate_instance(inst)
    inst.catalog.level_distance = [5.0, 5.0]
    inst.catalog.level_fraction = [1.0, 0.5]
    violations = validate_instance(inst)
    assert any("not strictly increasing" in v.reason for v in violations)
    inst.catalog.level_distance = [1.0, 5.0]
    inst.catalog.level_fraction = [0.5, 1.0]
    violations = validate_instance(inst)
    assert any("nonincreasing" in v.reason for v in violations)


@pytest.mark.parametrize("mutate,path", [
    (lambda i: dataclasses.replace(i, time_grid=dataclasses.replace(
        i.time_grid, horizon=0)), "time.horizon"),
    (lambda i: _set_vaccine(i, doses_per_vial=0), "doses_per_vial"),
    (lambda i: _set_vaccine(i, shelf_life=0), "shelf_life"),
    (lambda i: _set_vaccine(i, open_vial_life=0), "open_vial_life"),
    (lambda i: _set_cap(i, "dc_capacity", "D1", -1.0), "dc_capacity"),
    (lambda i: _set_attr(i, "min_satisfaction", 1.5), "min_satisfaction"),
    (lambda i: _set_attr(i, "service_alpha", -0.1), "service_alpha"),
])
def test_single_invariant_mutations_detected(load, mutate, path):
    inst = mutate(load("supply.json"))
    violations = validate_instance(inst)
    assert violations, f"mutation on {path} not caught"
    assert any(path in v.path for v in violations)


def _set_vaccine(inst, **kw):
    inst.vaccines[0] = dataclasses.replace(inst.vaccines[0], **kw)
    return inst


def _set_cap(inst, tensor, key, value):
    getattr(inst.catalog, tensor)[key] = value
    return inst


def _set_attr(inst, name, value):
    setattr(inst.catalog, name, value)
    return inst


def test_corpus_instances_validate(load):
    for name in ("tiny.json", "pfizer.json", "supply.json", "coverage.json",
                 "routing.json", "scenarios.json", "epi.json",
                 "epi_t50.json"):
        inst = load(name)
        assert validate_instance(inst) == [], name


def test_save_load_round_trip(load, tmp_path):
    for name in ("tiny.json", "supply.json", "scenarios.json", "epi.json"):
        inst = load(name)
        out = tmp_path / f"rt_{name}"
        save_instance(inst, str(out))
        again = load_instance(str(out))
        assert again == inst, name
        # a second round trip is byte-stable
        out2 = tmp_path / f"rt2_{name}"
        save_instance(again, str(out2))
        assert out.read_text() == out2.read_text()


def test_served_by_subsets(tmp_path):
    doc = {"time": {"horizon": 1},
           "distribution_centers": [{"id": "D1", "serves": ["V1"]}, "D2"],
           "vaccination_centers": ["V1", "V2"]}
    inst = instance_from_dict(doc)
    assert inst.vcs_of_dc("D1") == ("V1",)
    assert inst.vcs_of_dc("D2") == ("V1", "V2")


def test_manufacturer_restriction(load):
    inst = load("pfizer.json")
    assert inst.manufacturer_vaccines("M1") == ["pfz"]
    doc = {"time": {"horizon": 1}, "manufacturers": ["M1", "M2"],
           "vaccines": [{"id": "a", "manufacturers": ["M1"]}, {"id": "b"}]}
    inst2 = instance_from_dict(doc)
    assert inst2.manufacturer_vaccines("M1") == ["a", "b"]
    assert inst2.manufacturer_vaccines("M2") == ["b"]


def test_with_scenario_overrides(load):
    inst = load("scenarios.json")
    w1 = inst.scenario_set.scenarios[0]
    shifted = inst.with_scenario(w1)
    assert shifted.catalog.demand_by_vc[("V1", "p1", 1)] == 5.0
    assert inst.catalog.demand_by_vc[("V1", "p1", 1)] == 10.0  # untouched
