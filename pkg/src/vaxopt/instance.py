"""Instance data: network sets, parameter catalog, scenarios, validation.

An Instance is the immutable description of a supply network that every
constraint builder consumes: echelon sets, vaccine characteristics, the time
grid, a flat parameter catalog, and optional scenario / epidemic blocks.

JSON schema (top-level keys):
  time, vaccines, manufacturers, distribution_centers, vaccination_centers,
  population_sites, regions, groups, vehicles, outreach_centers,
  demand, costs, capacities, logistics, scenarios, epi

Tensors are arrays of records carrying their index fields plus "value".
Missing cost tensors default to 0; missing capacities default to unbounded
(builders omit the corresponding constraint rather than inventing a big
number).  Sparse tensors that are present treat missing keys as 0; assignment
matrices that are absent entirely mean "everything feasible".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

INF = float("inf")

COLD = "cold"
VERY_COLD = "very_cold"
ULTRA_COLD = "ultra_cold"
_TIERS = (COLD, VERY_COLD, ULTRA_COLD)


class InstanceError(ValueError):
    """Raised on parse, schema, or reference failures while loading."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind} error: {message}")
        self.kind = kind


@dataclass(frozen=True)
class TimeGrid:
    horizon: int
    unit: str = "period"

    def periods(self) -> range:
        return range(1, self.horizon + 1)


@dataclass(frozen=True)
class VaccineType:
    id: str
    doses_per_vial: int = 1
    shelf_life: int = 1
    open_vial_life: int = 1
    cold_tier: str = COLD
    manufacturers: tuple[str, ...] | None = None  # restriction set, None = any

    @property
    def needs_very_cold(self) -> bool:
        return self.cold_tier in (VERY_COLD, ULTRA_COLD)

    @property
    def needs_ultra_cold(self) -> bool:
        return self.cold_tier == ULTRA_COLD


@dataclass(frozen=True)
class NetworkSets:
    manufacturers: tuple[str, ...] = ()
    dcs: tuple[str, ...] = ()
    vcs: tuple[str, ...] = ()
    sites: tuple[str, ...] = ()
    regions: tuple[str, ...] = ()
    groups: tuple[str, ...] = ()
    vehicles: tuple[str, ...] = ()
    outreach: tuple[str, ...] = ()
    served_by: tuple[tuple[str, tuple[str, ...]], ...] = ()  # (dc, vcs)

    def vcs_of(self, dc: str) -> tuple[str, ...]:
        for j, ks in self.served_by:
            if j == dc:
                return ks
        return self.vcs


@dataclass
class Scenario:
    id: str
    probability: float
    demand_by_vc: dict = field(default_factory=dict)
    demand_by_group: dict = field(default_factory=dict)
    production: dict = field(default_factory=dict)


@dataclass
class ScenarioSet:
    scenarios: list[Scenario] = field(default_factory=list)
    ambiguity: dict = field(default_factory=dict)

    def probabilities(self) -> list[float]:
        return [s.probability for s in self.scenarios]

    def __len__(self) -> int:
        return len(self.scenarios)


@dataclass
class ParameterCatalog:
    # capacity
    production: dict = field(default_factory=dict)          # (i,p,t) -> cap
    dc_capacity: dict = field(default_factory=dict)         # j -> cap
    dc_safety: dict = field(default_factory=dict)           # j -> level
    vc_capacity: dict = field(default_factory=dict)         # k -> cap
    vc_total_capacity: float = INF
    fleet_capacity: float = INF
    outreach_capacity: dict = field(default_factory=dict)   # oc -> cap
    vehicle_capacity: dict = field(default_factory=dict)    # h -> cap
    dc_cold: dict = field(default_factory=dict)              # j -> cap
    dc_very_cold: dict = field(default_factory=dict)
    dc_ultra_cold: dict = field(default_factory=dict)
    worker_rate: float | None = None                         # people per worker
    existing_staff: dict = field(default_factory=dict)       # (k,t) -> count
    max_open_vcs: int | None = None
    # cost
    shortage_cost: dict = field(default_factory=dict)        # (k,p) -> cost
    emission_facility: float = 0.0
    emission_transport: float = 0.0
    vc_open_cost: dict = field(default_factory=dict)         # k -> cost
    budget: float = INF
    ordering_cost: dict = field(default_factory=dict)        # (i,j) -> cost
    holding_cost: dict = field(default_factory=dict)         # j -> cost
    hire_cost: float = 0.0
    waste_penalty: float = 1.0
    # demand
    demand_by_group: dict = field(default_factory=dict)      # (g,k,p,t) -> units
    demand_by_vc: dict = field(default_factory=dict)         # (k,p,t) -> units
    demand_by_region: dict = field(default_factory=dict)     # (r,g) -> units
    dc_demand_rate: dict = field(default_factory=dict)       # j -> rate
    dc_demand_std: dict = field(default_factory=dict)        # j -> std
    min_satisfaction: float = 0.0
    site_demand: dict = field(default_factory=dict)          # s -> demand
    coverage_population: dict = field(default_factory=dict)  # s -> population
    region_population: dict = field(default_factory=dict)    # r -> population
    level_fraction: list = field(default_factory=list)       # per level q
    level_distance: list = field(default_factory=list)       # breakpoints
    mean_supply: dict = field(default_factory=dict)          # (k,p,t) -> mean
    std_supply: dict = field(default_factory=dict)
    mean_vehicle: dict = field(default_factory=dict)         # (t,h) -> mean
    std_vehicle: dict = field(default_factory=dict)
    # logistics
    assign_vc_dc: dict = field(default_factory=dict)         # (k,j) -> 0/1
    assign_site_vc: dict = field(default_factory=dict)       # (s,k) -> 0/1
    distance: dict = field(default_factory=dict)             # (a,b) -> dist
    travel_time: dict = field(default_factory=dict)          # (r,r') -> time
    service_time: dict = field(default_factory=dict)         # r -> time
    max_distance: float = INF
    fair_share: dict = field(default_factory=dict)           # (r,g) -> units
    vial_sizes: list = field(default_factory=list)
    initial_inventory_dc: dict = field(default_factory=dict)  # j -> units
    initial_inventory_vc: dict = field(default_factory=dict)  # (k,p) -> units
    lead_time: dict = field(default_factory=dict)            # j -> periods
    lead_time_std: dict = field(default_factory=dict)        # j -> std
    equity_weight: float = 0.5
    deviation_penalty: float = 1.0
    service_alpha: float = 0.05


@dataclass
class Instance:
    time_grid: TimeGrid
    vaccines: list[VaccineType] = field(default_factory=list)
    network: NetworkSets = field(default_factory=NetworkSets)
    catalog: ParameterCatalog = field(default_factory=ParameterCatalog)
    scenario_set: ScenarioSet | None = None
    epi: dict | None = None

    # -- convenience lookups used by every builder ---------------------------

    def periods(self) -> range:
        return self.time_grid.periods()

    @property
    def horizon(self) -> int:
        return self.time_grid.horizon

    def vaccine_ids(self) -> list[str]:
        return [v.id for v in self.vaccines]

    def vaccine(self, p: str) -> VaccineType:
        for v in self.vaccines:
            if v.id == p:
                return v
        raise KeyError(p)

    def manufacturer_vaccines(self, i: str) -> list[str]:
        """Vaccine types manufacturer i can ship (restriction-aware)."""
        out = []
        for v in self.vaccines:
            if v.manufacturers is None or i in v.manufacturers:
                out.append(v.id)
        return out

    def manufacturer_needs_very_cold(self, i: str) -> bool:
        ps = self.manufacturer_vaccines(i)
        return bool(ps) and all(self.vaccine(p).needs_very_cold for p in ps)

    def manufacturer_needs_ultra_cold(self, i: str) -> bool:
        ps = self.manufacturer_vaccines(i)
        return bool(ps) and all(self.vaccine(p).needs_ultra_cold for p in ps)

    def vcs_of_dc(self, j: str) -> tuple[str, ...]:
        return self.network.vcs_of(j)

    def assignment_allowed(self, matrix: dict, key: tuple) -> float:
        """Viability lookup: an absent matrix means everything is feasible."""
        if not matrix:
            return 1.0
        return float(matrix.get(key, 0.0))

    def distance(self, a: str, b: str, default: float = INF) -> float:
        return self.catalog.distance.get((a, b), default)

    @property
    def initial_inventory_dc(self) -> dict:
        return self.catalog.initial_inventory_dc

    @property
    def initial_inventory_vc(self) -> dict:
        return self.catalog.initial_inventory_vc

    def total_demand(self) -> float:
        c = self.catalog
        return (sum(c.demand_by_group.values()) + sum(c.demand_by_vc.values())
                + sum(c.demand_by_region.values()))

    def big_m(self) -> float:
        """Data-driven big-M: what the network could ever usefully move.

        Sums finite production capacity, horizon-scaled storage/fleet/service
        capacities, initial inventories and total demand; never an arbitrary
        global constant.
        """
        c = self.catalog
        total = 1.0
        total += sum(v for v in c.production.values() if math.isfinite(v))
        per_period = 0.0
        for tensor in (c.dc_capacity, c.dc_cold, c.dc_very_cold,
                       c.dc_ultra_cold, c.vc_capacity, c.vehicle_capacity):
            per_period += sum(v for v in tensor.values() if math.isfinite(v))
        for scalar in (c.fleet_capacity, c.vc_total_capacity):
            if math.isfinite(scalar):
                per_period += scalar
        total += self.horizon * per_period
        total += sum(c.initial_inventory_dc.values())
        total += sum(c.initial_inventory_vc.values())
        total += self.total_demand()
        return total

    def with_scenario(self, scen: Scenario) -> "Instance":
        """Copy of the instance with scenario tensor overrides applied."""
        cat = replace(self.catalog)
        if scen.demand_by_vc:
            cat.demand_by_vc = {**cat.demand_by_vc, **scen.demand_by_vc}
        if scen.demand_by_group:
            cat.demand_by_group = {**cat.demand_by_group,
                                   **scen.demand_by_group}
        if scen.production:
            cat.production = {**cat.production, **scen.production}
        return replace(self, catalog=cat)


# -- loading -------------------------------------------------------------------


_SET_KEYS = {
    "manufacturers": "manufacturers",
    "distribution_centers": "dcs",
    "vaccination_centers": "vcs",
    "population_sites": "sites",
    "regions": "regions",
    "groups": "groups",
    "vehicles": "vehicles",
    "outreach_centers": "outreach",
}


class _Loader:
    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise InstanceError("schema", "top level must be an object")
        self.doc = doc
        self.sets: dict[str, tuple[str, ...]] = {}

    def ids(self, key: str) -> tuple[str, ...]:
        raw = self.doc.get(key, [])
        if not isinstance(raw, list):
            raise InstanceError("schema", f"{key} must be an array")
        out = []
        for item in raw:
            if isinstance(item, str):
                out.append(item)
            elif isinstance(item, dict) and "id" in item:
                out.append(str(item["id"]))
            else:
                raise InstanceError("schema",
                                    f"{key} entries must be ids or objects with id")
        return tuple(out)

    def check_ref(self, kind: str, value: str, domain: tuple[str, ...],
                  where: str) -> str:
        if value not in domain:
            raise InstanceError(
                "reference", f"{where}: {kind} {value!r} is not declared")
        return value

    def records(self, block: dict, name: str, spec: list[tuple[str, str]],
                where: str) -> dict:
        """Parse [{field..., value}] into {(idx...): float}.

        spec entries are (field, domain) where domain is a declared set name,
        "time" for a period index, or "raw" for uninterpreted keys.
        """
        raw = block.get(name, [])
        if raw is None:
            return {}
        if isinstance(raw, dict):
            raise InstanceError("schema", f"{where}.{name} must be an array")
        out = {}
        for rec in raw:
            if not isinstance(rec, dict) or "value" not in rec:
                raise InstanceError(
                    "schema", f"{where}.{name} records need index fields and value")
            key = []
            for fieldname, domain in spec:
                if fieldname not in rec:
                    raise InstanceError(
                        "schema", f"{where}.{name} record missing {fieldname!r}")
                v = rec[fieldname]
                if domain == "time":
                    if not isinstance(v, int) or isinstance(v, bool):
                        raise InstanceError(
                            "schema", f"{where}.{name}: {fieldname} must be an integer")
                    key.append(v)
                elif domain == "raw":
                    key.append(str(v))
                else:
                    key.append(self.check_ref(fieldname, str(v),
                                              self.sets[domain],
                                              f"{where}.{name}"))
            value = rec["value"]
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise InstanceError("schema",
                                    f"{where}.{name}: value must be numeric")
            k = tuple(key) if len(key) != 1 else key[0]
            out[k] = float(value)
        return out


def load_instance(path: str) -> Instance:
    """Parse and fully resolve an instance file.

    Raises InstanceError with kind "parse" (malformed JSON), "schema"
    (missing/badly-typed fields) or "reference" (undeclared ids).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InstanceError("io", str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise InstanceError("parse", str(exc)) from exc
    return instance_from_dict(doc)


def instance_from_dict(doc: dict) -> Instance:
    ld = _Loader(doc)
    time_block = doc.get("time")
    if not isinstance(time_block, dict) or "horizon" not in time_block:
        raise InstanceError("schema", "time block with horizon is required")
    horizon = time_block["horizon"]
    if not isinstance(horizon, int) or isinstance(horizon, bool):
        raise InstanceError("schema", "time.horizon must be an integer")
    grid = TimeGrid(horizon, str(time_block.get("unit", "period")))

    for key, attr in _SET_KEYS.items():
        ld.sets[attr] = ld.ids(key)
    served_by = []
    for item in doc.get("distribution_centers", []):
        if isinstance(item, dict) and "serves" in item:
            j = str(item["id"])
            ks = tuple(ld.check_ref("vaccination_center", str(k),
                                    ld.sets["vcs"], "distribution_centers.serves")
                       for k in item["serves"])
            served_by.append((j, ks))
    network = NetworkSets(
        manufacturers=ld.sets["manufacturers"], dcs=ld.sets["dcs"],
        vcs=ld.sets["vcs"], sites=ld.sets["sites"],
        regions=ld.sets["regions"], groups=ld.sets["groups"],
        vehicles=ld.sets["vehicles"], outreach=ld.sets["outreach"],
        served_by=tuple(served_by))

    vaccines: list[VaccineType] = []
    for rec in doc.get("vaccines", []):
        if not isinstance(rec, dict) or "id" not in rec:
            raise InstanceError("schema", "vaccines entries must carry an id")
        tier = rec.get("cold_tier", COLD)
        if tier not in _TIERS:
            raise InstanceError("schema",
                                f"vaccines.{rec['id']}: unknown cold_tier {tier!r}")
        restr = rec.get("manufacturers")
        if restr is not None:
            restr = tuple(ld.check_ref("manufacturer", str(i),
                                       ld.sets["manufacturers"],
                                       f"vaccines.{rec['id']}")
                          for i in restr)
        vaccines.append(VaccineType(
            id=str(rec["id"]),
            doses_per_vial=int(rec.get("doses_per_vial", 1)),
            shelf_life=int(rec.get("shelf_life", 1)),
            open_vial_life=int(rec.get("open_vial_life", 1)),
            cold_tier=tier, manufacturers=restr))
    ld.sets["vaccines"] = tuple(v.id for v in vaccines)

    cap = doc.get("capacities", {}) or {}
    cost = doc.get("costs", {}) or {}
    dem = doc.get("demand", {}) or {}
    log = doc.get("logistics", {}) or {}
    cat = ParameterCatalog()

    cat.production = ld.records(cap, "production",
                                [("manufacturer", "manufacturers"),
                                 ("vaccine", "vaccines"), ("t", "time")],
                                "capacities")
    cat.dc_capacity = ld.records(cap, "dc", [("dc", "dcs")], "capacities")
    cat.dc_safety = ld.records(cap, "dc_safety", [("dc", "dcs")], "capacities")
    cat.vc_capacity = ld.records(cap, "vc", [("vc", "vcs")], "capacities")
    cat.vc_total_capacity = float(cap.get("vc_total", INF))
    cat.fleet_capacity = float(cap.get("fleet", INF))
    cat.outreach_capacity = ld.records(cap, "outreach", [("oc", "outreach")],
                                       "capacities")
    cat.vehicle_capacity = ld.records(cap, "vehicle",
                                      [("vehicle", "vehicles")], "capacities")
    cat.dc_cold = ld.records(cap, "dc_cold", [("dc", "dcs")], "capacities")
    cat.dc_very_cold = ld.records(cap, "dc_very_cold", [("dc", "dcs")],
                                  "capacities")
    cat.dc_ultra_cold = ld.records(cap, "dc_ultra_cold", [("dc", "dcs")],
                                   "capacities")
    cat.worker_rate = (float(cap["worker_rate"])
                       if "worker_rate" in cap else None)
    cat.existing_staff = ld.records(cap, "existing_staff",
                                    [("vc", "vcs"), ("t", "time")],
                                    "capacities")
    cat.max_open_vcs = (int(cap["max_open_vcs"])
                        if "max_open_vcs" in cap else None)

    cat.shortage_cost = ld.records(cost, "shortage",
                                   [("vc", "vcs"), ("vaccine", "vaccines")],
                                   "costs")
    cat.emission_facility = float(cost.get("emission_facility", 0.0))
    cat.emission_transport = float(cost.get("emission_transport", 0.0))
    cat.vc_open_cost = ld.records(cost, "vc_open", [("vc", "vcs")], "costs")
    cat.budget = float(cost.get("budget", INF))
    cat.ordering_cost = ld.records(cost, "ordering",
                                   [("manufacturer", "manufacturers"),
                                    ("dc", "dcs")], "costs")
    cat.holding_cost = ld.records(cost, "holding", [("dc", "dcs")], "costs")
    cat.hire_cost = float(cost.get("hire_worker", 0.0))
    cat.waste_penalty = float(cost.get("waste_penalty", 1.0))

    cat.demand_by_group = ld.records(dem, "by_group",
                                     [("group", "groups"), ("vc", "vcs"),
                                      ("vaccine", "vaccines"), ("t", "time")],
                                     "demand")
    cat.demand_by_vc = ld.records(dem, "by_vc",
                                  [("vc", "vcs"), ("vaccine", "vaccines"),
                                   ("t", "time")], "demand")
    cat.demand_by_region = ld.records(dem, "by_region",
                                      [("region", "regions"),
                                       ("group", "groups")], "demand")
    cat.dc_demand_rate = ld.records(dem, "dc_rate", [("dc", "dcs")], "demand")
    cat.dc_demand_std = ld.records(dem, "dc_rate_std", [("dc", "dcs")],
                                   "demand")
    cat.min_satisfaction = float(dem.get("min_satisfaction", 0.0))
    cat.site_demand = ld.records(dem, "site", [("site", "sites")], "demand")
    cat.coverage_population = ld.records(dem, "coverage_population",
                                         [("site", "sites")], "demand")
    cat.region_population = ld.records(dem, "region_population",
                                       [("region", "regions")], "demand")
    cat.mean_supply = ld.records(dem, "mean_supply",
                                 [("vc", "vcs"), ("vaccine", "vaccines"),
                                  ("t", "time")], "demand")
    cat.std_supply = ld.records(dem, "std_supply",
                                [("vc", "vcs"), ("vaccine", "vaccines"),
                                 ("t", "time")], "demand")
    cat.mean_vehicle = ld.records(dem, "mean_vehicle",
                                  [("t", "time"), ("vehicle", "vehicles")],
                                  "demand")
    cat.std_vehicle = ld.records(dem, "std_vehicle",
                                 [("t", "time"), ("vehicle", "vehicles")],
                                 "demand")
    cat.service_alpha = float(dem.get("service_alpha", 0.05))

    cat.assign_vc_dc = ld.records(log, "assign_vc_dc",
                                  [("vc", "vcs"), ("dc", "dcs")], "logistics")
    cat.assign_site_vc = ld.records(log, "assign_site_vc",
                                    [("site", "sites"), ("vc", "vcs")],
                                    "logistics")
    cat.distance = ld.records(log, "distance",
                              [("from", "raw"), ("to", "raw")], "logistics")
    cat.travel_time = ld.records(log, "travel_time",
                                 [("from", "regions"), ("to", "regions")],
                                 "logistics")
    cat.service_time = ld.records(log, "service_time",
                                  [("region", "regions")], "logistics")
    cat.max_distance = float(log.get("max_distance", INF))
    cat.level_fraction = [float(x) for x in log.get("level_fraction", [])]
    cat.level_distance = [float(x) for x in log.get("level_distance", [])]
    cat.fair_share = ld.records(log, "fair_share",
                                [("region", "regions"), ("group", "groups")],
                                "logistics")
    cat.vial_sizes = [int(x) for x in log.get(
        "vial_sizes", sorted({v.doses_per_vial for v in vaccines}))]
    cat.initial_inventory_dc = ld.records(log, "initial_inventory_dc",
                                          [("dc", "dcs")], "logistics")
    cat.initial_inventory_vc = ld.records(log, "initial_inventory_vc",
                                          [("vc", "vcs"),
                                           ("vaccine", "vaccines")],
                                          "logistics")
    cat.lead_time = ld.records(log, "lead_time", [("dc", "dcs")], "logistics")
    cat.lead_time_std = ld.records(log, "lead_time_std", [("dc", "dcs")],
                                   "logistics")
    cat.equity_weight = float(log.get("equity_weight", 0.5))
    cat.deviation_penalty = float(log.get("deviation_penalty", 1.0))

    scen_block = doc.get("scenarios")
    scenario_set = None
    if scen_block:
        if isinstance(scen_block, list):
            scen_block = {"items": scen_block}
        items = []
        for rec in scen_block.get("items", []):
            if "id" not in rec or "probability" not in rec:
                raise InstanceError(
                    "schema", "scenario entries need id and probability")
            items.append(Scenario(
                id=str(rec["id"]), probability=float(rec["probability"]),
                demand_by_vc=ld.records(rec, "demand_by_vc",
                                        [("vc", "vcs"),
                                         ("vaccine", "vaccines"),
                                         ("t", "time")], "scenarios"),
                demand_by_group=ld.records(rec, "demand_by_group",
                                           [("group", "groups"), ("vc", "vcs"),
                                            ("vaccine", "vaccines"),
                                            ("t", "time")], "scenarios"),
                production=ld.records(rec, "production",
                                      [("manufacturer", "manufacturers"),
                                       ("vaccine", "vaccines"), ("t", "time")],
                                      "scenarios")))
        ambiguity = scen_block.get("ambiguity", {}) or {}
        scenario_set = ScenarioSet(items, dict(ambiguity))

    epi = doc.get("epi")
    inst = Instance(time_grid=grid, vaccines=vaccines, network=network,
                    catalog=cat, scenario_set=scenario_set,
                    epi=dict(epi) if epi else None)
    return inst


# -- saving --------------------------------------------------------------------


def _dump_records(tensor: dict, fields: list[str]) -> list[dict]:
    out = []
    for key in sorted(tensor, key=lambda k: tuple(str(x) for x in (
            k if isinstance(k, tuple) else (k,)))):
        idx = key if isinstance(key, tuple) else (key,)
        rec = {f: i for f, i in zip(fields, idx)}
        rec["value"] = tensor[key]
        out.append(rec)
    return out


def save_instance(inst: Instance, path: str) -> None:
    """Serialize a resolved instance; load_instance(save_instance(x)) == x."""
    c = inst.catalog
    n = inst.network
    doc: dict = {
        "time": {"horizon": inst.time_grid.horizon,
                 "unit": inst.time_grid.unit},
        "manufacturers": list(n.manufacturers),
        "distribution_centers": [
            ({"id": j, "serves": list(n.vcs_of(j))}
             if any(j == a for a, _ in n.served_by) else j)
            for j in n.dcs],
        "vaccination_centers": list(n.vcs),
        "population_sites": list(n.sites),
        "regions": list(n.regions),
        "groups": list(n.groups),
        "vehicles": list(n.vehicles),
        "outreach_centers": list(n.outreach),
        "vaccines": [
            {"id": v.id, "doses_per_vial": v.doses_per_vial,
             "shelf_life": v.shelf_life, "open_vial_life": v.open_vial_life,
             "cold_tier": v.cold_tier,
             **({"manufacturers": list(v.manufacturers)}
                if v.manufacturers is not None else {})}
            for v in inst.vaccines],
        "capacities": {
            "production": _dump_records(c.production,
                                        ["manufacturer", "vaccine", "t"]),
            "dc": _dump_records(c.dc_capacity, ["dc"]),
            "dc_safety": _dump_records(c.dc_safety, ["dc"]),
            "vc": _dump_records(c.vc_capacity, ["vc"]),
            "outreach": _dump_records(c.outreach_capacity, ["oc"]),
            "vehicle": _dump_records(c.vehicle_capacity, ["vehicle"]),
            "dc_cold": _dump_records(c.dc_cold, ["dc"]),
            "dc_very_cold": _dump_records(c.dc_very_cold, ["dc"]),
            "dc_ultra_cold": _dump_records(c.dc_ultra_cold, ["dc"]),
            "existing_staff": _dump_records(c.existing_staff, ["vc", "t"]),
        },
        "costs": {
            "shortage": _dump_records(c.shortage_cost, ["vc", "vaccine"]),
            "emission_facility": c.emission_facility,
            "emission_transport": c.emission_transport,
            "vc_open": _dump_records(c.vc_open_cost, ["vc"]),
            "ordering": _dump_records(c.ordering_cost, ["manufacturer", "dc"]),
            "holding": _dump_records(c.holding_cost, ["dc"]),
            "hire_worker": c.hire_cost,
            "waste_penalty": c.waste_penalty,
        },
        "demand": {
            "by_group": _dump_records(c.demand_by_group,
                                      ["group", "vc", "vaccine", "t"]),
            "by_vc": _dump_records(c.demand_by_vc, ["vc", "vaccine", "t"]),
            "by_region": _dump_records(c.demand_by_region,
                                       ["region", "group"]),
            "dc_rate": _dump_records(c.dc_demand_rate, ["dc"]),
            "dc_rate_std": _dump_records(c.dc_demand_std, ["dc"]),
            "min_satisfaction": c.min_satisfaction,
            "site": _dump_records(c.site_demand, ["site"]),
            "coverage_population": _dump_records(c.coverage_population,
                                                 ["site"]),
            "region_population": _dump_records(c.region_population,
                                               ["region"]),
            "mean_supply": _dump_records(c.mean_supply,
                                         ["vc", "vaccine", "t"]),
            "std_supply": _dump_records(c.std_supply, ["vc", "vaccine", "t"]),
            "mean_vehicle": _dump_records(c.mean_vehicle, ["t", "vehicle"]),
            "std_vehicle": _dump_records(c.std_vehicle, ["t", "vehicle"]),
            "service_alpha": c.service_alpha,
        },
        "logistics": {
            "assign_vc_dc": _dump_records(c.assign_vc_dc, ["vc", "dc"]),
            "assign_site_vc": _dump_records(c.assign_site_vc, ["site", "vc"]),
            "distance": _dump_records(c.distance, ["from", "to"]),
            "travel_time": _dump_records(c.travel_time, ["from", "to"]),
            "service_time": _dump_records(c.service_time, ["region"]),
            "level_fraction": c.level_fraction,
            "level_distance": c.level_distance,
            "fair_share": _dump_records(c.fair_share, ["region", "group"]),
            "vial_sizes": c.vial_sizes,
            "initial_inventory_dc": _dump_records(c.initial_inventory_dc,
                                                  ["dc"]),
            "initial_inventory_vc": _dump_records(c.initial_inventory_vc,
                                                  ["vc", "vaccine"]),
            "lead_time": _dump_records(c.lead_time, ["dc"]),
            "lead_time_std": _dump_records(c.lead_time_std, ["dc"]),
            "equity_weight": c.equity_weight,
            "deviation_penalty": c.deviation_penalty,
        },
    }
    for key, value in (("vc_total", c.vc_total_capacity),
                       ("fleet", c.fleet_capacity)):
        if math.isfinite(value):
            doc["capacities"][key] = value
    if c.worker_rate is not None:
        doc["capacities"]["worker_rate"] = c.worker_rate
    if c.max_open_vcs is not None:
        doc["capacities"]["max_open_vcs"] = c.max_open_vcs
    if math.isfinite(c.budget):
        doc["costs"]["budget"] = c.budget
    if math.isfinite(c.max_distance):
        doc["logistics"]["max_distance"] = c.max_distance
    if inst.scenario_set is not None:
        doc["scenarios"] = {
            "items": [
                {"id": s.id, "probability": s.probability,
                 "demand_by_vc": _dump_records(s.demand_by_vc,
                                               ["vc", "vaccine", "t"]),
                 "demand_by_group": _dump_records(
                     s.demand_by_group, ["group", "vc", "vaccine", "t"]),
                 "production": _dump_records(s.production,
                                             ["manufacturer", "vaccine", "t"])}
                for s in inst.scenario_set.scenarios],
            "ambiguity": inst.scenario_set.ambiguity,
        }
    if inst.epi is not None:
        doc["epi"] = inst.epi
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- validation ----------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: str
    reason: str

    def __str__(self) -> str:
        return f"{self.path}: {self.reason}"


def _check_nonneg(out: list[Violation], tensor: dict, path: str) -> None:
    for key, value in tensor.items():
        if value < 0:
            out.append(Violation(f"{path}[{key}]", "must be nonnegative"))


def validate_instance(inst: Instance) -> list[Violation]:
    """Check every instance-level invariant; violations are data, not errors."""
    out: list[Violation] = []
    if inst.time_grid.horizon < 1:
        out.append(Violation("time.horizon", "must be at least 1"))
    seen: set[str] = set()
    for name, ids in (("manufacturers", inst.network.manufacturers),
                      ("distribution_centers", inst.network.dcs),
                      ("vaccination_centers", inst.network.vcs),
                      ("population_sites", inst.network.sites),
                      ("regions", inst.network.regions),
                      ("groups", inst.network.groups),
                      ("vehicles", inst.network.vehicles),
                      ("outreach_centers", inst.network.outreach)):
        if len(set(ids)) != len(ids):
            out.append(Violation(name, "ids must be unique"))
        seen |= set(ids)
    for j, ks in inst.network.served_by:
        for k in ks:
            if k not in inst.network.vcs:
                out.append(Violation(f"distribution_centers.{j}.serves",
                                     f"{k!r} is not a declared VC"))
    for v in inst.vaccines:
        if v.doses_per_vial < 1:
            out.append(Violation(f"vaccines.{v.id}.doses_per_vial",
                                 "must be at least 1"))
        if v.shelf_life < 1:
            out.append(Violation(f"vaccines.{v.id}.shelf_life",
                                 "must be at least 1"))
        if v.open_vial_life < 1:
            out.append(Violation(f"vaccines.{v.id}.open_vial_life",
                                 "must be at least 1"))
        if v.cold_tier not in _TIERS:
            out.append(Violation(f"vaccines.{v.id}.cold_tier",
                                 f"unknown tier {v.cold_tier!r}"))
    c = inst.catalog
    for name in ("production", "dc_capacity", "dc_safety", "vc_capacity",
                 "outreach_capacity", "vehicle_capacity", "dc_cold",
                 "dc_very_cold", "dc_ultra_cold", "existing_staff"):
        _check_nonneg(out, getattr(c, name), f"capacities.{name}")
    for name, val in (("vc_total", c.vc_total_capacity),
                      ("fleet", c.fleet_capacity)):
        if val < 0:
            out.append(Violation(f"capacities.{name}", "must be nonnegative"))
    if not 0.0 <= c.min_satisfaction <= 1.0:
        out.append(Violation("demand.min_satisfaction",
                             "must lie in [0, 1]"))
    if not 0.0 <= c.service_alpha <= 1.0:
        out.append(Violation("demand.service_alpha", "must lie in [0, 1]"))
    if not 0.0 <= c.equity_weight <= 1.0:
        out.append(Violation("logistics.equity_weight", "must lie in [0, 1]"))
    theta = c.level_fraction
    if any(theta[q] > theta[q - 1] + 1e-12 for q in range(1, len(theta))):
        out.append(Violation("logistics.level_fraction",
                             "coverage fractions must be nonincreasing"))
    dist = c.level_distance
    if any(dist[q] <= dist[q - 1] for q in range(1, len(dist))):
        out.append(Violation("logistics.level_distance",
                             "coverage distances not strictly increasing"))
    if theta and dist and len(theta) != len(dist):
        out.append(Violation("logistics.level_fraction",
                             "levels and distances must align"))
    if inst.scenario_set is not None and len(inst.scenario_set):
        probs = inst.scenario_set.probabilities()
        if any(p < 0 for p in probs):
            out.append(Violation("scenarios", "probabilities must be >= 0"))
        if abs(sum(probs) - 1.0) > 1e-9:
            out.append(Violation(
                "scenarios", f"probabilities sum to {sum(probs)!r}, not 1"))
    if inst.epi is not None:
        gamma = inst.epi.get("gamma")
        if isinstance(gamma, list) and len(gamma) < inst.horizon:
            out.append(Violation("epi.gamma",
                                 "response table shorter than horizon"))
        for key in ("progression_rate", "detection_rate", "death_rate"):
            val = inst.epi.get(key, 0.0)
            if isinstance(val, (int, float)) and val < 0:
                out.append(Violation(f"epi.{key}", "rates must be >= 0"))
    return out
