"""Logistics: trucks within cities, airplanes between airports.

Canonical object names are positional per type: city-i, airport-i (one per
city), location-j (numbered globally across cities), truck-i (one per city),
airplane-k, package-m.
"""

from __future__ import annotations

import numpy as np

from ..pddl import Atom, DomainDef, ProblemDef, parse_domain

DOMAIN_PDDL = """\
(define (domain logistics)
  (:requirements :strips :typing)
  (:types
    place city physobj - object
    airport location - place
    package vehicle - physobj
    truck airplane - vehicle)
  (:predicates
    (in-city ?p - place ?c - city)
    (at ?obj - physobj ?p - place)
    (in ?pkg - package ?veh - vehicle))
  (:action load-truck
    :parameters (?pkg - package ?t - truck ?p - place)
    :precondition (and (at ?pkg ?p) (at ?t ?p))
    :effect (and (in ?pkg ?t) (not (at ?pkg ?p))))
  (:action unload-truck
    :parameters (?pkg - package ?t - truck ?p - place)
    :precondition (and (in ?pkg ?t) (at ?t ?p))
    :effect (and (at ?pkg ?p) (not (in ?pkg ?t))))
  (:action load-airplane
    :parameters (?pkg - package ?a - airplane ?p - airport)
    :precondition (and (at ?pkg ?p) (at ?a ?p))
    :effect (and (in ?pkg ?a) (not (at ?pkg ?p))))
  (:action unload-airplane
    :parameters (?pkg - package ?a - airplane ?p - airport)
    :precondition (and (in ?pkg ?a) (at ?a ?p))
    :effect (and (at ?pkg ?p) (not (in ?pkg ?a))))
  (:action drive-truck
    :parameters (?t - truck ?from - place ?to - place ?c - city)
    :precondition (and (at ?t ?from) (in-city ?from ?c) (in-city ?to ?c))
    :effect (and (at ?t ?to) (not (at ?t ?from))))
  (:action fly-airplane
    :parameters (?a - airplane ?from - airport ?to - airport)
    :precondition (and (at ?a ?from))
    :effect (and (at ?a ?to) (not (at ?a ?from))))
)
"""

DEFAULT_LIMITS = {
    "city": 50, "airport": 50, "location": 250, "truck": 50,
    "airplane": 10, "package": 50,
    "place": 0, "physobj": 0, "vehicle": 0,   # abstract, never instantiated
}

_DOMAIN: DomainDef | None = None


def domain_def() -> DomainDef:
    global _DOMAIN
    if _DOMAIN is None:
        _DOMAIN = parse_domain(DOMAIN_PDDL, "logistics.pddl")
    return _DOMAIN


def sample_problem(rng: np.random.Generator, name: str, n_cities: int,
                   city_size: int, n_packages: int, n_airplanes: int,
                   goal_keep_prob: float = 0.8) -> ProblemDef:
    """Random city layout with package delivery goals.

    Each city has `city_size` plain locations plus one airport and one truck.
    Every package gets a random start; a random subset gets a goal location
    different from its start. Resamples until at least one goal atom exists.
    """
    cities = [f"city-{i + 1}" for i in range(n_cities)]
    airports = [f"airport-{i + 1}" for i in range(n_cities)]
    trucks = [f"truck-{i + 1}" for i in range(n_cities)]
    locations = [f"location-{i * city_size + j + 1}"
                 for i in range(n_cities) for j in range(city_size)]
    airplanes = [f"airplane-{k + 1}" for k in range(n_airplanes)]
    packages = [f"package-{m + 1}" for m in range(n_packages)]

    places_in_city = [
        [airports[i]] + locations[i * city_size:(i + 1) * city_size]
        for i in range(n_cities)
    ]
    all_places = [p for group in places_in_city for p in group]

    init: set[Atom] = set()
    for i, group in enumerate(places_in_city):
        for p in group:
            init.add(Atom("in-city", (p, cities[i])))
    for i, t in enumerate(trucks):
        spot = places_in_city[i][int(rng.integers(len(places_in_city[i])))]
        init.add(Atom("at", (t, spot)))
    for a in airplanes:
        init.add(Atom("at", (a, airports[int(rng.integers(len(airports)))])))

    while True:
        starts = {p: all_places[int(rng.integers(len(all_places)))]
                  for p in packages}
        goal: set[Atom] = set()
        for p in packages:
            if rng.random() < goal_keep_prob:
                choices = [x for x in all_places if x != starts[p]]
                goal.add(Atom("at", (p, choices[int(rng.integers(len(choices)))])))
        if goal:
            break

    for p, spot in starts.items():
        init.add(Atom("at", (p, spot)))

    objects = (
        [(c, "city") for c in cities]
        + [(a, "airport") for a in airports]
        + [(loc, "location") for loc in locations]
        + [(t, "truck") for t in trucks]
        + [(a, "airplane") for a in airplanes]
        + [(p, "package") for p in packages]
    )
    return ProblemDef(name, "logistics", tuple(objects),
                      tuple(sorted(init)), tuple(sorted(goal)))


# ── Naive solver ─────────────────────────────────────────────────────────────

def naive_plan(prob: ProblemDef) -> list[str]:
    """Route each package independently: truck to airport, fly, truck again.

    Vehicle positions persist between package routes, so plans are valid but
    wasteful (no load consolidation, first airplane does all the flying).
    """
    city_of: dict[str, str] = {}
    for a in prob.init:
        if a.pred == "in-city":
            city_of[a.args[0]] = a.args[1]
    airport_of = {city_of[p]: p for p in city_of if p.startswith("airport-")}
    truck_of: dict[str, str] = {}
    at: dict[str, str] = {}
    for a in prob.init:
        if a.pred == "at":
            at[a.args[0]] = a.args[1]
            if a.args[0].startswith("truck-"):
                truck_of[city_of[a.args[1]]] = a.args[0]
    airplanes = sorted((o for o in at if o.startswith("airplane-")),
                       key=lambda s: int(s.split("-")[1]))

    plan: list[str] = []

    def drive(truck: str, dest: str):
        if at[truck] != dest:
            plan.append(f"(drive-truck {truck} {at[truck]} {dest} "
                        f"{city_of[dest]})")
            at[truck] = dest

    def fly(plane: str, dest: str):
        if at[plane] != dest:
            plan.append(f"(fly-airplane {plane} {at[plane]} {dest})")
            at[plane] = dest

    goals = sorted((a.args[0], a.args[1]) for a in prob.goal if a.pred == "at")
    for pkg, dest in goals:
        src = at[pkg]
        if src == dest:
            continue
        src_city, dst_city = city_of[src], city_of[dest]
        if src_city == dst_city:
            truck = truck_of[src_city]
            drive(truck, src)
            plan.append(f"(load-truck {pkg} {truck} {src})")
            drive(truck, dest)
            plan.append(f"(unload-truck {pkg} {truck} {dest})")
        else:
            src_port, dst_port = airport_of[src_city], airport_of[dst_city]
            if src != src_port:
                truck = truck_of[src_city]
                drive(truck, src)
                plan.append(f"(load-truck {pkg} {truck} {src})")
                drive(truck, src_port)
                plan.append(f"(unload-truck {pkg} {truck} {src_port})")
            plane = airplanes[0]
            fly(plane, src_port)
            plan.append(f"(load-airplane {pkg} {plane} {src_port})")
            fly(plane, dst_port)
            plan.append(f"(unload-airplane {pkg} {plane} {dst_port})")
            if dest != dst_port:
                truck = truck_of[dst_city]
                drive(truck, dst_port)
                plan.append(f"(load-truck {pkg} {truck} {dst_port})")
                drive(truck, dest)
                plan.append(f"(unload-truck {pkg} {truck} {dest})")
        at[pkg] = dest
    return plan
