"""CVRP instance model for neighborhood evacuation planning.

Holds the instance data class, a CVRPLIB-format parser/serializer, the
household-size demand generator, and the unit-square geometry with
physical (km) scaling. Distances are Manhattan throughout.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

Point = tuple[float, float]

DEFAULT_SIDE_KM = 3.0


class InstanceError(Exception):
    """Base class for instance construction and parsing failures."""


class MissingSection(InstanceError):
    def __init__(self, section: str):
        super().__init__(f"required section or record missing: {section}")
        self.section = section


class MalformedRecord(InstanceError):
    def __init__(self, line_no: int, line: str, reason: str):
        super().__init__(f"line {line_no}: {reason}: {line!r}")
        self.line_no = line_no


class DimensionMismatch(InstanceError):
    pass


class OutOfRange(InstanceError):
    pass


class DegenerateGeometry(InstanceError):
    pass


@dataclass(frozen=True)
class EvacInstance:
    """One neighborhood: a rescue center plus houses with pickup demands.

    Coordinates are in the instance's own (unitless) system; ``side_km``
    states the physical side length of the bounding square. ``demands``
    holds persons per house, aligned with ``houses``. ``file_capacity``
    is metadata from the source file; scenario capacity always governs.
    """

    name: str
    depot: Point
    houses: tuple[Point, ...]
    demands: tuple[int, ...]
    side_km: float = DEFAULT_SIDE_KM
    file_capacity: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "houses", tuple((float(x), float(y)) for x, y in self.houses))
        object.__setattr__(self, "demands", tuple(int(d) for d in self.demands))
        object.__setattr__(self, "depot", (float(self.depot[0]), float(self.depot[1])))
        if not self.houses:
            raise InstanceError("instance has no houses")
        if len(self.demands) != len(self.houses):
            raise InstanceError(
                f"{len(self.demands)} demands for {len(self.houses)} houses"
            )
        if any(d < 1 for d in self.demands):
            raise InstanceError("every house demand must be >= 1")
        for p in (self.depot, *self.houses):
            if not (math.isfinite(p[0]) and math.isfinite(p[1])):
                raise InstanceError(f"non-finite coordinate {p}")
        if any(h == self.depot for h in self.houses):
            raise InstanceError("house placed exactly at the depot coordinate")
        if not (self.side_km > 0):
            raise InstanceError("side_km must be positive")

    @property
    def n_houses(self) -> int:
        return len(self.houses)

    @property
    def population(self) -> int:
        return sum(self.demands)


@dataclass(frozen=True)
class NormalizedInstance:
    """An instance mapped into the unit square, plus the km-per-unit scale.

    One shared scale for both axes keeps Manhattan distances isotropic;
    de-normalizing any pairwise distance reproduces the physical one.
    """

    base: EvacInstance
    scale_km_per_unit: float

    def __post_init__(self):
        eps = 1e-9
        for p in (self.base.depot, *self.base.houses):
            if not (-eps <= p[0] <= 1 + eps and -eps <= p[1] <= 1 + eps):
                raise InstanceError(f"normalized coordinate {p} outside the unit square")


@dataclass(frozen=True)
class DemandModel:
    """Household-size sampler: clamped, integer-rounded normal draws."""

    mean: float = 2.44
    std_dev: float = 0.5
    min_size: int = 1
    max_size: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.min_size < 1 or self.max_size < self.min_size:
            raise InstanceError("demand model requires 1 <= min_size <= max_size")

    def sample(self, n: int) -> tuple[int, ...]:
        rng = np.random.default_rng(self.seed)
        draws = rng.normal(self.mean, self.std_dev, size=n)
        return tuple(household_size(x, self.min_size, self.max_size) for x in draws)


def household_size(draw: float, min_size: int = 1, max_size: int = 4) -> int:
    """Round half away from zero, then clamp to the legal household range."""
    rounded = int(math.copysign(math.floor(abs(draw) + 0.5), draw))
    return max(min_size, min(max_size, rounded))


_KEYWORD_RE = re.compile(r"^\s*([A-Z_][A-Z_0-9]*)\s*:\s*(.*?)\s*$")
_SECTIONS = ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION")


def parse_cvrplib(text: str, side_km: float = DEFAULT_SIDE_KM) -> EvacInstance:
    """Parse a CVRPLIB/TSPLIB-style instance.

    The depot comes from DEPOT_SECTION; the remaining DIMENSION-1 nodes
    become houses in file order. File demands are retained (the demand
    generator may replace them later); CAPACITY is surfaced as metadata
    only. Indices are 1-based in the file, 0-based internally.
    """
    keywords: dict[str, tuple[str, int]] = {}
    coords: dict[int, Point] = {}
    demands: dict[int, int] = {}
    depot_ids: list[int] = []
    section = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        if line in _SECTIONS:
            section = line
            continue
        m = _KEYWORD_RE.match(line)
        if m and section is None:
            keywords[m.group(1)] = (m.group(2), line_no)
            continue
        parts = line.split()
        if section == "NODE_COORD_SECTION":
            if len(parts) != 3:
                raise MalformedRecord(line_no, line, "expected 'index x y'")
            try:
                coords[int(parts[0])] = (float(parts[1]), float(parts[2]))
            except ValueError:
                raise MalformedRecord(line_no, line, "non-numeric coordinate record")
        elif section == "DEMAND_SECTION":
            if len(parts) != 2:
                raise MalformedRecord(line_no, line, "expected 'index demand'")
            try:
                demands[int(parts[0])] = int(parts[1])
            except ValueError:
                raise MalformedRecord(line_no, line, "non-numeric demand record")
        elif section == "DEPOT_SECTION":
            try:
                value = int(parts[0])
            except ValueError:
                raise MalformedRecord(line_no, line, "non-numeric depot record")
            if value != -1:
                depot_ids.append(value)
        else:
            raise MalformedRecord(line_no, line, "data outside any known section")

    for key in ("NAME", "DIMENSION", "CAPACITY"):
        if key not in keywords:
            raise MissingSection(key)
    for sec, found in (
        ("NODE_COORD_SECTION", coords),
        ("DEMAND_SECTION", demands),
        ("DEPOT_SECTION", depot_ids),
    ):
        if not found:
            raise MissingSection(sec)

    numeric = {}
    for key in ("DIMENSION", "CAPACITY"):
        value, line_no = keywords[key]
        try:
            numeric[key] = int(value)
        except ValueError:
            raise MalformedRecord(line_no, value, f"{key} is not an integer")
    dimension, capacity = numeric["DIMENSION"], numeric["CAPACITY"]

    if len(coords) != dimension:
        raise DimensionMismatch(
            f"DIMENSION={dimension} but {len(coords)} coordinate records"
        )
    if len(demands) != dimension:
        raise DimensionMismatch(
            f"DIMENSION={dimension} but {len(demands)} demand records"
        )

    depot_id = depot_ids[0]
    if depot_id not in coords:
        raise DimensionMismatch(f"depot index {depot_id} has no coordinate record")

    house_ids = [i for i in coords if i != depot_id]  # file order, depot removed
    missing = [i for i in house_ids if i not in demands]
    if missing:
        raise DimensionMismatch(f"no demand record for node(s) {missing}")
    return EvacInstance(
        name=keywords["NAME"][0],
        depot=coords[depot_id],
        houses=tuple(coords[i] for i in house_ids),
        demands=tuple(demands[i] for i in house_ids),
        side_km=side_km,
        file_capacity=capacity,
    )


def serialize_cvrplib(inst: EvacInstance) -> str:
    """Write an instance back to CVRPLIB text; round-trips through the parser."""
    lines = [
        f"NAME : {inst.name}",
        "TYPE : CVRP",
        f"DIMENSION : {inst.n_houses + 1}",
        "EDGE_WEIGHT_TYPE : MAN_2D",
        f"CAPACITY : {inst.file_capacity if inst.file_capacity is not None else max(inst.demands)}",
        "NODE_COORD_SECTION",
        f"1 {inst.depot[0]!r} {inst.depot[1]!r}",
    ]
    for i, (x, y) in enumerate(inst.houses, start=2):
        lines.append(f"{i} {x!r} {y!r}")
    lines.append("DEMAND_SECTION")
    lines.append("1 0")
    for i, d in enumerate(inst.demands, start=2):
        lines.append(f"{i} {d}")
    lines += ["DEPOT_SECTION", "1", "-1", "EOF", ""]
    return "\n".join(lines)


def truncate_instance(inst: EvacInstance, k: int) -> EvacInstance:
    """Keep the depot and the first k houses in file order."""
    if not 1 <= k <= inst.n_houses:
        raise OutOfRange(f"k={k} outside 1..{inst.n_houses}")
    if k == inst.n_houses:
        return inst
    return replace(
        inst,
        name=f"{inst.name}-first{k}",
        houses=inst.houses[:k],
        demands=inst.demands[:k],
    )


def regenerate_demands(inst: EvacInstance, model: DemandModel) -> EvacInstance:
    """Replace file demands with independent household-size draws."""
    return replace(inst, demands=model.sample(inst.n_houses))


def normalize(inst: EvacInstance) -> NormalizedInstance:
    """Map the instance into the unit square with one shared axis scale.

    The bounding box's min corner moves to the origin and both axes are
    divided by the larger axis range, so the bigger extent spans [0, 1]
    and the aspect ratio is preserved.
    """
    xs = [inst.depot[0]] + [h[0] for h in inst.houses]
    ys = [inst.depot[1]] + [h[1] for h in inst.houses]
    x0, y0 = min(xs), min(ys)
    extent = max(max(xs) - x0, max(ys) - y0)
    if extent <= 0:
        raise DegenerateGeometry("all coordinates identical; nothing to normalize")

    def to_unit(p: Point) -> Point:
        return ((p[0] - x0) / extent, (p[1] - y0) / extent)

    base = replace(
        inst,
        depot=to_unit(inst.depot),
        houses=tuple(to_unit(h) for h in inst.houses),
    )
    return NormalizedInstance(base=base, scale_km_per_unit=inst.side_km)


def manhattan_km(a: Point, b: Point, scale_km_per_unit: float) -> float:
    return (abs(a[0] - b[0]) + abs(a[1] - b[1])) * scale_km_per_unit
