"""Route-map rendering to SVG.

Hand-built SVG (no plotting library) so tests can assert on structure:
one polyline per route, house dots, the black transition square, and a
legend whose entries follow the "R0, #6, c 14/16, t: 0.86 hours"
convention. The first and last leg of every route (to and from the
square) are omitted by default.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

from .solver import FleetPlan

# matplotlib tab10
ROUTE_COLORS = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


class RenderError(Exception):
    pass


@dataclass(frozen=True)
class RenderSpec:
    width_px: int = 640
    height_px: int = 640
    margin_px: int = 40
    legend_width_px: int = 230
    colors: tuple[str, ...] = ROUTE_COLORS
    legend_format: str = "R{i}, #{n}, c {load}/{cap}, t: {hours:.2f} hours"
    hide_depot_legs: bool = True


@dataclass(frozen=True)
class Geometry:
    depot: tuple[float, float]
    houses: tuple[tuple[float, float], ...]
    scale_km_per_unit: float = 3.0

    @classmethod
    def from_dict(cls, data: dict) -> "Geometry":
        return cls(
            depot=tuple(data["depot"]),
            houses=tuple(tuple(h) for h in data["houses"]),
            scale_km_per_unit=float(data.get("scale_km_per_unit", 3.0)),
        )


def render_svg(plan: FleetPlan, geom: Geometry, spec: RenderSpec = RenderSpec()) -> str:
    """Render one plan; every route needs its evaluated time for the legend."""
    for r in plan.routes:
        if r.time_hours is None:
            raise RenderError("route times missing; evaluate the plan before rendering")
        for v in r.visits:
            if not 0 <= v < len(geom.houses):
                raise RenderError(f"route visits house {v}, geometry has {len(geom.houses)}")

    w, h, m = spec.width_px, spec.height_px, spec.margin_px
    span_x, span_y = w - 2 * m, h - 2 * m

    def px(p):
        return (m + p[0] * span_x, m + (1.0 - p[1]) * span_y)  # svg y grows downward

    total = sum(r.time_hours for r in plan.routes)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{w + spec.legend_width_px}" height="{h}" '
        f'viewBox="0 0 {w + spec.legend_width_px} {h}">',
        f'<rect width="{w + spec.legend_width_px}" height="{h}" fill="white"/>',
        f'<text id="title" x="{m}" y="{m - 16}" font-size="13" font-family="sans-serif">'
        f"{escape(plan.instance_ref)}: total {total:.2f} hours, {plan.n_routes} routes</text>",
    ]

    for i, route in enumerate(plan.routes):
        color = spec.colors[i % len(spec.colors)]
        pts = [geom.houses[v] for v in route.visits]
        if not spec.hide_depot_legs:
            pts = [geom.depot, *pts, geom.depot]
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in (px(p) for p in pts))
        parts.append(
            f'<polyline class="route" points="{coords}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )

    for x, y in (px(hp) for hp in geom.houses):
        parts.append(f'<circle class="house" cx="{x:.2f}" cy="{y:.2f}" r="3" fill="#333333"/>')
    dx, dy = px(geom.depot)
    parts.append(
        f'<rect class="depot" x="{dx - 5:.2f}" y="{dy - 5:.2f}" width="10" height="10" fill="black"/>'
    )

    parts.append('<g id="legend">')
    for i, route in enumerate(plan.routes):
        color = spec.colors[i % len(spec.colors)]
        label = spec.legend_format.format(
            i=i, n=len(route.visits), load=route.picked_up, cap=plan.capacity,
            hours=route.time_hours,
        )
        y = m + 18 * i
        parts.append(f'<rect x="{w + 8}" y="{y - 9}" width="12" height="12" fill="{color}"/>')
        parts.append(
            f'<text class="legend-entry" x="{w + 26}" y="{y}" font-size="11" '
            f'font-family="sans-serif">{escape(label)}</text>'
        )
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
