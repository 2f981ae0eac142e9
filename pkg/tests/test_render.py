import xml.etree.ElementTree as ET

import pytest

from evacroute.render import Geometry, RenderError, RenderSpec, render_svg
from evacroute.solver import TimeModel, attach_times, sweep_solve

SVG_NS = "{http://www.w3.org/2000/svg}"


def geometry_of(norm):
    return Geometry(
        depot=norm.base.depot, houses=norm.base.houses,
        scale_km_per_unit=norm.scale_km_per_unit,
    )


@pytest.fixture
def plan3(tiny_norm):
    plan = sweep_solve(tiny_norm, 2)  # demands 2,2,2 -> three routes
    return attach_times(plan, tiny_norm, TimeModel(8.0, 0.5))


def find_all(svg_text, cls):
    root = ET.fromstring(svg_text)
    return [e for e in root.iter() if e.get("class", "").startswith(cls)]


class TestRenderSvg:
    def test_three_legend_entries_in_fig1_format(self, plan3, tiny_norm):
        svg = render_svg(plan3, geometry_of(tiny_norm))
        entries = [e.text for e in find_all(svg, "legend-entry")]
        assert len(entries) == 3
        for i, (entry, route) in enumerate(zip(entries, plan3.routes)):
            assert entry == f"R{i}, #{len(route.visits)}, c {route.picked_up}/2, " \
                            f"t: {route.time_hours:.2f} hours"

    def test_hidden_depot_legs_drop_two_segments(self, plan3, tiny_norm):
        geom = geometry_of(tiny_norm)
        hidden = render_svg(plan3, geom, RenderSpec(hide_depot_legs=True))
        shown = render_svg(plan3, geom, RenderSpec(hide_depot_legs=False))
        for h_line, s_line in zip(find_all(hidden, "route"), find_all(shown, "route")):
            h_pts = len(h_line.get("points").split())
            s_pts = len(s_line.get("points").split())
            assert (s_pts - 1) - (h_pts - 1) == 2

    def test_structure(self, plan3, tiny_norm):
        svg = render_svg(plan3, geometry_of(tiny_norm))
        root = ET.fromstring(svg)
        assert len(find_all(svg, "route")) == 3
        assert len(find_all(svg, "house")) == 3
        assert len(find_all(svg, "depot")) == 1
        title = next(e for e in root.iter() if e.get("id") == "title")
        assert "3 routes" in title.text and "total" in title.text

    def test_distinct_colors_up_to_cycle(self, plan3, tiny_norm):
        svg = render_svg(plan3, geometry_of(tiny_norm))
        colors = [e.get("stroke") for e in find_all(svg, "route")]
        assert len(set(colors)) == 3

    def test_times_required(self, tiny_norm):
        plan = sweep_solve(tiny_norm, 2)  # no attach_times
        with pytest.raises(RenderError):
            render_svg(plan, geometry_of(tiny_norm))

    def test_deterministic(self, plan3, tiny_norm):
        geom = geometry_of(tiny_norm)
        assert render_svg(plan3, geom) == render_svg(plan3, geom)
