"""Bundled benchmark neighborhoods and the four-dataset ladder.

The shipped .vrp files are synthetic stand-ins with the set-A layout
and dimensions (see their COMMENT lines); drop the original CVRPLIB
files into place, or pass paths, to run on the benchmark geometry.
Dataset 1 is the first 20 houses of the 36-node file; datasets 2-4 use
all houses of the 36-, 53-, and 69-node files.
"""

from __future__ import annotations

from importlib import resources

from .instances import DemandModel, EvacInstance, parse_cvrplib, regenerate_demands, truncate_instance

BUNDLED = ("A-n36-k5", "A-n53-k7", "A-n69-k9")


def load_bundled(name: str) -> EvacInstance:
    if name not in BUNDLED:
        raise KeyError(f"no bundled instance {name!r}; available: {BUNDLED}")
    text = resources.files("evacroute.data").joinpath(f"{name}.vrp").read_text()
    return parse_cvrplib(text)


def benchmark_datasets(demand_seed: int = 0) -> list[tuple[str, EvacInstance]]:
    """The 20/35/52/68-house neighborhoods with regenerated household demands."""
    model = DemandModel(seed=demand_seed)
    a36 = load_bundled("A-n36-k5")
    raw = [
        ("dataset1-n20", truncate_instance(a36, 20)),
        ("dataset2-n35", a36),
        ("dataset3-n52", load_bundled("A-n53-k7")),
        ("dataset4-n68", load_bundled("A-n69-k9")),
    ]
    return [(name, regenerate_demands(inst, model)) for name, inst in raw]
