import numpy as np
import pytest

from evacroute import normalize
from evacroute.datasets import benchmark_datasets
from evacroute.instances import EvacInstance, NormalizedInstance

# the recorded demand seed used across the suite and the acceptance run
DEMAND_SEED = 2023


@pytest.fixture(scope="session")
def benchmark_sets():
    return benchmark_datasets(demand_seed=DEMAND_SEED)


@pytest.fixture
def tiny_norm() -> NormalizedInstance:
    inst = EvacInstance(
        name="tiny",
        depot=(0.5, 0.5),
        houses=((0.6, 0.5), (0.5, 0.6), (0.4, 0.5)),
        demands=(2, 2, 2),
        side_km=3.0,
    )
    return NormalizedInstance(base=inst, scale_km_per_unit=3.0)


def random_norm_instance(rng: np.random.Generator, n: int, name: str = "rand") -> NormalizedInstance:
    while True:
        depot = tuple(rng.uniform(0, 1, size=2))
        houses = tuple(tuple(rng.uniform(0, 1, size=2)) for _ in range(n))
        demands = tuple(int(d) for d in rng.integers(1, 5, size=n))
        try:
            inst = EvacInstance(name=name, depot=depot, houses=houses, demands=demands)
        except Exception:
            continue
        return NormalizedInstance(base=inst, scale_km_per_unit=3.0)


@pytest.fixture(scope="session")
def small_policy():
    from evacroute.neural import PolicyParams

    return PolicyParams.init_random(
        embed_dim=32, n_heads=4, n_encoder_layers=2, feedforward_dim=64, seed=5
    )


@pytest.fixture(scope="session")
def default_policy():
    from evacroute.neural import PolicyParams

    return PolicyParams.init_random(seed=5)
