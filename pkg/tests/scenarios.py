"""Random valid scenarios for property checks."""

import random

from dlaperf.algomodel import Scenario, scenario_problems

P_MAX = 4096


def random_scenario(rng: random.Random, algorithm: str, variant: str) -> Scenario:
    r = rng.choice([1, 2, 4]) if algorithm == "trsm" else 1
    if variant.startswith("25d"):
        while True:
            c = rng.choice([1, 2, 4, 8, 16])
            g = rng.choice([1, 2, 4, 8, 16, 32, 64])
            p = c * g * g
            if 4 <= p <= P_MAX:
                break
    else:
        c = 1
        g = rng.choice([2, 4, 8, 16, 32, 64])
        p = g * g
    n = g * r * rng.choice([1, 2, 3, 8, 64, 256, 1024])
    t = rng.randint(2, 12)
    sc = Scenario(algorithm, variant, n, p, c, r, t)
    assert not scenario_problems(sc), sc
    return sc
