"""Small random datasets with matching hierarchies, for oracle comparisons."""

import random

from decoyanon.dataset import AttributeSchema, Dataset
from decoyanon.hierarchy import IntervalHierarchy, MappingHierarchy, SuffixMaskHierarchy

POOL = {
    "zip": (AttributeSchema("zip", "quasi", "fixed-length-code", length=3),
            SuffixMaskHierarchy("zip", 3)),
    "gender": (AttributeSchema("gender", "quasi"),
               MappingHierarchy("gender", {"M": ["P"], "F": ["P"], "O": ["P"]})),
    "yob": (AttributeSchema("yob", "quasi", "integer"),
            IntervalHierarchy("yob", [2, 4, 8], origin=1960)),
    "race": (AttributeSchema("race", "quasi"),
             MappingHierarchy("race", {r: ["*"] for r in "ABCD"})),
}


def draw(name, rng, zip_prefixes):
    if name == "zip":
        return rng.choice(zip_prefixes) + str(rng.randint(0, 9))
    if name == "gender":
        return rng.choices("MFO", weights=[10, 10, 1])[0]
    if name == "yob":
        return rng.randint(1960, 1990)
    return rng.choice("ABCD")


def random_instance(seed, n, n_quasi=None):
    """A dataset of ``n`` records over 1-4 quasi attributes plus one sensitive attribute."""
    rng = random.Random(seed)
    n_quasi = n_quasi or rng.randint(1, 4)
    names = rng.sample(sorted(POOL), n_quasi)
    prefixes = [f"{rng.randint(10, 99)}" for _ in range(rng.randint(1, 4))]
    schema = tuple(POOL[q][0] for q in names) + (AttributeSchema("dx", "sensitive"),)
    records = [tuple(draw(q, rng, prefixes) for q in names) + (rng.choice("xyz"),)
               for _ in range(n)]
    return Dataset(schema, records), {q: POOL[q][1] for q in names}


def population_and_sample(seed, n_pop, n_sample, n_quasi=None):
    pop, hs = random_instance(seed, n_pop, n_quasi)
    rng = random.Random(seed + 1)
    keep = rng.sample(range(n_pop), n_sample)
    return pop, pop.select(keep), hs


def synthetic_scenario(seed, n_pop=20_000, n_sample=1_000, k=5, limit=0.05):
    """(population, view, hierarchies) from the seeded synthetic voter population."""
    from decoyanon.anonymizer import ola_search
    from decoyanon.dataset import sample_uniform, strip_direct
    from decoyanon.synthpop import generate, population_hierarchies, DEFAULT_SPEC

    pop = strip_direct(generate(n_pop, seed))
    hs = population_hierarchies(DEFAULT_SPEC)
    sample = sample_uniform(pop, n_sample, seed + 1)
    return pop, ola_search(sample, k, limit, hierarchies=hs), hs
