"""Seeded synthetic voter-style population (ZIP, gender, year of birth, race).

Attributes are drawn independently. A spec document looks like::

    {
      "zip":       {"prefixes": ["130", "131"], "length": 5,
                    "skew": "zipf", "zipf_exponent": 1.1},
      "gender":    {"values": ["Male", "Female", "Other"], "weights": [0.49, 0.49, 0.02]},
      "yob":       {"min": 1930, "max": 2004},
      "race":      {"values": ["A", "B"], "weights": [0.5, 0.5]},
      "names":     true,
      "sensitive": {"name": "party", "values": ["X", "Y"], "weights": [0.5, 0.5]}
    }

``race``, ``names`` and ``sensitive`` are optional. Omitted weights mean uniform.
"""

from __future__ import annotations

import itertools
import math
import os
import random
from typing import Mapping

from decoyanon._util import read_json
from decoyanon.dataset import AttributeSchema, Dataset
from decoyanon.errors import ValidationError
from decoyanon.hierarchy import GeneralizationHierarchy, anchor_origin, standard_hierarchies

DEFAULT_SPEC = {
    "zip": {"prefixes": [f"13{i}" for i in range(10)], "length": 5, "skew": "zipf",
            "zipf_exponent": 1.1},
    "gender": {"values": ["Male", "Female", "Other"], "weights": [0.49, 0.49, 0.02]},
    "yob": {"min": 1930, "max": 2004},
    "race": {"values": ["White", "Black", "Hispanic", "Asian", "Other"],
             "weights": [0.6, 0.13, 0.18, 0.06, 0.03]},
    "names": True,
    "sensitive": {"name": "party", "values": ["DEM", "REP", "IND", "OTH"],
                  "weights": [0.4, 0.4, 0.15, 0.05]},
}

_FIRST = ["James", "Mary", "John", "Patricia", "Robert", "Jennifer", "Michael", "Linda",
          "David", "Elizabeth", "William", "Susan", "Richard", "Jessica", "Joseph", "Sarah"]
_LAST = ["Smith", "Johnson", "Williams", "Brown", "Jones", "Garcia", "Miller", "Davis",
         "Rodriguez", "Martinez", "Hernandez", "Lopez", "Wilson", "Anderson", "Thomas"]


def load_spec(path: str | os.PathLike) -> dict:
    spec = read_json(path)
    validate_spec(spec)
    return spec


def _categorical(spec: Mapping, key: str) -> tuple[list[str], list[float]]:
    part = spec[key]
    values = [str(v) for v in part.get("values", [])]
    if not values:
        raise ValidationError(f"{key}: empty value domain")
    if len(set(values)) != len(values):
        raise ValidationError(f"{key}: duplicate values")
    weights = part.get("weights")
    if weights is None:
        weights = [1 / len(values)] * len(values)
    weights = [float(w) for w in weights]
    if len(weights) != len(values):
        raise ValidationError(f"{key}: {len(values)} values but {len(weights)} weights")
    if any(w < 0 for w in weights):
        raise ValidationError(f"{key}: negative weight")
    if abs(math.fsum(weights) - 1) > 1e-9:
        raise ValidationError(f"{key}: weights sum to {math.fsum(weights)}, not 1")
    return values, weights


def zip_domain(spec: Mapping) -> list[str]:
    z = spec["zip"]
    length = int(z.get("length", 5))
    prefixes = [str(p) for p in z.get("prefixes", [])]
    if not prefixes:
        raise ValidationError("zip: empty prefix set")
    codes = []
    for p in prefixes:
        if not p.isdigit() or len(p) > length:
            raise ValidationError(f"zip: bad prefix {p!r} for {length}-digit codes")
        width = length - len(p)
        codes.extend(p + "".join(s) for s in itertools.product("0123456789", repeat=width))
    return sorted(set(codes))


def validate_spec(spec: Mapping) -> None:
    for key in ("zip", "gender", "yob"):
        if key not in spec:
            raise ValidationError(f"spec lacks {key!r}")
    zip_domain(spec)
    skew = spec["zip"].get("skew", "uniform")
    if skew not in ("uniform", "zipf"):
        raise ValidationError(f"zip: unknown skew {skew!r}")
    _categorical(spec, "gender")
    lo, hi = int(spec["yob"]["min"]), int(spec["yob"]["max"])
    if hi < lo:
        raise ValidationError("yob: max below min")
    if "race" in spec:
        _categorical(spec, "race")
    if "sensitive" in spec:
        _categorical(spec, "sensitive")
        if not spec["sensitive"].get("name"):
            raise ValidationError("sensitive: missing attribute name")


def population_schema(spec: Mapping) -> tuple[AttributeSchema, ...]:
    attrs = []
    if spec.get("names"):
        attrs.append(AttributeSchema("name", "direct", "categorical"))
    attrs.append(AttributeSchema("zip", "quasi", "fixed-length-code",
                                 length=int(spec["zip"].get("length", 5)), hierarchy="zip"))
    attrs.append(AttributeSchema("gender", "quasi", "categorical", hierarchy="gender"))
    attrs.append(AttributeSchema("yob", "quasi", "integer", hierarchy="yob"))
    if "race" in spec:
        attrs.append(AttributeSchema("race", "quasi", "categorical", hierarchy="race"))
    if "sensitive" in spec:
        attrs.append(AttributeSchema(spec["sensitive"]["name"], "sensitive", "categorical"))
    return tuple(attrs)


def population_hierarchies(spec: Mapping) -> dict[str, GeneralizationHierarchy]:
    """Gender/race -> root, 2/4/8-year YOB intervals, ZIP suffix masking."""
    genders, _ = _categorical(spec, "gender")
    races = _categorical(spec, "race")[0] if "race" in spec else ()
    yob = spec["yob"]
    hs = standard_hierarchies(anchor_origin([int(yob["min"])]),
                              zip_length=int(spec["zip"].get("length", 5)),
                              genders=genders, races=races)
    hs["yob"].minimum, hs["yob"].maximum = int(yob["min"]), int(yob["max"])
    return hs


def generate(n: int, seed: int, spec: Mapping | None = None) -> Dataset:
    spec = DEFAULT_SPEC if spec is None else spec
    validate_spec(spec)
    if n < 0:
        raise ValidationError("n must be >= 0")
    rng = random.Random(seed)

    zips = zip_domain(spec)
    if spec["zip"].get("skew", "uniform") == "zipf":
        s = float(spec["zip"].get("zipf_exponent", 1.0))
        order = zips[:]
        rng.shuffle(order)
        zip_weights = [1 / (rank ** s) for rank in range(1, len(order) + 1)]
        zips = order
    else:
        zip_weights = None

    columns = []
    if spec.get("names"):
        columns.append([f"{rng.choice(_FIRST)} {rng.choice(_LAST)}" for _ in range(n)])
    columns.append(rng.choices(zips, weights=zip_weights, k=n))
    columns.append(rng.choices(*_categorical(spec, "gender"), k=n))
    columns.append([rng.randint(int(spec["yob"]["min"]), int(spec["yob"]["max"]))
                    for _ in range(n)])
    if "race" in spec:
        columns.append(rng.choices(*_categorical(spec, "race"), k=n))
    if "sensitive" in spec:
        columns.append(rng.choices(*_categorical(spec, "sensitive"), k=n))
    return Dataset(population_schema(spec), list(zip(*columns)) if n else [])
