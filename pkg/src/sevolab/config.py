"""Experiment configuration: one JSON document per experiment.

The document fully determines a run (system, grid, data, knobs,
tolerances), round-trips losslessly, and is hashed so every output
directory can name the exact configuration that produced it.  Flags
override fields by dotted path into the JSON structure.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .exponents import SystemParams
from .solver import ComponentData, GridSpec, InitialData

KINDS = ("exponents", "kernels", "decay", "blowup", "lifespan",
         "testfunc", "convergence")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment description.

    grid and data may be None for kinds that need neither (exponents,
    kernels, testfunc).  tolerances and options are free-form scalar
    maps; the seed is recorded for provenance (the experiments
    themselves are deterministic).
    """

    kind: str
    params: SystemParams
    grid: GridSpec | None = None
    data: InitialData | None = None
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(
                f"unknown experiment kind {self.kind!r}; pick one of "
                f"{', '.join(KINDS)}"
            )
        if self.grid is not None and self.grid.n != self.params.n:
            raise ValueError(
                f"grid dimension {self.grid.n} != system dimension "
                f"{self.params.n}"
            )
        if self.data is not None and len(self.data.components) != self.params.k:
            raise ValueError(
                f"{len(self.data.components)} data components for a "
                f"{self.params.k}-component system"
            )


def config_to_dict(config: ExperimentConfig) -> dict:
    doc = {
        "kind": config.kind,
        "params": {
            "n": config.params.n,
            "sigma": config.params.sigma,
            "p": list(config.params.p),
        },
        "grid": None if config.grid is None else {
            "N": config.grid.N,
            "L": config.grid.L,
        },
        "data": None if config.data is None else {
            "epsilon": config.data.epsilon,
            "components": [asdict(c) | {"center": list(c.center)}
                           for c in config.data.components],
        },
        "tolerances": dict(config.tolerances),
        "options": dict(config.options),
        "out": config.out,
        "seed": config.seed,
    }
    return doc


def config_from_dict(doc: dict) -> ExperimentConfig:
    p = doc["params"]
    params = SystemParams(n=int(p["n"]), sigma=float(p["sigma"]),
                          k=len(p["p"]), p=tuple(float(x) for x in p["p"]))
    grid = None
    if doc.get("grid") is not None:
        g = doc["grid"]
        grid = GridSpec(n=params.n, N=int(g["N"]), L=float(g["L"]))
    data = None
    if doc.get("data") is not None:
        d = doc["data"]
        data = InitialData(
            epsilon=float(d["epsilon"]),
            components=tuple(
                ComponentData(
                    amp0=float(c.get("amp0", 0.0)),
                    amp1=float(c.get("amp1", 0.0)),
                    width=float(c.get("width", 1.0)),
                    center=tuple(float(x) for x in c.get("center", ())),
                )
                for c in d["components"]
            ),
        )
    return ExperimentConfig(
        kind=doc["kind"],
        params=params,
        grid=grid,
        data=data,
        tolerances=dict(doc.get("tolerances", {})),
        options=dict(doc.get("options", {})),
        out=doc.get("out"),
        seed=int(doc.get("seed", 0)),
    )


def config_to_json(config: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, indent=2) + "\n"


def config_from_json(text: str) -> ExperimentConfig:
    return config_from_dict(json.loads(text))


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _parse_value(text: str):
    """JSON if it parses, else a comma list, else the bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        if "," in text:
            return [_parse_value(item) for item in text.split(",")]
        return text


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply `dotted.path=value` assignments to a config document.

    Integer segments index into lists (data.components.0.amp0=2);
    missing dict levels are created on the way down.
    """
    for assignment in assignments:
        if "=" not in assignment:
            raise ValueError(
                f"override {assignment!r} is not of the form path=value"
            )
        path, _, raw = assignment.partition("=")
        keys = path.split(".")
        node = doc
        for key in keys[:-1]:
            if isinstance(node, list):
                node = node[int(key)]
            else:
                node = node.setdefault(key, {})
        last = keys[-1]
        if isinstance(node, list):
            node[int(last)] = _parse_value(raw)
        else:
            node[last] = _parse_value(raw)
    return doc
