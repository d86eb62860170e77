"""Experiment configuration: JSON file, per-experiment parameter schema, strict validation."""

import copy
import json
from dataclasses import dataclass, field

from ..errors import ValidationError

SEED_MAX = 2**64 - 1

SPECTRUM_DEFAULT = {"kind": "power_law", "alpha": 1.5, "p": 300}
BETA_DEFAULT = {"kind": "e1"}
THREE_HERMITE = {"kind": "hermite_ridge", "coeffs": [0.0, 0.6324555320336759, 0.4472135954999579, 0.0,
                                                     0.09128709291752768]}

SCHEMAS = {
    "predict-risk": {
        "spectrum": SPECTRUM_DEFAULT, "beta": BETA_DEFAULT, "n": 100,
        "lambdas": [0.0, 0.01, 1.0], "tau": 0.5,
    },
    "simulate-ridge": {
        "spectrum": {"kind": "isotropic", "p": 1000}, "beta": BETA_DEFAULT, "n": 500,
        "lambdas": [0.0], "tau": 0.5, "design": "gaussian", "reps": 10,
    },
    "latent": {
        "d": 20, "mu": 1.0, "r_theta": 1.0, "tau": 0.0, "n": 400,
        "gammas": [0.5, 0.8, 1.25, 2.0, 4.0, 8.0], "lambda": 0.0, "risk": "excess", "reps": 20,
    },
    "krr-staircase": {
        "d": 25, "ns": [25, 125, 532], "lambda": 0.0, "tau": 0.5, "kernel": "rf", "activation": "exp",
        "target": {"kind": "ridge", "phi": "he2"}, "n_test": 2000, "reps": 5,
    },
    "rf-double-descent": {
        "d": 40, "n": 120, "N_over_n": [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0, 8.0], "lambda": 1e-8, "tau": 0.3,
        "activation": "relu", "target": {"kind": "linear"}, "n_test": 2000, "reps": 20,
    },
    "nt-concentration": {
        "d": 20, "n": 200, "N_over_n_over_d": [2, 4, 8, 16], "activation": "relu", "reps": 10,
    },
    "nt-vs-krr": {
        "d": 20, "n": 444, "Nd_over_n": [10.0, 40.0], "lambda": 0.0, "tau": 0.5, "activation": "relu",
        "target": THREE_HERMITE, "n_test": 2000, "reps": 5,
    },
    "meanfield": {
        "d": 20, "N": 64, "mode": "sgd", "eta": 0.0125, "steps": 479, "dt": 0.1, "record_every": 50,
        "activation": "tanh", "target": "", "tau": 0.0, "gamma": 0.1, "a_init": 1.0, "reps": 1,
        "state_out": "",
    },
    "single-neuron": {
        "d": 20, "ns": [2397], "tau": 0.5, "activation": "tanh", "n_inits": 5, "guard_c": 0.017, "reps": 1,
    },
}

EXPERIMENTS = tuple(SCHEMAS)
TOP_LEVEL = ("experiment", "seed", "threads", "params")


def _check_type(name, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    elif isinstance(default, dict):
        ok = isinstance(value, dict)
    else:
        ok = False
    if not ok:
        raise ValidationError(f"field 'params.{name}': expected {type(default).__name__}, got {value!r}")
    if isinstance(default, float):
        return float(value)
    return copy.deepcopy(value)


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in SCHEMAS:
            raise ValidationError(f"field 'experiment': unknown experiment {self.experiment!r}; "
                                  f"known: {', '.join(EXPERIMENTS)}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed <= SEED_MAX:
            raise ValidationError(f"field 'seed': must be an integer in [0, 2^64 - 1], got {self.seed!r}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ValidationError(f"field 'threads': must be a positive integer, got {self.threads!r}")
        if not isinstance(self.params, dict):
            raise ValidationError("field 'params': must be an object")
        schema = SCHEMAS[self.experiment]
        unknown = sorted(set(self.params) - set(schema))
        if unknown:
            raise ValidationError(f"field 'params.{unknown[0]}': unknown parameter for {self.experiment}; "
                                  f"allowed: {', '.join(schema)}")
        full = {}
        for key, default in schema.items():
            full[key] = _check_type(key, self.params[key], default) if key in self.params else copy.deepcopy(default)
        if "reps" in full and full["reps"] < 1:
            raise ValidationError("field 'params.reps': must be >= 1")
        self.params = full

    def to_dict(self):
        return {"experiment": self.experiment, "seed": self.seed, "threads": self.threads,
                "params": copy.deepcopy(self.params)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        unknown = sorted(set(raw) - set(TOP_LEVEL))
        if unknown:
            raise ValidationError(f"field '{unknown[0]}': unknown top-level key; allowed: {', '.join(TOP_LEVEL)}")
        if "experiment" not in raw:
            raise ValidationError("field 'experiment': required")
        return cls(raw["experiment"], raw.get("params", {}), raw.get("seed", 0), raw.get("threads", 1))

    @classmethod
    def from_json(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(raw)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return ExperimentConfig.from_json(fh.read())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
