"""Seeded, thread-count invariant execution of experiment replicas."""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import __version__
from ..errors import NumericalError, ValidationError
from .experiments import INDEXED, REGISTRY

SCHEMA_VERSION = 1
TRAILER = ["seed", "replicas_ok", "replicas_failed", "flag"]


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def failed(self):
        return any(r[self.columns.index("replicas_failed")] for r in self.rows)


def point_seed(root, index):
    """64-bit seed of grid point ``index``; its replicas use ``SeedSequence(point_seed).spawn(reps)``."""
    state = np.random.SeedSequence(root, spawn_key=(index,)).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def replica_generators(seed, reps):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(reps)]


def _run_one(replica, params, point, rng):
    try:
        return True, replica(params, point, rng)
    except NumericalError as exc:
        return False, f"{type(exc).__name__}: {exc}"


def run_experiment(config):
    """Run every grid point and replica; returns a ResultTable.

    Replica results are gathered by index, so the output does not depend on
    ``config.threads``. Numerical failures are counted per row and flagged.
    """
    plan, replica, finish, cols = REGISTRY[config.experiment]
    params = config.params
    reps = params.get("reps", 1)
    t0 = time.perf_counter()
    points = plan(params)
    seeds = [point_seed(config.seed, i) for i in range(len(points))]
    jobs = [(i, j, rng) for i, s in enumerate(seeds) for j, rng in enumerate(replica_generators(s, reps))]
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda job: _run_one(replica, params, points[job[0]], job[2]), jobs))
    else:
        results = [_run_one(replica, params, points[i], rng) for i, _, rng in jobs]
    table = ResultTable(cols + TRAILER)
    for i, pt in enumerate(points):
        mine = [(j, results[k]) for k, (pi, j, _) in enumerate(jobs) if pi == i]
        ok = [(j, val) for j, (good, val) in mine if good]
        errors = [val for _, (good, val) in mine if not good]
        vals = ok if config.experiment in INDEXED else [v for _, v in ok]
        rows = finish(params, pt, vals) if ok else [{}]
        flag = "ok" if not errors else f"{len(errors)} failed; first: {errors[0]}"
        for row in rows:
            extra = set(row) - set(cols)
            if extra:
                raise ValidationError(f"internal: unexpected columns {sorted(extra)}")
            table.rows.append(tuple(row.get(c, float("nan")) for c in cols) + (seeds[i], len(ok), len(errors), flag))
    table.metadata = {"config": config.to_dict(), "version": __version__, "schema_version": SCHEMA_VERSION,
                      "wall_time_s": time.perf_counter() - t0}
    return table
