"""Per-iteration training records and their JSONL serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass
class RunRecord:
    iteration: int
    loss_total: float
    loss_interior: float
    loss_dirichlet: float
    loss_neumann: float
    L1: float | None = None
    L2: float | None = None
    Linf: float | None = None
    wall_ms: float = 0.0

    def to_json_dict(self):
        # wall clock stays out of the serialized form so reruns of a
        # deterministic configuration produce byte-identical files
        out = {
            "iteration": self.iteration,
            "loss_total": self.loss_total,
            "loss_interior": self.loss_interior,
            "loss_dirichlet": self.loss_dirichlet,
            "loss_neumann": self.loss_neumann,
        }
        if self.L1 is not None:
            out.update({"L1": self.L1, "L2": self.L2, "Linf": self.Linf})
        return out


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_dict()) + "\n")


def read_jsonl(path):
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
