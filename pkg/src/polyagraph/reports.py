"""Delimited and JSON output. Floats are written with 17 significant digits."""

from __future__ import annotations

import json
from typing import IO, Iterable

import numpy as np

from .equilibria import EquilibriumSet
from .experiments import _clean, fmt


def write_rows(fh: IO[str], header: Iterable[str], rows: Iterable[Iterable]) -> None:
    fh.write(",".join(header) + "\n")
    for row in rows:
        fh.write(",".join(v if isinstance(v, str) else (str(v) if isinstance(v, (int, np.integer)) else fmt(v))
                          for v in row) + "\n")


def write_trajectory(fh: IO[str], index, x: np.ndarray, index_name: str = "step", prefix: str = "x") -> None:
    """``step,x_1,...,x_m`` (or ``t,...`` for ODE output), one row per record."""
    m = x.shape[1]
    header = [index_name] + [f"{prefix}_{i + 1}" for i in range(m)]
    write_rows(fh, header, ([int(s) if index_name == "step" else float(s), *map(float, row)]
                            for s, row in zip(index, x)))


def equilibria_rows(eqs: EquilibriumSet, m: int):
    header = ["support"] + [f"x_{i + 1}" for i in range(m)] + ["classification", "max_real_part_nonzero_eig"]
    rows = []
    for e in eqs:
        sup = " ".join(str(i + 1) for i in e.support)
        rows.append([sup, *map(float, e.point), e.classification.value, e.max_real_part_nonzero])
    return header, rows


def _eigs(ev):
    return None if ev is None else [[float(z.real), float(z.imag)] for z in ev]


def equilibria_document(eqs: EquilibriumSet) -> dict:
    return _clean({
        "equilibria": [
            {
                "support": [i + 1 for i in e.support],
                "point": e.point,
                "classification": e.classification.value,
                "reason": e.reason,
                "isolated": e.isolated,
                "spectrum": _eigs(e.spectrum),
                "tangent_spectrum": _eigs(e.tangent_eigs),
                "off_support_gradient": {str(i + 1): d for i, d in e.off_support_gradient.items()},
                "max_real_part_nonzero_eig": e.max_real_part_nonzero,
            }
            for e in eqs
        ],
        "continua": [
            {
                "support": [i + 1 for i in c.support],
                "null_dim": c.null_dim,
                "direction": c.direction,
                "n_samples": len(c.samples),
            }
            for c in eqs.continua
        ],
        "faces": [
            {"support": [i + 1 for i in f.support], "found": f.found,
             "failed_starts": f.failed_starts, "reasons": f.reasons}
            for f in eqs.faces
        ],
    })


def dump_json(doc: dict, fh: IO[str]) -> None:
    fh.write(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n")
