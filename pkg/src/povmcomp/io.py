"""Instance file schema shared by the library and the CLI.

An instance holds register dimensions A, B, R, the state on A (x) B (x) R,
and a joint POVM acting on A:

    {"dims": {"A": 2, "B": 1, "R": 1},
     "state": [[re, im], ...],                  # row-major complex entries
     "povm": {"alphabetX": [...], "alphabetY": [...],
              "elements": {"x|y": [[re, im], ...]}}}

Serialization is canonical (sorted keys, fixed separators) so a parse +
re-dump round trip is byte identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import linalg as la
from . import qobjects as qo


def matrix_to_json(mat: np.ndarray) -> list[list[float]]:
    mat = np.asarray(mat, dtype=complex)
    return [[float(z.real), float(z.imag)] for z in mat.reshape(-1)]


def matrix_from_json(entries, dim: int) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in entries], dtype=complex)
    if flat.size != dim * dim:
        raise ValueError(f"matrix payload has {flat.size} entries, expected {dim * dim}")
    return flat.reshape(dim, dim)


@dataclass(frozen=True)
class Instance:
    dims: dict[str, int]
    state: np.ndarray
    povm: qo.JointPOVM

    @property
    def dim_a(self) -> int:
        return self.dims["A"]

    @property
    def dim_b(self) -> int:
        return self.dims["B"]

    @property
    def dim_r(self) -> int:
        return self.dims["R"]

    def layout(self) -> la.SystemLayout:
        return la.layout(("A", self.dim_a), ("B", self.dim_b), ("R", self.dim_r))

    def state_a(self) -> np.ndarray:
        return la.partial_trace(self.state, self.layout(), keep=["A"])

    def to_payload(self) -> dict:
        elements = {
            qo.join_symbol(x, y): matrix_to_json(m) for (x, y), m in self.povm.elements.items()
        }
        return {
            "dims": {k: int(v) for k, v in self.dims.items()},
            "state": matrix_to_json(self.state),
            "povm": {
                "alphabetX": list(self.povm.alphabet_x),
                "alphabetY": list(self.povm.alphabet_y),
                "elements": elements,
            },
        }


def instance_from_payload(payload: dict) -> Instance:
    dims = {k: int(v) for k, v in payload["dims"].items()}
    for reg in ("A", "B", "R"):
        if reg not in dims:
            raise ValueError(f"missing dimension for register {reg}")
        if dims[reg] < 1:
            raise ValueError(f"dimension of register {reg} must be >= 1")
    total = dims["A"] * dims["B"] * dims["R"]
    state = matrix_from_json(payload["state"], total)
    la.assert_density(state)  # validate; keep the parsed entries byte-exact
    pv = payload["povm"]
    elements = {}
    for key, entries in pv["elements"].items():
        x, y = qo.split_symbol(key)
        mat = matrix_from_json(entries, dims["A"])
        la.assert_hermitian(mat)
        elements[(x, y)] = mat
    povm = qo.JointPOVM(tuple(pv["alphabetX"]), tuple(pv["alphabetY"]), elements)
    return Instance(dims, state, povm)


def dumps_canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(inst.to_payload()))


def load_instance(path: str | Path) -> Instance:
    return instance_from_payload(json.loads(Path(path).read_text()))


BUNDLED = (
    "trivial",
    "classical_commuting",
    "qubit_cq",
    "qubit_entangled_side_info",
    "instrument_derived",
    "rate_split_showcase",
)


def bundled_instance_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ValueError(f"unknown bundled instance {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("povmcomp").joinpath("instances", f"{name}.json")))


def load_bundled(name: str) -> Instance:
    return load_instance(bundled_instance_path(name))
