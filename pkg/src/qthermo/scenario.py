"""Scenario files: JSON documents describing one run of the command-line tool.

Complex matrices are row-major nested lists whose entries are ``[re, im]``
pairs; a bare number is accepted as a real entry. Every document carries a
``kind`` and a kind-specific ``payload``; ``seed`` and ``units`` (``k``,
``hbar``) are optional.
"""

import copy
import json
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from .verify import DEFAULT_TOLERANCES

KINDS = ("ergotropy", "passivity", "thermalize", "isothermal", "entropy_protocol", "cycle",
         "verify")


class ScenarioError(ValueError):
    """Schema or structural problem in a scenario document."""


def encode_matrix(M) -> list:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def decode_matrix(data, path="matrix") -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ScenarioError(f"{path}: expected a non-empty list of rows")
    n = len(data)
    rows = []
    for i, row in enumerate(data):
        if len(row) != n:
            raise ScenarioError(f"{path}[{i}]: matrix is not square ({len(row)} entries, "
                                f"{n} rows)")
        vals = []
        for j, z in enumerate(row):
            if isinstance(z, (int, float)) and not isinstance(z, bool):
                vals.append(complex(z))
            elif isinstance(z, list) and len(z) == 2 and all(
                    isinstance(x, (int, float)) and not isinstance(x, bool) for x in z):
                vals.append(complex(z[0], z[1]))
            else:
                raise ScenarioError(f"{path}[{i}][{j}]: entry must be a number or [re, im]")
        rows.append(vals)
    return np.array(rows, dtype=complex)


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_MATRIX = {
    "type": "array", "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {
        "anyOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}},
}
_VECTOR = {"type": "array", "minItems": 1, "items": _NUM}
_STATE = {
    "type": "object",
    "oneOf": [
        {"required": ["matrix"]},
        {"required": ["probabilities"]},
        {"required": ["hamiltonian", "beta"]},
        {"required": ["hamiltonian", "mean_energy"]},
    ],
    "properties": {
        "matrix": _MATRIX, "probabilities": _VECTOR, "basis": _MATRIX,
        "hamiltonian": _MATRIX, "beta": _POS, "mean_energy": _NUM,
    },
    "additionalProperties": False,
}
_SEGMENT = {
    "type": "object", "required": ["duration", "H"],
    "properties": {"duration": _POS, "H": _MATRIX, "H_end": _MATRIX},
    "additionalProperties": False,
}
_SCHEDULE = {
    "type": "object", "required": ["segments"],
    "properties": {"segments": {"type": "array", "minItems": 1, "items": _SEGMENT}},
    "additionalProperties": False,
}
_COUPLING = {
    "oneOf": [
        _MATRIX,
        {"type": "object", "required": ["exchange"], "properties": {"exchange": _NUM},
         "additionalProperties": False},
        {"type": "object", "required": ["random_seed"],
         "properties": {"random_seed": {"type": "integer", "minimum": 0}, "scale": _POS},
         "additionalProperties": False},
    ]
}
_BATH = {
    "type": "object", "required": ["beta", "ancilla_hamiltonian", "coupling", "contact_time"],
    "properties": {
        "beta": _POS, "ancilla_hamiltonian": _MATRIX, "coupling": _COUPLING,
        "contact_time": _POS,
        "reuse_probability": {"type": "number", "minimum": 0, "maximum": 1},
        "mixing": {"type": "number", "minimum": 0, "maximum": 1},
    },
    "additionalProperties": False,
}

PAYLOAD_SCHEMAS = {
    "ergotropy": {
        "type": "object", "required": ["hamiltonian", "state"],
        "properties": {
            "hamiltonian": _MATRIX, "state": _STATE,
            "extraction": {
                "type": "object",
                "properties": {
                    "mode": {"enum": ["piecewise", "formula"]}, "tau": _POS,
                    "steps": {"type": "array", "items": _INT1, "minItems": 1},
                },
                "additionalProperties": False,
            },
        },
        "additionalProperties": False,
    },
    "passivity": {
        "type": "object", "required": ["energies", "probabilities"],
        "properties": {
            "energies": _VECTOR, "probabilities": _VECTOR, "N_max": _INT1,
            "max_compositions": _INT1,
            "tolerance": _POS,
        },
        "additionalProperties": False,
    },
    "thermalize": {
        "type": "object", "required": ["hamiltonian", "state", "bath", "collisions"],
        "properties": {
            "hamiltonian": _MATRIX, "state": _STATE, "bath": _BATH,
            "collisions": _INT1, "steps_per_collision": _INT1,
        },
        "additionalProperties": False,
    },
    "isothermal": {
        "type": "object", "required": ["path", "beta", "steps"],
        "properties": {"path": _SCHEDULE, "beta": _POS, "steps": _INT1},
        "additionalProperties": False,
    },
    "entropy_protocol": {
        "type": "object",
        "required": ["state", "hamiltonian_initial", "target_state", "hamiltonian_final",
                     "temperature"],
        "properties": {
            "state": _STATE, "target_state": _STATE,
            "hamiltonian_initial": _MATRIX, "hamiltonian_final": _MATRIX,
            "temperature": _POS, "steps": _INT1,
            "mode": {"enum": ["direct", "schedule"]},
            "stage_time": _POS, "stage_steps": _INT1,
        },
        "additionalProperties": False,
    },
    "cycle": {
        "type": "object", "required": ["hamiltonian", "state", "plan"],
        "properties": {
            "hamiltonian": _MATRIX, "state": _STATE,
            "plan": {"type": "array", "minItems": 1, "items": {"oneOf": [
                {"type": "object", "required": ["drive"], "additionalProperties": False,
                 "properties": {"drive": {
                     "type": "object", "required": ["segments"],
                     "properties": {"segments": _SCHEDULE["properties"]["segments"],
                                    "steps": _INT1},
                     "additionalProperties": False}}},
                {"type": "object", "required": ["contact"], "additionalProperties": False,
                 "properties": {"contact": {
                     "type": "object", "required": ["bath"],
                     "properties": {"bath": _BATH, "collisions": _INT1, "steps": _INT1},
                     "additionalProperties": False}}},
            ]}},
        },
        "additionalProperties": False,
    },
    "verify": {
        "type": "object",
        "properties": {
            "trials": _INT1,
            "dims": {"type": "array", "minItems": 1,
                     "items": {"type": "integer", "minimum": 2, "maximum": 8}},
            "tolerances": {"type": "object", "additionalProperties": _NONNEG,
                           "propertyNames": {"enum": sorted(DEFAULT_TOLERANCES)}},
        },
        "additionalProperties": False,
    },
}

DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["kind", "payload"],
    "properties": {
        "kind": {"enum": list(KINDS)},
        "seed": {"type": "integer", "minimum": 0},
        "units": {"type": "object", "properties": {"k": _POS, "hbar": _POS},
                  "additionalProperties": False},
        "payload": {"type": "object"},
    },
    "additionalProperties": False,
}


def _check(schema, doc, prefix):
    errors = sorted(jsonschema.Draft7Validator(schema).iter_errors(doc),
                    key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "/".join([prefix] + [str(p) for p in err.absolute_path])
        raise ScenarioError(f"{where}: {err.message}")


@dataclass
class Scenario:
    kind: str
    payload: dict
    seed: int = 0
    units: dict = field(default_factory=dict)

    @property
    def k(self) -> float:
        return float(self.units.get("k", 1.0))

    @property
    def hbar(self) -> float:
        return float(self.units.get("hbar", 1.0))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed, "payload": copy.deepcopy(self.payload)}
        if self.units:
            out["units"] = dict(self.units)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse(doc) -> Scenario:
    """Validate a scenario document (dict or JSON text) against its kind's schema."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from exc
    _check(DOCUMENT_SCHEMA, doc, "$")
    _check(PAYLOAD_SCHEMAS[doc["kind"]], doc["payload"], "$/payload")
    _check_square(doc["payload"], "$/payload")
    return Scenario(doc["kind"], copy.deepcopy(doc["payload"]), int(doc.get("seed", 0)),
                    dict(doc.get("units", {})))


_MATRIX_KEYS = {"matrix", "basis", "hamiltonian", "H", "H_end", "ancilla_hamiltonian",
                "coupling", "hamiltonian_initial", "hamiltonian_final"}


def _check_square(node, path):
    if isinstance(node, dict):
        for key, val in node.items():
            sub = f"{path}/{key}"
            if key in _MATRIX_KEYS and isinstance(val, list):
                decode_matrix(val, sub)
            else:
                _check_square(val, sub)
    elif isinstance(node, list):
        for i, val in enumerate(node):
            _check_square(val, f"{path}/{i}")


def load(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key=value`` overrides; keys are dotted paths, relative to the payload
    unless they start with ``seed``, ``units`` or ``kind``. Values are parsed as
    JSON when possible."""
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = doc if parts[0] in ("seed", "units", "kind") else doc.setdefault("payload", {})
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
            else:
                node = node.setdefault(p, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = value
        else:
            node[last] = value
    return doc
