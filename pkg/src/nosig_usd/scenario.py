"""Scenario files: schema, parsing and construction of the quantum inputs.

Scenario files are JSON documents with ``"schema_version": 1``. Unknown
fields are rejected. Matrices are written row-major as nested arrays of
``[re, im]`` pairs, e.g. ``[[[1, 0], [0, 0]], [[0, 0], [0, 0]]]`` for
``|0><0|``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import jsonschema
import numpy as np

from .qcore import (DensityOperator, InvalidArgumentError, NoiseSpec, Povm, apply_noise, bell_state,
                    computational_povm, hadamard_povm, ideal_alice_povms, misaligned_alice_povms,
                    schmidt_state)

SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {
    "eq5": 1e-10,
    "nosignaling": 1e-10,
    "slack": 1e-10,
    "zero_tol": 1e-6,
    "half": 1e-9,
    "half_stderr": 3.0,
}

_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "array",
        "minItems": 1,
        "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
    },
}

_NOISE = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["kind", "strength"],
         "properties": {"kind": {"enum": ["depolarizing", "dephasing"]},
                        "strength": {"type": "number", "minimum": 0, "maximum": 1}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "angle"],
         "properties": {"kind": {"const": "unitary_misalignment"},
                        "angle": {"type": "number"},
                        "side": {"enum": [0, 1]}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "matrix"],
         "properties": {"kind": {"const": "explicit"}, "matrix": _MATRIX}},
    ]
}

SCENARIO_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "nosig-usd scenario",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "name", "state", "alice_povms", "eve"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "dim": {"type": "integer", "minimum": 2, "maximum": 4},
        "state": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "ideal_bell"}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "noise"],
                 "properties": {"kind": {"const": "noise"}, "noise": _NOISE}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "angle"],
                 "properties": {"kind": {"const": "schmidt"}, "angle": {"type": "number"},
                                "noise": _NOISE}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "matrix"],
                 "properties": {"kind": {"const": "explicit"}, "matrix": _MATRIX}},
            ]
        },
        "alice_povms": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind"],
                 "properties": {"kind": {"const": "ideal"}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "angles"],
                 "properties": {"kind": {"const": "misaligned"},
                                "angles": {"type": "array", "minItems": 2, "maxItems": 2,
                                           "items": {"type": "number"}}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "povms"],
                 "properties": {"kind": {"const": "explicit"},
                                "povms": {"type": "array", "minItems": 2, "maxItems": 2,
                                          "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                                    "items": _MATRIX}}}},
            ]
        },
        "eve": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["kind", "elements"],
                 "properties": {"kind": {"const": "povm"},
                                "elements": {"type": "array", "minItems": 1, "maxItems": 16,
                                             "items": _MATRIX}}},
                {"type": "object", "additionalProperties": False, "required": ["kind", "name"],
                 "properties": {"kind": {"const": "standard"},
                                "name": {"enum": ["computational", "hadamard", "trivial"]}}},
                {"type": "object", "additionalProperties": False,
                 "required": ["kind", "outcomes", "budget", "seed"],
                 "properties": {"kind": {"const": "search"},
                                "outcomes": {"type": "integer", "minimum": 2, "maximum": 16},
                                "budget": {"type": "integer", "minimum": 1},
                                "seed": {"type": "integer", "minimum": 0},
                                "restarts": {"type": "integer", "minimum": 1}}},
            ]
        },
        "sampling": {
            "type": "object", "additionalProperties": False, "required": ["n", "seed"],
            "properties": {"n": {"type": "integer", "minimum": 2},
                           "seed": {"type": "integer", "minimum": 0}},
        },
        "tolerances": {
            "type": "object", "additionalProperties": False,
            "properties": {key: {"type": "number", "exclusiveMinimum": 0}
                           for key in DEFAULT_TOLERANCES},
        },
    },
}


class ScenarioError(InvalidArgumentError):
    """Scenario file could not be read, parsed or validated."""


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario together with its canonical JSON form."""

    raw: Dict[str, Any]
    source: str = "<memory>"

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def dim(self) -> int:
        return int(self.raw.get("dim", 2))

    @property
    def dims(self) -> Tuple[int, int]:
        return self.dim, self.dim

    @property
    def eve_spec(self) -> Dict[str, Any]:
        return self.raw["eve"]

    @property
    def sampling(self) -> Optional[Dict[str, int]]:
        return self.raw.get("sampling")

    @property
    def tolerances(self) -> Dict[str, float]:
        return {**DEFAULT_TOLERANCES, **self.raw.get("tolerances", {})}

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def joint_state(self) -> DensityOperator:
        spec = self.raw["state"]
        d = self.dim
        kind = spec["kind"]
        if kind == "ideal_bell":
            return bell_state(d)
        if kind == "explicit":
            return _density(spec["matrix"], d * d, "state.matrix")
        if kind == "schmidt":
            if d != 2:
                raise ScenarioError("state.kind=schmidt is defined for dim 2 only")
            base = schmidt_state(spec["angle"])
        else:
            base = bell_state(d)
        if "noise" not in spec:
            return base
        return apply_noise(base, _noise(spec["noise"], d * d), self.dims)

    def alice_povms(self) -> Tuple[Povm, Povm]:
        spec = self.raw["alice_povms"]
        if spec["kind"] == "explicit":
            return tuple(_povm(p, self.dim, f"alice_povms.povms[{i}]")
                         for i, p in enumerate(spec["povms"]))
        if self.dim != 2:
            raise ScenarioError(f"alice_povms.kind={spec['kind']} needs dim 2; use explicit POVMs")
        if spec["kind"] == "ideal":
            return ideal_alice_povms()
        return misaligned_alice_povms(*spec["angles"])

    def eve_povm(self) -> Optional[Povm]:
        """Fixed Eve measurement, or None when Eve's POVM is to be searched."""
        spec = self.eve_spec
        if spec["kind"] == "povm":
            return _povm(spec["elements"], self.dim, "eve.elements")
        if spec["kind"] == "standard":
            if spec["name"] == "trivial":
                return Povm((np.eye(self.dim),))
            if self.dim != 2:
                raise ScenarioError(f"eve standard POVM {spec['name']!r} needs dim 2")
            return computational_povm() if spec["name"] == "computational" else hadamard_povm()
        return None


def decode_matrix(rows) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)


def encode_matrix(m: np.ndarray) -> List[List[List[float]]]:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _matrix(rows, dim: int, where: str) -> np.ndarray:
    if any(len(row) != len(rows) for row in rows):
        raise ScenarioError(f"{where}: matrix is not square")
    m = decode_matrix(rows)
    if m.shape != (dim, dim):
        raise ScenarioError(f"{where}: expected a {dim}x{dim} matrix, got {m.shape[0]}x{m.shape[1]}")
    return m


def _density(rows, dim: int, where: str) -> DensityOperator:
    try:
        return DensityOperator(_matrix(rows, dim, where))
    except ScenarioError:
        raise
    except InvalidArgumentError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def _povm(elements, dim: int, where: str) -> Povm:
    try:
        return Povm(tuple(_matrix(e, dim, f"{where}[{k}]") for k, e in enumerate(elements)))
    except ScenarioError:
        raise
    except InvalidArgumentError as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def _noise(spec: Dict[str, Any], joint_dim: int) -> NoiseSpec:
    kind = spec["kind"]
    if kind == "explicit":
        return NoiseSpec.explicit(_density(spec["matrix"], joint_dim, "state.noise.matrix"))
    if kind == "unitary_misalignment":
        return NoiseSpec.misalignment(spec["angle"], spec.get("side", 0))
    return NoiseSpec(kind, strength=spec["strength"])


def _error_path(err: jsonschema.ValidationError) -> str:
    return "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)


def _diagnose(err: jsonschema.ValidationError) -> Tuple[str, str]:
    """Location and message, resolving ``oneOf`` failures through the ``kind`` tag."""
    if err.validator != "oneOf" or not err.context:
        return _error_path(err), err.message
    branches: Dict[Any, list] = {}
    for sub in err.context:
        branches.setdefault(sub.relative_schema_path[0], []).append(sub)
    matched = [subs for subs in branches.values()
               if not any(list(s.relative_path)[:1] == ["kind"] for s in subs)]
    if len(matched) == 1:
        return _diagnose(jsonschema.exceptions.best_match(matched[0]))
    kinds = []
    for branch in err.schema["oneOf"]:
        tag = branch["properties"]["kind"]
        kinds.extend(tag.get("enum", [tag.get("const")]))
    where = _error_path(err)
    if not isinstance(err.instance, dict):
        return where, f"expected an object with 'kind' one of {kinds}"
    got = err.instance.get("kind")
    if got is None:
        return where, f"missing 'kind'; expected one of {kinds}"
    return where + ".kind", f"unknown kind {got!r}; expected one of {kinds}"


def validate(raw: Any, source: str = "<memory>") -> ScenarioConfig:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        where, message = _diagnose(errors[0])
        raise ScenarioError(f"{source}: {where}: {message}")
    config = ScenarioConfig(raw, source)
    # Build everything once so semantic problems surface as input errors.
    try:
        config.joint_state()
        config.alice_povms()
        config.eve_povm()
    except InvalidArgumentError as exc:
        raise ScenarioError(f"{source}: $.{exc}") from exc
    return config


def loads(text: str, source: str = "<memory>") -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return validate(raw, source)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror or exc}") from exc
    return loads(text, str(path))


def bundled_scenarios() -> Dict[str, Path]:
    """Scenario files shipped with the package, keyed by file stem."""
    root = Path(__file__).with_name("scenarios")
    return {p.stem: p for p in sorted(root.glob("*.scenario"))}
