"""JSON file formats of the command line tools.

State files::

    {"kind": "density" | "observable" | "pure", "dims": [2, 2], "data": ...}

Channel files::

    {"kind": "channel", "dimIn": 2, "dimOut": 2, "kraus": [matrix, ...]}

Matrices are row-major nested lists and complex entries are ``[re, im]``
pairs. Quadratic costs are a list of observable objects, or
``{"kind": "quadraticCost", "dim": d, "observables": [...]}`` when the list
may be empty. Distributions and metrics are plain lists or
``{"kind": "distribution", "probs": [...]}`` / ``{"kind": "metric", "matrix": [[...]]}``.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np
from django.core.serializers.json import DjangoJSONEncoder

from .channels import KrausChannel
from .classical import CostMatrix, Distribution
from .exceptions import InputFormatError, QotkitError
from .linalg import FactorShape
from .quadratic import QuadraticCost, cost_operator
from .states import DensityOperator, Observable, PureState


logger = logging.getLogger(__name__)

STATE_KINDS = ("density", "observable", "pure")


class QotkitJSONEncoder(DjangoJSONEncoder):
    """``DjangoJSONEncoder`` that also knows numpy scalars and complex numbers."""

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, (complex, np.complexfloating)):
            return [float(o.real), float(o.imag)]
        if isinstance(o, np.ndarray):
            if np.iscomplexobj(o):
                return encode_complex_array(o)
            return o.tolist()
        return super().default(o)


def encode_complex_array(A) -> list:
    """Nested lists with ``[re, im]`` leaves."""
    A = np.asarray(A, dtype=np.complex128)
    return np.stack([A.real, A.imag], axis=-1).tolist()


def decode_complex_array(data, ndim: int, what: str = "data") -> np.ndarray:
    """Inverse of :func:`encode_complex_array` for an array of ``ndim`` dimensions.

    Raises
    ------
    InputFormatError
        If ``data`` is not a rectangular array of ``[re, im]`` pairs.
    """
    try:
        arr = np.asarray(data, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"{what} is not an array of [re, im] pairs") from exc
    if arr.ndim != ndim + 1 or arr.shape[-1] != 2:
        raise InputFormatError(f"{what} must be a {ndim}-dimensional array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, cls=QotkitJSONEncoder, sort_keys=True, separators=(",", ":"))


def digest(obj: Any) -> str:
    """SHA-256 of the canonical JSON of ``obj``."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def load_json(path: Union[str, Path]) -> Any:
    """Parse a JSON file, turning I/O and syntax errors into :class:`InputFormatError`."""
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputFormatError(f"Cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc


def write_json(path: Union[str, Path], obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, cls=QotkitJSONEncoder, sort_keys=True, indent=2)
        fh.write("\n")


def _require(mapping, key: str, what: str):
    if not isinstance(mapping, dict):
        raise InputFormatError(f"{what} must be a JSON object")
    if key not in mapping:
        raise InputFormatError(f"{what} is missing the {key!r} field")
    return mapping[key]


def _positive_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise InputFormatError(f"{what} must be a positive integer, got {value!r}")
    return value


@dataclass(frozen=True, eq=False)
class StateFile:
    """A density operator, observable or pure state as stored on disk."""

    kind: str
    dims: tuple
    data: np.ndarray

    @classmethod
    def from_dict(cls, raw: dict) -> "StateFile":
        kind = _require(raw, "kind", "State file")
        if kind not in STATE_KINDS:
            raise InputFormatError(f"State kind must be one of {STATE_KINDS}, got {kind!r}")
        dims = _require(raw, "dims", "State file")
        if not isinstance(dims, list) or not dims:
            raise InputFormatError("dims must be a non-empty list")
        dims = tuple(_positive_int(f, "A factor dimension") for f in dims)
        data = decode_complex_array(_require(raw, "data", "State file"), 1 if kind == "pure" else 2)
        total = int(np.prod(dims))
        if data.shape[0] != total or (kind != "pure" and data.shape != (total, total)):
            raise InputFormatError(f"data of shape {data.shape} does not match dims {list(dims)}")
        return cls(kind, dims, data)

    @classmethod
    def load(cls, path) -> "StateFile":
        return cls.from_dict(load_json(path))

    @classmethod
    def from_object(cls, obj: Union[Observable, PureState]) -> "StateFile":
        if isinstance(obj, PureState):
            return cls("pure", obj.shape.dims, obj.vec)
        if isinstance(obj, DensityOperator):
            return cls("density", obj.shape.dims, obj.mat)
        if isinstance(obj, Observable):
            return cls("observable", obj.shape.dims, obj.mat)
        raise TypeError(f"Expected Observable or PureState, got {type(obj)}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dims": list(self.dims), "data": encode_complex_array(self.data)}

    def dump(self, path) -> None:
        write_json(path, self.to_dict())

    def to_object(self) -> Union[Observable, PureState]:
        """Validated quantum-core object; validation failures propagate as :class:`QotkitError`."""
        shape = FactorShape(self.dims)
        if self.kind == "pure":
            return PureState(self.data, shape)
        if self.kind == "density":
            return DensityOperator(self.data, shape)
        return Observable(self.data, shape)


def load_state(path) -> DensityOperator:
    """Density operator from a ``density`` or ``pure`` state file."""
    obj = StateFile.load(path).to_object()
    if isinstance(obj, PureState):
        return obj.density()
    if not isinstance(obj, DensityOperator):
        raise InputFormatError(f"{path} holds an observable, expected a state")
    return obj


def load_observable(path) -> Observable:
    state_file = StateFile.load(path)
    if state_file.kind == "pure":
        raise InputFormatError(f"{path} holds a pure state, expected an observable")
    return Observable(state_file.data, FactorShape(state_file.dims))


@dataclass(frozen=True, eq=False)
class ChannelFile:
    dim_in: int
    dim_out: int
    kraus: tuple

    @classmethod
    def from_dict(cls, raw: dict) -> "ChannelFile":
        kind = _require(raw, "kind", "Channel file")
        if kind != "channel":
            raise InputFormatError(f"Channel file kind must be 'channel', got {kind!r}")
        dim_in = _positive_int(_require(raw, "dimIn", "Channel file"), "dimIn")
        dim_out = _positive_int(_require(raw, "dimOut", "Channel file"), "dimOut")
        kraus = _require(raw, "kraus", "Channel file")
        if not isinstance(kraus, list) or not kraus:
            raise InputFormatError("kraus must be a non-empty list of matrices")
        ops = tuple(decode_complex_array(K, 2, f"Kraus operator {i}") for i, K in enumerate(kraus))
        for i, K in enumerate(ops):
            if K.shape != (dim_out, dim_in):
                raise InputFormatError(f"Kraus operator {i} has shape {K.shape}, expected {(dim_out, dim_in)}")
        return cls(dim_in, dim_out, ops)

    @classmethod
    def load(cls, path) -> "ChannelFile":
        return cls.from_dict(load_json(path))

    @classmethod
    def from_channel(cls, channel: KrausChannel) -> "ChannelFile":
        return cls(channel.dim_in, channel.dim_out, tuple(channel.kraus))

    def to_dict(self) -> dict:
        return {
            "kind": "channel",
            "dimIn": self.dim_in,
            "dimOut": self.dim_out,
            "kraus": [encode_complex_array(K) for K in self.kraus],
        }

    def dump(self, path) -> None:
        write_json(path, self.to_dict())

    def to_channel(self) -> KrausChannel:
        return KrausChannel(self.kraus)


def load_channel(path) -> KrausChannel:
    return ChannelFile.load(path).to_channel()


def load_quadratic_cost(path) -> QuadraticCost:
    raw = load_json(path)
    dim = None
    if isinstance(raw, dict):
        if raw.get("kind") != "quadraticCost":
            raise InputFormatError("Cost file object must have kind 'quadraticCost'")
        if "dim" in raw:
            dim = _positive_int(raw["dim"], "dim")
        raw = _require(raw, "observables", "Cost file")
    if not isinstance(raw, list):
        raise InputFormatError("Cost file must hold a list of observables")
    observables = []
    for entry in raw:
        state_file = StateFile.from_dict(entry)
        if state_file.kind != "observable":
            raise InputFormatError(f"Cost entries must be observables, got {state_file.kind!r}")
        observables.append(state_file.to_object())
    if not observables and dim is None:
        raise InputFormatError("An empty cost needs the 'dim' field")
    return cost_operator(observables, dim)


def load_distribution(path) -> Distribution:
    raw = load_json(path)
    if isinstance(raw, dict):
        if raw.get("kind") != "distribution":
            raise InputFormatError("Distribution file object must have kind 'distribution'")
        raw = _require(raw, "probs", "Distribution file")
    try:
        probs = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"{path} does not hold a list of probabilities") from exc
    if probs.ndim != 1:
        raise InputFormatError(f"{path} does not hold a list of probabilities")
    return Distribution(probs)


def load_metric(path) -> CostMatrix:
    raw = load_json(path)
    if isinstance(raw, dict):
        if raw.get("kind") != "metric":
            raise InputFormatError("Metric file object must have kind 'metric'")
        raw = _require(raw, "matrix", "Metric file")
    try:
        values = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputFormatError(f"{path} does not hold a real matrix") from exc
    if values.ndim != 2:
        raise InputFormatError(f"{path} does not hold a real matrix")
    return CostMatrix(values)


def build_report(command: str, inputs: dict, value, status, **extra) -> dict:
    """Report object with the digest of ``inputs`` and non-finite values replaced by null.

    ``extra`` may carry ``witness``, ``decomposition``, ``seed``, ``suite`` and
    command specific fields; ``None`` entries are dropped.
    """
    report = {
        "command": command,
        "inputsDigest": digest(inputs),
        "value": finite_or_none(value),
        "status": str(getattr(status, "value", status)),
    }
    report.update({key: val for key, val in extra.items() if val is not None})
    return report


def state_inputs(*objects) -> list:
    """Canonical description of quantum-core inputs for :func:`digest`."""
    described = []
    for obj in objects:
        if isinstance(obj, (Observable, PureState)):
            described.append(StateFile.from_object(obj).to_dict())
        elif isinstance(obj, KrausChannel):
            described.append(ChannelFile.from_channel(obj).to_dict())
        elif isinstance(obj, QuadraticCost):
            described.append([StateFile.from_object(R).to_dict() for R in obj.observables] or obj.dim)
        elif isinstance(obj, Distribution):
            described.append(obj.probs)
        elif isinstance(obj, CostMatrix):
            described.append(obj.values)
        else:
            raise QotkitError(f"Cannot describe input of type {type(obj)}")
    return described
