"""JSON channel documents.

Schema (all keys lower case)::

    {"kind": "dmc" | "cq" | "cq_mac" | "qubit_kraus" | "broadcast",
     "label": "optional text",
     "labels": ["optional", "input", "labels"],
     ...kind specific payload...}

Payloads:

* ``dmc``: ``"transition"``, a row-stochastic real matrix; or the shorthand
  ``"family": "bsc"`` with ``"p"``, ``"family": "bec"`` with ``"epsilon"``.
* ``cq``: ``"matrices"``, one density matrix per input; or ``"kets"``, one
  state vector per input (rank-one outputs); or ``"family": "overlap"``
  with ``"overlap"``, ``"family": "amplitude_damped"`` with ``"gamma"``.
* ``cq_mac``: ``"matrices"`` nested by input index, ``[x1][x2] -> matrix``;
  or ``"family": "adder"``, or ``"family": "product"`` with ``"members"``,
  two binary-input channel documents.
* ``qubit_kraus``: ``"matrices"``, the Kraus operators; or ``"family"`` one
  of ``identity``, ``dephasing``, ``depolarizing``, ``bit_flip`` (with
  ``"p"``) or ``amplitude_damping`` (with ``"gamma"``).
* ``broadcast``: ``"matrices"`` plus ``"dims": [d1, d2]``.

Complex entries are ``[re, im]`` pairs everywhere, so a 2x2 matrix is a
``2 x 2 x 2`` nested list.  :func:`dump_channel_spec` writes the canonical
form (full matrices, sorted keys), and ``load -> dump -> load`` is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import channels
from .errors import InvariantViolation, ParseError

KINDS = ("dmc", "cq", "cq_mac", "qubit_kraus", "broadcast")


def _complex_array(nested, what):
    try:
        arr = np.asarray(nested, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what}: not a numeric array ({exc})") from exc
    if arr.ndim == 0 or arr.shape[-1] != 2:
        raise ParseError(f"{what}: complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _encode_complex(arr):
    arr = np.asarray(arr, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def _require(doc, key, kind):
    if key not in doc:
        raise ParseError(f"kind '{kind}' requires key '{key}'")
    return doc[key]


def parse_channel_doc(doc):
    """Build a validated channel object from an already decoded document."""
    if not isinstance(doc, dict):
        raise ParseError("channel document must be an object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ParseError(f"unknown channel kind {kind!r}; expected one of {KINDS}")
    label = str(doc.get("label", ""))

    if kind == "dmc":
        family = doc.get("family")
        if family == "bsc":
            return channels.bsc(float(_require(doc, "p", kind)))
        if family == "bec":
            return channels.bec(float(_require(doc, "epsilon", kind)))
        if family is not None:
            raise ParseError(f"unknown dmc family {family!r}")
        try:
            w = np.asarray(_require(doc, "transition", kind), dtype=float)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"transition: {exc}") from exc
        return channels.ClassicalDMC(w, label)

    family = doc.get("family")
    if kind == "cq" and family is not None:
        if family == "overlap":
            return channels.overlap_cq(float(_require(doc, "overlap", kind)))
        if family == "amplitude_damped":
            return channels.amplitude_damped_cq(float(_require(doc, "gamma", kind)))
        raise ParseError(f"unknown cq family {family!r}")
    if kind == "cq_mac" and family is not None:
        if family == "adder":
            return channels.adder_mac()
        if family == "product":
            members = _require(doc, "members", kind)
            if not isinstance(members, list) or len(members) != 2:
                raise ParseError("a product MAC needs two member documents")
            return channels.product_mac(*(parse_channel_doc(m) for m in members))
        raise ParseError(f"unknown cq_mac family {family!r}")
    if kind == "qubit_kraus" and family is not None:
        if family == "identity":
            return channels.identity_channel()
        if family == "amplitude_damping":
            return channels.amplitude_damping(float(_require(doc, "gamma", kind)))
        named = {"dephasing": channels.dephasing, "depolarizing": channels.depolarizing, "bit_flip": channels.bit_flip}
        if family not in named:
            raise ParseError(f"unknown qubit_kraus family {family!r}")
        return named[family](float(_require(doc, "p", kind)))

    if kind == "cq":
        if "kets" in doc:
            kets = [_complex_array(k, f"kets[{n}]") for n, k in enumerate(doc["kets"])]
            for n, k in enumerate(kets):
                norm = np.linalg.norm(k)
                if abs(norm - 1.0) > 1e-10:
                    raise InvariantViolation(f"kets[{n}] has norm {norm!r}", index=n, bound="unit norm")
            return channels.pure_state_cq(kets, label)
        mats = _complex_array(_require(doc, "matrices", kind), "matrices")
        return channels.CqChannel(mats, label)

    if kind == "cq_mac":
        mats = _complex_array(_require(doc, "matrices", kind), "matrices")
        return channels.CqMac(mats, label)

    if kind == "qubit_kraus":
        mats = _complex_array(_require(doc, "matrices", kind), "matrices")
        return channels.QubitChannel(tuple(mats), label)

    mats = _complex_array(_require(doc, "matrices", kind), "matrices")
    dims = _require(doc, "dims", kind)
    return channels.BroadcastChannel(mats, tuple(dims), label)


def load_channel_spec(source):
    """Load a channel from a JSON string, a path, or a decoded dict."""
    if isinstance(source, dict):
        return parse_channel_doc(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ParseError(f"{path}: {exc}") from exc
        where = str(path)
    else:
        text, where = source, "<string>"
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_channel_doc(doc)


def channel_to_doc(obj):
    """Canonical document for a channel object."""
    if isinstance(obj, channels.ClassicalDMC):
        return {"kind": "dmc", "label": obj.label, "transition": obj.transition.tolist()}
    if isinstance(obj, channels.CqChannel):
        return {"kind": "cq", "label": obj.label, "matrices": _encode_complex(obj.outputs)}
    if isinstance(obj, channels.CqMac):
        return {"kind": "cq_mac", "label": obj.label, "matrices": _encode_complex(obj.outputs)}
    if isinstance(obj, channels.QubitChannel):
        return {"kind": "qubit_kraus", "label": obj.label, "matrices": _encode_complex(np.array(obj.kraus))}
    if isinstance(obj, channels.BroadcastChannel):
        return {
            "kind": "broadcast",
            "label": obj.label,
            "dims": list(obj.dims),
            "matrices": _encode_complex(obj.outputs),
        }
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_channel_spec(obj):
    return json.dumps(channel_to_doc(obj), sort_keys=True, indent=1)
