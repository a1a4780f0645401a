"""Instance file parsing and serialization.

Instances are JSON documents with an explicit dimension, a charge list, a
domain (box or half-space rows), and solver tolerances.  Numbers are
accepted as decimals or as integer fractions {"num": 1, "den": 3}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .errors import EmptyPolytope, ParseError, UnboundedDomain
from .grid import Box, Polytope
from .potential import Charge, ChargeSystem


def parse_number(v) -> float:
    if isinstance(v, bool):
        raise ParseError(f"expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, dict) and set(v) == {"num", "den"}:
        if not all(isinstance(v[k], int) for k in ("num", "den")) or v["den"] == 0:
            raise ParseError(f"bad fraction {v!r}")
        return float(Fraction(v["num"], v["den"]))
    raise ParseError(f"expected a number or {{num, den}} fraction, got {v!r}")


def _vector(v, d: int, what: str) -> tuple[float, ...]:
    if not isinstance(v, list) or len(v) != d:
        raise ParseError(f"{what} must be a list of {d} numbers")
    return tuple(parse_number(x) for x in v)


@dataclass(frozen=True)
class Instance:
    system: ChargeSystem
    domain: Polytope
    epsilon: float
    delta: float | None
    domain_box: Box | None  # set when the domain was given as a box

    @property
    def d(self) -> int:
        return self.system.d


def parse_instance(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object")
    try:
        d = doc["dimension"]
    except KeyError:
        raise ParseError("missing 'dimension'") from None
    if not isinstance(d, int) or not (1 <= d <= 4):
        raise ParseError("'dimension' must be an integer in 1..4")
    raw_charges = doc.get("charges")
    if not isinstance(raw_charges, list) or not raw_charges:
        raise ParseError("'charges' must be a nonempty list")
    charges = []
    for i, rc in enumerate(raw_charges):
        if not isinstance(rc, dict) or "q" not in rc or "position" not in rc:
            raise ParseError(f"charge {i} must have 'q' and 'position'")
        q = parse_number(rc["q"])
        if q == 0:
            raise ParseError(f"charge {i} has zero strength")
        charges.append(Charge(q=q, position=_vector(rc["position"], d, f"charge {i} position")))
    try:
        system = ChargeSystem(charges, d)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    raw_domain = doc.get("domain")
    if not isinstance(raw_domain, dict):
        raise ParseError("'domain' must be an object")
    domain_box = None
    if "box" in raw_domain:
        bx = raw_domain["box"]
        if not isinstance(bx, dict) or "lo" not in bx or "hi" not in bx:
            raise ParseError("box domain needs 'lo' and 'hi'")
        lo = _vector(bx["lo"], d, "box lo")
        hi = _vector(bx["hi"], d, "box hi")
        if any(l >= h for l, h in zip(lo, hi)):
            raise ParseError("box domain must have lo < hi on every axis")
        domain_box = Box(lo, hi)
        domain = Polytope.from_box(domain_box)
    elif "polytope" in raw_domain:
        rows = raw_domain["polytope"]
        if not isinstance(rows, list) or not rows:
            raise ParseError("polytope domain must be a nonempty row list")
        normals, offsets = [], []
        for i, row in enumerate(rows):
            if not isinstance(row, dict) or "normal" not in row or "offset" not in row:
                raise ParseError(f"polytope row {i} needs 'normal' and 'offset'")
            normals.append(_vector(row["normal"], d, f"row {i} normal"))
            offsets.append(parse_number(row["offset"]))
        domain = Polytope(normals, offsets)
        try:
            domain.bounding_box()
        except UnboundedDomain:
            raise ParseError("polytope domain is unbounded") from None
        except EmptyPolytope:
            raise ParseError("polytope domain is empty") from None
    else:
        raise ParseError("domain must contain 'box' or 'polytope'")
    if "epsilon" not in doc:
        raise ParseError("missing 'epsilon'")
    epsilon = parse_number(doc["epsilon"])
    if epsilon <= 0:
        raise ParseError("'epsilon' must be positive")
    delta = None
    if doc.get("delta") is not None:
        delta = parse_number(doc["delta"])
        if delta <= 0:
            raise ParseError("'delta' must be positive")
    return Instance(
        system=system, domain=domain, epsilon=epsilon, delta=delta, domain_box=domain_box
    )


def load_instance(path) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read instance file: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return parse_instance(doc)


def serialize_instance(inst: Instance) -> dict:
    doc: dict = {
        "dimension": inst.d,
        "charges": [
            {"q": c.q, "position": list(c.position)} for c in inst.system.charges
        ],
        "epsilon": inst.epsilon,
    }
    if inst.domain_box is not None:
        doc["domain"] = {"box": {"lo": list(inst.domain_box.lo), "hi": list(inst.domain_box.hi)}}
    else:
        doc["domain"] = {
            "polytope": [
                {"normal": [float(v) for v in row], "offset": float(off)}
                for row, off in zip(inst.domain.A, inst.domain.b)
            ]
        }
    if inst.delta is not None:
        doc["delta"] = inst.delta
    return doc
