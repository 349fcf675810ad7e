"""Reading and writing sponge description documents (JSON syntax).

Numbers may be written as JSON numbers or as exact fraction strings such as
``"1/3"``.  Everything is parsed to :class:`fractions.Fraction`; decimal
literals are taken at face value (``0.1`` becomes ``1/10``).
"""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .model import BaranskiSpec, GLMap, GLSpec, SelfSimilarSpec, SpecError, SpongeSpec

KINDS = ("self-similar", "gatzouras-lalley", "baranski")


class SpecSyntaxError(SpecError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


def _number(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise SpecSyntaxError(f"expected a number at {where}, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise SpecSyntaxError(f"bad number {value!r} at {where}") from None
    raise SpecSyntaxError(f"expected a number at {where}, got {type(value).__name__}")


def _numbers(values, where: str) -> tuple:
    if not isinstance(values, list):
        raise SpecSyntaxError(f"expected a list at {where}")
    return tuple(_number(v, f"{where}[{k}]") for k, v in enumerate(values))


def _ints(values, where: str) -> tuple:
    if not isinstance(values, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
        raise SpecSyntaxError(f"expected a list of integers at {where}")
    return tuple(values)


def _require(doc: dict, key: str, kind: str):
    if key not in doc:
        raise SpecSyntaxError(f"{kind} document is missing '{key}'")
    return doc[key]


def parse_spec(text: str) -> SpongeSpec:
    """Parse a description document into a spec (syntax and range checks only)."""
    try:
        doc = json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise SpecSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise SpecSyntaxError("top level must be an object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SpecSyntaxError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    if kind == "self-similar":
        ratios = _numbers(_require(doc, "ratios", kind), "ratios")
        if "dimension" in doc and not isinstance(doc["dimension"], int):
            raise SpecSyntaxError("dimension must be an integer")
        return SelfSimilarSpec(ratios)

    d = _require(doc, "dimension", kind)
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise SpecSyntaxError(f"dimension must be a positive integer, got {d!r}")

    if kind == "gatzouras-lalley":
        raw_maps = _require(doc, "maps", kind)
        if not isinstance(raw_maps, list):
            raise SpecSyntaxError("maps must be a list")
        maps = []
        for k, m in enumerate(raw_maps):
            if not isinstance(m, dict):
                raise SpecSyntaxError(f"maps[{k}] must be an object")
            for key in ("index", "ratios", "translations"):
                if key not in m:
                    raise SpecSyntaxError(f"maps[{k}] is missing '{key}'")
            maps.append(GLMap(
                _ints(m["index"], f"maps[{k}].index"),
                _numbers(m["ratios"], f"maps[{k}].ratios"),
                _numbers(m["translations"], f"maps[{k}].translations"),
            ))
        return GLSpec(d, tuple(maps))

    raw_axes = _require(doc, "axes", kind)
    if not isinstance(raw_axes, list):
        raise SpecSyntaxError("axes must be a list")
    axes = []
    for k, a in enumerate(raw_axes):
        if not isinstance(a, dict) or "ratios" not in a:
            raise SpecSyntaxError(f"axes[{k}] must be an object with 'ratios'")
        if "translations" in a:
            raise SpecSyntaxError(
                f"axes[{k}] gives translations; Baranski translations are forced by the ratios"
            )
        axes.append(_numbers(a["ratios"], f"axes[{k}].ratios"))
    raw_alpha = _require(doc, "alphabet", kind)
    if not isinstance(raw_alpha, list):
        raise SpecSyntaxError("alphabet must be a list")
    alphabet = tuple(_ints(t, f"alphabet[{k}]") for k, t in enumerate(raw_alpha))
    return BaranskiSpec(d, tuple(axes), alphabet)


def load_spec(path) -> SpongeSpec:
    return parse_spec(Path(path).read_text(encoding="utf-8"))


def _emit_number(x):
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return float(x)


def spec_to_dict(spec: SpongeSpec) -> dict:
    if isinstance(spec, SelfSimilarSpec):
        return {"kind": spec.kind, "dimension": 1, "ratios": [_emit_number(r) for r in spec.ratios]}
    if isinstance(spec, GLSpec):
        return {
            "kind": spec.kind,
            "dimension": spec.dimension,
            "maps": [
                {
                    "index": list(m.index),
                    "ratios": [_emit_number(r) for r in m.ratios],
                    "translations": [_emit_number(t) for t in m.translations],
                }
                for m in spec.maps
            ],
        }
    if isinstance(spec, BaranskiSpec):
        return {
            "kind": spec.kind,
            "dimension": spec.dimension,
            "axes": [{"ratios": [_emit_number(r) for r in axis]} for axis in spec.axes],
            "alphabet": [list(t) for t in spec.alphabet],
        }
    raise TypeError(f"not a sponge spec: {type(spec).__name__}")


def emit_spec(spec: SpongeSpec) -> str:
    """Serialize a spec; ``parse_spec(emit_spec(s)) == s`` for Fraction-valued specs."""
    return json.dumps(spec_to_dict(spec), indent=2)
