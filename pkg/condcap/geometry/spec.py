"""
geometry/spec.py

This file defines the CondenserSpec document model and parse_spec, which validates a
raw spec document (JSON text or mapping) into an immutable CondenserSpec.
"""

import logging
from typing import Any, Mapping, Optional, Tuple, Union

from pydantic import (
    AliasChoices,
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_core import PydanticCustomError

from ..common.errors import ErrorCode, GeometryError
from ..common.types import ContourKind, Family, SpecDocument, Terminal

logger = logging.getLogger("condcap.geometry")

Point = Tuple[float, float]

# (|x|, |y|, allowed |l|) per family
FAMILY_ARITY = {
    Family.A: (8, 0, (1, 2)),
    Family.B: (8, 2, (1, 2)),
    Family.C: (8, 1, (3,)),
    Family.D: (6, 0, (5,)),
    Family.E: (2, 2, (0,)),
}


class ContourModel(BaseModel):
    """Explicit contour entry of a spec document."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ContourKind
    terminal: Terminal
    vertices: Tuple[Point, ...] = ()
    center: Optional[Point] = None
    radius: Optional[float] = None

    @model_validator(mode="after")
    def _check_shape(self) -> "ContourModel":
        if self.kind is ContourKind.CIRCLE:
            if self.center is None or self.radius is None:
                raise PydanticCustomError("BAD_ARITY", "circle contours need center and radius")
            if self.radius <= 0:
                raise PydanticCustomError("NONPOSITIVE_LENGTH", "circle radius must be positive")
        elif self.kind is ContourKind.SLOT:
            if len(self.vertices) != 2:
                raise PydanticCustomError("BAD_ARITY", "slot contours need exactly two vertices")
        elif self.kind is ContourKind.SLIT_TREE:
            if len(self.vertices) < 2 or len(self.vertices) % 2:
                raise PydanticCustomError(
                    "BAD_ARITY", "slit trees are given as a flat list of segment endpoint pairs"
                )
        elif len(self.vertices) < 3:
            raise PydanticCustomError("BAD_ARITY", "closed polylines need at least three vertices")
        return self


class CondenserSpec(BaseModel):
    """
    Encoded condenser geometry.

    ``x`` holds significant abscissae on the symmetry axis, ``y`` vertical slot
    half-heights, ``l`` chain lengths, and ``l1``/``l2`` the outer and inner quarter
    chains of families F and G. ``x`` is translated so that it starts at zero.
    """

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    family: Family
    x: Tuple[float, ...] = Field(default=(), validation_alias=AliasChoices("x", "X"))
    y: Tuple[float, ...] = Field(default=(), validation_alias=AliasChoices("y", "Y"))
    l: Tuple[float, ...] = Field(default=(), validation_alias=AliasChoices("l", "L"))
    l1: Tuple[float, ...] = Field(default=(), validation_alias=AliasChoices("l1", "L1"))
    l2: Tuple[float, ...] = Field(default=(), validation_alias=AliasChoices("l2", "L2"))
    contours: Optional[Tuple[ContourModel, ...]] = None

    @field_validator("family", mode="before")
    @classmethod
    def _upper_family(cls, value: Any) -> Any:
        return value.upper() if isinstance(value, str) else value

    @field_validator("x")
    @classmethod
    def _monotone_x(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise PydanticCustomError("NON_MONOTONE_X", "x must be strictly increasing")
        if value and value[0] != 0:
            value = tuple(v - value[0] for v in value)
        return value

    @model_validator(mode="after")
    def _check_family(self) -> "CondenserSpec":
        for name in ("y", "l", "l1", "l2"):
            if any(v <= 0 for v in getattr(self, name)):
                raise PydanticCustomError(
                    "NONPOSITIVE_LENGTH", "entries of {name} must be strictly positive", {"name": name}
                )
        if self.family is Family.EXPLICIT:
            if not self.contours:
                raise PydanticCustomError("BAD_ARITY", "explicit specs need a contour list")
            return self
        if self.contours:
            raise PydanticCustomError("BAD_ARITY", "contours are only accepted with family EXPLICIT")
        if self.family in (Family.F, Family.G):
            if self.x or self.y or self.l or not self.l1 or not self.l2:
                raise PydanticCustomError("BAD_ARITY", "families F and G take l1 and l2 only")
            if len(self.l1) % 2 or len(self.l2) % 2:
                raise PydanticCustomError("BAD_ARITY", "quarter chains need an even number of lengths")
            return self
        nx, ny, nl = FAMILY_ARITY[self.family]
        if len(self.x) != nx or len(self.y) != ny or len(self.l) not in nl or self.l1 or self.l2:
            raise PydanticCustomError(
                "BAD_ARITY",
                "family {family} expects |x|={nx}, |y|={ny}, |l| in {nl}",
                {"family": self.family.value, "nx": nx, "ny": ny, "nl": list(nl)},
            )
        return self

    def scaled(self, s: float) -> "CondenserSpec":
        """Copy of this condenser with every length multiplied by ``s``."""
        def mul(values: Tuple[float, ...]) -> Tuple[float, ...]:
            return tuple(s * v for v in values)

        contours = None
        if self.contours:
            contours = tuple(
                c.model_copy(
                    update={
                        "vertices": tuple((s * px, s * py) for px, py in c.vertices),
                        "center": None if c.center is None else (s * c.center[0], s * c.center[1]),
                        "radius": None if c.radius is None else s * c.radius,
                    }
                )
                for c in self.contours
            )
        return self.model_copy(
            update={
                "x": mul(self.x),
                "y": mul(self.y),
                "l": mul(self.l),
                "l1": mul(self.l1),
                "l2": mul(self.l2),
                "contours": contours,
            }
        )

    def to_document(self) -> SpecDocument:
        return self.model_dump(mode="json", exclude_defaults=True)


def parse_spec(raw: Union[str, bytes, Mapping[str, Any], CondenserSpec]) -> CondenserSpec:
    """
    Validate a spec document.

    Abscissae are translated so that ``x`` starts at zero; capacity does not depend on
    the translation, and every derived geometry (contours, half-domain, meshes) uses the
    shifted values.

    Args:
        raw: JSON text or a mapping with fields ``family``, ``x``, ``y``, ``l``,
            ``l1``, ``l2`` and optionally ``contours``.

    Returns:
        The validated CondenserSpec.

    Example:
        >>> parse_spec({"family": "E", "x": [2, 7], "y": [1, 2]}).x
        (0.0, 5.0)
    """
    if isinstance(raw, CondenserSpec):
        return raw
    try:
        if isinstance(raw, (str, bytes)):
            return CondenserSpec.model_validate_json(raw)
        return CondenserSpec.model_validate(dict(raw))
    except ValidationError as exc:
        first = exc.errors()[0]
        code = _error_code(first["type"])
        logger.debug(f"Spec rejected: {first}")
        raise GeometryError(code, str(first["msg"]), {"loc": list(first["loc"])}) from exc


def _error_code(error_type: str) -> ErrorCode:
    try:
        return ErrorCode(error_type)
    except ValueError:
        return ErrorCode.INVALID_DOCUMENT
