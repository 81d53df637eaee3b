"""Layered clipart document model: closed paths with solid fill colors.

A document is an ordered stack of layers painted back to front; layer 0 is
the deepest. Values are immutable and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .geometry import ClosedPath


class DocumentError(ValueError):
    pass


@dataclass(frozen=True)
class FillColor:
    r: float
    g: float
    b: float

    def __post_init__(self) -> None:
        for name, v in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise DocumentError(f"color channel {name}={v} outside [0, 1]")

    def as_array(self):
        import numpy as np

        return np.array((self.r, self.g, self.b))

    def to_hex(self) -> str:
        def q(v: float) -> int:
            return int(math.floor(v * 255.0 + 0.5))

        return f"#{q(self.r):02x}{q(self.g):02x}{q(self.b):02x}"

    @classmethod
    def from_hex(cls, text: str) -> "FillColor":
        t = text.lstrip("#")
        if len(t) == 3:
            t = "".join(ch * 2 for ch in t)
        if len(t) != 6:
            raise DocumentError(f"bad hex color {text!r}")
        r, g, b = (int(t[i : i + 2], 16) / 255.0 for i in (0, 2, 4))
        return cls(r, g, b)

    @classmethod
    def clamped(cls, r: float, g: float, b: float) -> "FillColor":
        return cls(
            min(1.0, max(0.0, r)), min(1.0, max(0.0, g)), min(1.0, max(0.0, b))
        )


@dataclass(frozen=True)
class Layer:
    path: ClosedPath
    color: FillColor
    id: Optional[str] = None


@dataclass(frozen=True)
class ClipartDocument:
    width: float
    height: float
    layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise DocumentError(f"bad canvas size {self.width}x{self.height}")
        object.__setattr__(self, "layers", tuple(self.layers))

    def __len__(self) -> int:
        return len(self.layers)

    def with_layer(self, layer: Layer) -> "ClipartDocument":
        return replace(self, layers=self.layers + (layer,))
