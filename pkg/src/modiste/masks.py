"""Binary mask and label-map algebra over row-major pixel planes.

All operations are pure: inputs are immutable (the wrapped numpy arrays are
made read-only) and every operation returns a fresh value, so values can be
shared freely across threads.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np
from PIL import Image

from modiste import kernels
from modiste.errors import (
    DimensionError,
    EmptyInputError,
    ParameterError,
    UnknownLabelError,
)

__all__ = [
    "AlphaMatte",
    "BinaryMask",
    "Box",
    "LabelMap",
    "area",
    "bbox",
    "binarize",
    "default_dilation_radius",
    "dilate_maxpool",
    "intersect",
    "iou",
    "labelmap_from_png",
    "labelmap_to_png",
    "mask_from_labels",
    "mask_from_png",
    "mask_to_png",
    "matte_from_png",
    "matte_to_png",
    "union",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle, half-open: x in [left, right), y in [top, bottom)."""

    left: int
    top: int
    right: int
    bottom: int

    @property
    def width(self) -> int:
        return self.right - self.left

    @property
    def height(self) -> int:
        return self.bottom - self.top

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.left, self.top, self.right, self.bottom)


class BinaryMask:
    """A width x height boolean plane."""

    __slots__ = ("bits",)

    def __init__(self, bits: np.ndarray):
        bits = np.asarray(bits)
        if bits.ndim != 2 or bits.size == 0:
            raise DimensionError(f"mask plane must be 2-D and non-degenerate, got shape {bits.shape}")
        if bits.dtype != np.bool_:
            bits = bits.astype(bool)
        self.bits = _freeze(bits)

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def ones(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_rect(cls, width: int, height: int, box: Box) -> "BinaryMask":
        bits = np.zeros((height, width), dtype=bool)
        bits[max(box.top, 0) : max(box.bottom, 0), max(box.left, 0) : max(box.right, 0)] = True
        return cls(bits)

    def is_empty(self) -> bool:
        return not bool(self.bits.any())

    def contains(self, other: "BinaryMask") -> bool:
        """True when every set pixel of `other` is set here too."""
        _same_shape(self, other)
        return bool(np.all(self.bits | ~other.bits))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.shape, self.bits.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryMask({self.width}x{self.height}, {area(self)} px set)"


class LabelMap:
    """A small-integer plane plus the ordered vocabulary its values index into.

    Index 0 is reserved for "background".
    """

    __slots__ = ("labels", "vocabulary")

    def __init__(self, labels: np.ndarray, vocabulary: tuple[str, ...] | list[str]):
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.size == 0:
            raise DimensionError(f"label plane must be 2-D and non-degenerate, got shape {labels.shape}")
        vocabulary = tuple(vocabulary)
        if not vocabulary or vocabulary[0] != "background":
            raise ParameterError("vocabulary must start with 'background'")
        if len(set(vocabulary)) != len(vocabulary):
            raise ParameterError("vocabulary names must be unique")
        if labels.dtype.kind not in "iu":
            raise ParameterError(f"label plane must be integer, got {labels.dtype}")
        if labels.size and int(labels.max()) >= len(vocabulary):
            raise UnknownLabelError(
                f"label value {int(labels.max())} outside vocabulary of {len(vocabulary)}"
            )
        if labels.size and int(labels.min()) < 0:
            raise ParameterError("label values must be non-negative")
        self.labels = _freeze(labels.astype(np.uint8 if len(vocabulary) <= 256 else np.int32))
        self.vocabulary = vocabulary

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def index_of(self, name: str) -> int:
        try:
            return self.vocabulary.index(name)
        except ValueError:
            raise UnknownLabelError(f"label {name!r} not in vocabulary") from None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.vocabulary == other.vocabulary and bool(np.array_equal(self.labels, other.labels))

    def __hash__(self):
        return hash((self.vocabulary, self.labels.tobytes()))

    def __repr__(self) -> str:
        return f"LabelMap({self.width}x{self.height}, {len(self.vocabulary)} labels)"


class AlphaMatte:
    """A soft opacity plane with values in [0, 1]."""

    __slots__ = ("alpha",)

    def __init__(self, alpha: np.ndarray):
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.ndim != 2 or alpha.size == 0:
            raise DimensionError(f"alpha plane must be 2-D and non-degenerate, got shape {alpha.shape}")
        if float(alpha.min()) < 0.0 or float(alpha.max()) > 1.0:
            raise ParameterError("alpha values must lie in [0, 1]")
        self.alpha = _freeze(alpha)

    @property
    def width(self) -> int:
        return self.alpha.shape[1]

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.alpha.shape

    def __repr__(self) -> str:
        return f"AlphaMatte({self.width}x{self.height})"


def _same_shape(*planes) -> None:
    shapes = {p.shape for p in planes}
    if len(shapes) > 1:
        raise DimensionError(f"plane dimensions differ: {sorted(shapes)}")


# ---------------------------------------------------------------------------
# Operations


def union(masks: list[BinaryMask]) -> BinaryMask:
    """Pixelwise OR of one or more same-sized masks."""
    if not masks:
        raise EmptyInputError("union of zero masks is undefined")
    _same_shape(*masks)
    out = masks[0].bits.copy()
    for m in masks[1:]:
        out |= m.bits
    return BinaryMask(out)


def intersect(a: BinaryMask, b: BinaryMask) -> BinaryMask:
    """Pixelwise AND of two same-sized masks."""
    _same_shape(a, b)
    return BinaryMask(a.bits & b.bits)


def dilate_maxpool(m: BinaryMask, radius: int) -> BinaryMask:
    """Expand a mask so each output pixel covers a square window of the input.

    A pixel is set when any input pixel within Chebyshev distance `radius`
    is set; borders behave as zero padding. Radii compose additively.
    """
    if radius < 0:
        raise ParameterError(f"dilation radius must be >= 0, got {radius}")
    if radius == 0:
        return m
    return BinaryMask(kernels.dilate_chebyshev(m.bits, int(radius)))


def binarize(matte: AlphaMatte, threshold: float) -> BinaryMask:
    """Threshold a matte: pixels with alpha >= threshold are set."""
    if not (0.0 < threshold <= 1.0):
        raise ParameterError(f"threshold must be in (0, 1], got {threshold}")
    return BinaryMask(matte.alpha >= threshold)


def mask_from_labels(lm: LabelMap, names) -> BinaryMask:
    """Mask of the pixels whose label name is in `names`."""
    indices = [lm.index_of(n) for n in names]
    if not indices:
        return BinaryMask.zeros(lm.width, lm.height)
    return BinaryMask(np.isin(lm.labels, indices))


def area(m: BinaryMask) -> int:
    """Number of set pixels."""
    return int(m.bits.sum())


def bbox(m: BinaryMask) -> Box | None:
    """Tight bounding box of the set pixels, or None for an empty mask."""
    ys, xs = np.nonzero(m.bits)
    if ys.size == 0:
        return None
    return Box(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; 0.0 when both masks are empty."""
    _same_shape(a, b)
    inter = int((a.bits & b.bits).sum())
    un = int((a.bits | b.bits).sum())
    return inter / un if un else 0.0


def default_dilation_radius(width: int, height: int) -> int:
    """Boundary-expansion radius used when a request does not set one.

    1% of the short image side, floored at 3 px, keeps the expansion
    proportional at any resolution.
    """
    return max(3, round(0.01 * min(width, height)))


# ---------------------------------------------------------------------------
# PNG serialization


def mask_to_png(m: BinaryMask, bit_depth: int = 1) -> bytes:
    """Encode a mask as a 1-bit PNG (default) or an 8-bit grayscale 0/255 PNG."""
    if bit_depth == 1:
        img = Image.fromarray(m.bits)  # mode "1"
    elif bit_depth == 8:
        img = Image.fromarray(m.bits.astype(np.uint8) * 255, mode="L")
    else:
        raise ParameterError(f"bit_depth must be 1 or 8, got {bit_depth}")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png(data: bytes) -> BinaryMask:
    """Decode a mask from a 1-bit or 8-bit grayscale 0/255 PNG."""
    img = Image.open(io.BytesIO(data))
    if img.mode == "1":
        return BinaryMask(np.asarray(img, dtype=bool))
    if img.mode == "L":
        arr = np.asarray(img)
        bad = np.unique(arr[(arr != 0) & (arr != 255)])
        if bad.size:
            raise ParameterError(f"grayscale mask PNG contains non-0/255 values: {bad[:4].tolist()}")
        return BinaryMask(arr == 255)
    raise ParameterError(f"mask PNG must be 1-bit or 8-bit grayscale, got mode {img.mode!r}")


def labelmap_to_png(lm: LabelMap) -> tuple[bytes, str]:
    """Encode a label map as an 8-bit indexed PNG plus a JSON vocabulary sidecar."""
    if len(lm.vocabulary) > 256:
        raise ParameterError("indexed PNG supports at most 256 labels")
    img = Image.fromarray(lm.labels.astype(np.uint8), mode="P")
    palette = []
    for i in range(256):
        # stable distinguishable palette; entry 0 stays black for background
        palette += [(i * 53) % 256, (i * 101) % 256, (i * 197) % 256] if i else [0, 0, 0]
    img.putpalette(palette)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    sidecar = json.dumps({"vocabulary": list(lm.vocabulary)}, indent=2)
    return buf.getvalue(), sidecar


def labelmap_from_png(data: bytes, sidecar: str) -> LabelMap:
    img = Image.open(io.BytesIO(data))
    if img.mode != "P":
        raise ParameterError(f"label map PNG must be indexed, got mode {img.mode!r}")
    vocab = json.loads(sidecar)["vocabulary"]
    return LabelMap(np.asarray(img, dtype=np.uint8), vocab)


def matte_to_png(matte: AlphaMatte) -> bytes:
    """Encode a matte as an 8-bit grayscale PNG (alpha quantized to /255)."""
    img = Image.fromarray(np.round(matte.alpha * 255.0).astype(np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def matte_from_png(data: bytes) -> AlphaMatte:
    img = Image.open(io.BytesIO(data))
    if img.mode != "L":
        img = img.convert("L")
    return AlphaMatte(np.asarray(img, dtype=np.float64) / 255.0)
