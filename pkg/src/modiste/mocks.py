"""Deterministic stand-ins for every model capability.

The suite answers the gateway's logical requests without any network or
model weights: parsing/pose/matting come from a proportional synthetic
person layout, edge maps are gradient magnitudes, guided generation fills
the masked region with a color hashed from the prompt and copies every
unmasked pixel verbatim, and chat/VQA answers are scripted per scenario
file. Identical scenario + identical request → byte-identical response,
which is what makes the engine's end-to-end tests reproducible.

Scenario files are JSON:

    {
      "version": 1,
      "chat": {"responses": [{"digest"|"contains": …, "text"|"error": …}],
               "default": null},
      "vqa":  {… same shape …, "default": "plain answer"},
      # a bare response list is accepted as shorthand for {"responses": […]}
      "open-vocab-seg": {"phrases": {"brooch": [l, t, r, b]}},   # fractions
      "failures": {"guided-generation": {"skip": 1, "count": 2}}
    }

An unscripted chat/vqa request with a null default fails like an
unreachable server, which drives callers onto their documented
deterministic fallbacks.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import threading
from pathlib import Path

import numpy as np
from PIL import Image

from modiste import resources
from modiste.errors import BackendError, ParameterError, ProtocolError
from modiste.masks import (
    AlphaMatte,
    BinaryMask,
    LabelMap,
    labelmap_to_png,
    mask_from_png,
    mask_to_png,
    matte_to_png,
)
from modiste.store import BlobStore, content_hash

# Proportional figure layout: (label, top, bottom, left, right) as fractions
# of image height/width. Parsing and pose share their boundary fractions so
# fused regions stay adjacent (the neckline/waist bands depend on that).
PARSING_LAYOUT = (
    ("hair", 0.00, 0.08, 0.375, 0.625),
    ("face", 0.08, 0.17, 0.375, 0.625),
    ("torso-skin", 0.17, 0.21, 0.375, 0.625),
    ("top", 0.21, 0.50, 0.25, 0.75),
    ("left-arm", 0.21, 0.50, 0.125, 0.25),
    ("right-arm", 0.21, 0.50, 0.75, 0.875),
    ("pants", 0.50, 0.83, 0.3125, 0.6875),
    ("left-leg", 0.83, 0.96, 0.3125, 0.50),
    ("right-leg", 0.83, 0.96, 0.50, 0.6875),
)

POSE_LAYOUT = (
    ("head", 0.00, 0.17, 0.375, 0.625),
    ("neck", 0.17, 0.21, 0.375, 0.625),
    ("torso", 0.21, 0.50, 0.25, 0.75),
    ("left-upper-arm", 0.21, 0.34, 0.125, 0.25),
    ("left-lower-arm", 0.34, 0.50, 0.125, 0.25),
    ("right-upper-arm", 0.21, 0.34, 0.75, 0.875),
    ("right-lower-arm", 0.34, 0.50, 0.75, 0.875),
    ("left-upper-leg", 0.50, 0.67, 0.3125, 0.50),
    ("left-lower-leg", 0.67, 0.96, 0.3125, 0.50),
    ("right-upper-leg", 0.50, 0.67, 0.50, 0.6875),
    ("right-lower-leg", 0.67, 0.96, 0.50, 0.6875),
)


def _paint(plane: np.ndarray, vocab: list[str], layout, width: int, height: int):
    for name, top, bottom, left, right in layout:
        r0, r1 = round(top * height), round(bottom * height)
        c0, c1 = round(left * width), round(right * width)
        plane[r0:r1, c0:c1] = vocab.index(name)


def person_parsing(width: int, height: int) -> LabelMap:
    vocab = list(resources.parsing_vocabulary())
    plane = np.zeros((height, width), dtype=np.uint8)
    _paint(plane, vocab, PARSING_LAYOUT, width, height)
    return LabelMap(plane, vocab)


def person_pose(width: int, height: int) -> LabelMap:
    vocab = list(resources.pose_vocabulary())
    plane = np.zeros((height, width), dtype=np.uint8)
    _paint(plane, vocab, POSE_LAYOUT, width, height)
    return LabelMap(plane, vocab)


def person_matte(width: int, height: int) -> AlphaMatte:
    alpha = np.zeros((height, width), dtype=np.float64)
    for _, top, bottom, left, right in PARSING_LAYOUT:
        r0, r1 = round(top * height), round(bottom * height)
        c0, c1 = round(left * width), round(right * width)
        alpha[r0:r1, c0:c1] = 1.0
    return AlphaMatte(alpha)


def synthetic_person_png(width: int = 512, height: int = 768) -> bytes:
    """A flat-color figure on gray background, used as demo/test input."""
    colors = {
        "hair": (60, 40, 20),
        "face": (224, 185, 150),
        "torso-skin": (220, 180, 145),
        "top": (40, 60, 130),
        "left-arm": (222, 182, 148),
        "right-arm": (222, 182, 148),
        "pants": (50, 50, 55),
        "left-leg": (221, 181, 146),
        "right-leg": (221, 181, 146),
    }
    rgb = np.full((height, width, 3), 200, dtype=np.uint8)
    for name, top, bottom, left, right in PARSING_LAYOUT:
        r0, r1 = round(top * height), round(bottom * height)
        c0, c1 = round(left * width), round(right * width)
        rgb[r0:r1, c0:c1] = colors[name]
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def prompt_fill_color(prompt: str) -> tuple[int, int, int]:
    """The flat color the mock generator paints for a given prompt."""
    digest = hashlib.sha256(prompt.encode("utf-8")).digest()
    return (digest[0], digest[1], digest[2])


def _normalize_scenario(scenario: dict) -> dict:
    """Validate the scenario shape up front so a bad file fails at load time
    with a clear message instead of mid-request inside a handler."""
    out = dict(scenario)
    for cap in ("chat", "vqa"):
        section = out.get(cap)
        if section is None:
            continue
        if isinstance(section, list):  # shorthand for {"responses": [...]}
            section = {"responses": section}
        if not isinstance(section, dict):
            raise ParameterError(
                f"scenario section {cap!r} must be an object or a response list"
            )
        responses = section.get("responses", [])
        if not isinstance(responses, list) or any(
            not isinstance(entry, dict) for entry in responses
        ):
            raise ParameterError(f"scenario {cap!r} responses must be a list of objects")
        for entry in responses:
            if "text" not in entry and "error" not in entry:
                raise ParameterError(
                    f"every scenario {cap!r} response needs 'text' or 'error'"
                )
        out[cap] = section
    seg = out.get("open-vocab-seg")
    if seg is not None:
        phrases = seg.get("phrases") if isinstance(seg, dict) else None
        if not isinstance(phrases, dict) or any(
            not (isinstance(box, (list, tuple)) and len(box) == 4)
            for box in phrases.values()
        ):
            raise ParameterError(
                "scenario 'open-vocab-seg' needs a 'phrases' object of 4-number boxes"
            )
    failures = out.get("failures")
    if failures is not None and (
        not isinstance(failures, dict)
        or any(not isinstance(spec, dict) for spec in failures.values())
    ):
        raise ParameterError("scenario 'failures' must map capability names to objects")
    return out


class MockSuite:
    """Scenario-driven implementations behind the gateway's mock mode."""

    def __init__(self, store: BlobStore, scenario: dict | None = None):
        self.store = store
        scenario = scenario or {}
        if scenario.get("version", 1) != 1:
            raise ParameterError(f"unsupported scenario version {scenario.get('version')!r}")
        self.scenario = _normalize_scenario(scenario)
        self._failure_lock = threading.Lock()
        self._failure_seen: dict[str, int] = {}

    @classmethod
    def from_file(cls, store: BlobStore, path: str | Path) -> "MockSuite":
        return cls(store, json.loads(Path(path).read_text(encoding="utf-8")))

    # -- dispatch -----------------------------------------------------------

    def handle(self, capability: str, body: dict, digest: str) -> dict:
        self._maybe_inject_failure(capability)
        handler = {
            "chat": self._chat,
            "vqa": self._vqa,
            "human-parsing": self._human_parsing,
            "pose-parts": self._pose_parts,
            "open-vocab-seg": self._open_vocab_seg,
            "matting": self._matting,
            "edge": self._edge,
            "guided-generation": self._generate,
        }.get(capability)
        if handler is None:
            raise ParameterError(f"unknown capability {capability!r}")
        return handler(body, digest)

    def _maybe_inject_failure(self, capability: str):
        spec = self.scenario.get("failures", {}).get(capability)
        if not spec:
            return
        with self._failure_lock:
            seen = self._failure_seen.get(capability, 0)
            self._failure_seen[capability] = seen + 1
        skip = int(spec.get("skip", 0))
        count = spec.get("count", "always")
        if seen < skip:
            return
        if count == "always" or seen < skip + int(count):
            raise BackendError(capability, "injected failure")

    # -- image plumbing -----------------------------------------------------

    def _load_rgb(self, image_field) -> np.ndarray:
        if not isinstance(image_field, dict) or image_field.get("kind") != "image-ref":
            raise ProtocolError("request image must be a stored reference")
        data = self.store.get(image_field["ref"])
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))

    def _dims(self, image_field) -> tuple[int, int]:
        rgb = self._load_rgb(image_field)
        return rgb.shape[1], rgb.shape[0]

    # -- scripted text capabilities ----------------------------------------

    def _scripted_text(self, capability: str, probe: str, digest: str) -> str:
        section = self.scenario.get(capability, {})
        probe_lower = probe.lower()
        for entry in section.get("responses", []):
            if "digest" in entry and entry["digest"] != digest:
                continue
            if "contains" in entry and entry["contains"].lower() not in probe_lower:
                continue
            if "error" in entry:
                raise BackendError(capability, entry["error"])
            return entry["text"]
        default = section.get("default")
        if default is None:
            raise BackendError(capability, f"no scripted response for {digest[:12]}")
        return default

    @staticmethod
    def _text_response(text: str) -> dict:
        return {"text": text, "contentHash": content_hash(text.encode("utf-8"))}

    def _chat(self, body: dict, digest: str) -> dict:
        messages = body.get("messages", [])
        users = [m["content"] for m in messages if m.get("role") == "user"]
        probe = users[-1] if users else ""
        return self._text_response(self._scripted_text("chat", probe, digest))

    def _vqa(self, body: dict, digest: str) -> dict:
        return self._text_response(
            self._scripted_text("vqa", body.get("question", ""), digest)
        )

    # -- image capabilities -------------------------------------------------

    @staticmethod
    def _label_map_response(label_map: LabelMap) -> dict:
        png, _ = labelmap_to_png(label_map)
        return {
            "labelMap": {"png": _b64(png), "vocabulary": list(label_map.vocabulary)},
            "contentHash": content_hash(png),
        }

    def _human_parsing(self, body: dict, digest: str) -> dict:
        width, height = self._dims(body["image"])
        return self._label_map_response(person_parsing(width, height))

    def _pose_parts(self, body: dict, digest: str) -> dict:
        width, height = self._dims(body["image"])
        return self._label_map_response(person_pose(width, height))

    def _open_vocab_seg(self, body: dict, digest: str) -> dict:
        width, height = self._dims(body["image"])
        phrase = body.get("phrase", "").strip().lower()
        boxes = self.scenario.get("open-vocab-seg", {}).get("phrases", {})
        bits = np.zeros((height, width), dtype=bool)
        box = boxes.get(phrase)
        if box is not None:
            left, top, right, bottom = box
            bits[
                round(top * height) : round(bottom * height),
                round(left * width) : round(right * width),
            ] = True
        png = mask_to_png(BinaryMask(bits), bit_depth=1)
        return {"mask": {"png": _b64(png)}, "contentHash": content_hash(png)}

    def _matting(self, body: dict, digest: str) -> dict:
        width, height = self._dims(body["image"])
        png = matte_to_png(person_matte(width, height))
        return {"matte": {"png": _b64(png)}, "contentHash": content_hash(png)}

    def _edge(self, body: dict, digest: str) -> dict:
        rgb = self._load_rgb(body["image"]).astype(np.float64)
        gray = rgb @ np.array([0.299, 0.587, 0.114])
        gx = np.zeros_like(gray)
        gy = np.zeros_like(gray)
        gx[:, 1:] = np.abs(gray[:, 1:] - gray[:, :-1])
        gy[1:, :] = np.abs(gray[1:, :] - gray[:-1, :])
        magnitude = np.hypot(gx, gy)
        peak = magnitude.max()
        if peak > 0:
            magnitude = magnitude / peak * 255.0
        img = Image.fromarray(magnitude.astype(np.uint8), mode="L")
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        png = buf.getvalue()
        return {"edge": {"png": _b64(png)}, "contentHash": content_hash(png)}

    def _generate(self, body: dict, digest: str) -> dict:
        rgb = self._load_rgb(body["image"]).copy()
        mask = mask_from_png(_unb64(body["mask"]["png"]))
        if mask.shape != rgb.shape[:2]:
            raise ProtocolError("generation mask does not match the image")
        rgb[mask.bits] = prompt_fill_color(body.get("prompt", ""))
        buf = io.BytesIO()
        Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
        png = buf.getvalue()
        return {"image": {"png": _b64(png)}, "contentHash": content_hash(png)}


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except Exception as exc:
        raise ProtocolError(f"bad base64 payload: {exc}") from None
