"""Uniform client for the eight external model capabilities.

Every capability (chat, VQA, human parsing, pose parts, open-vocabulary
segmentation, matting, edge extraction, guided generation) is called through
one wire protocol: JSON over HTTP POST to /v1/{route}, images inlined as
base64 PNG up to 4 MiB and shipped multipart beyond that. Responses carry a
content hash the client verifies, image-shaped results must match the source
image's dimensions, failures retry with exponential backoff, and every
attempt appends a call record — the observability surface the test oracles
count.

A deterministic mock implementation of each capability (see `mocks`) plugs
in behind the same interface, so the full engine runs with zero model
weights.
"""

from __future__ import annotations

import base64
import io
import logging
import threading
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import httpx
from PIL import Image

from modiste.errors import BackendError, ParameterError, ProtocolError
from modiste.masks import (
    AlphaMatte,
    BinaryMask,
    LabelMap,
    labelmap_from_png,
    mask_from_png,
    mask_to_png,
    matte_from_png,
)
from modiste.store import BlobStore, canonical_json, content_hash

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from modiste.planner import GenerationJob

log = logging.getLogger(__name__)

CAPABILITIES = (
    "chat",
    "vqa",
    "human-parsing",
    "pose-parts",
    "open-vocab-seg",
    "matting",
    "edge",
    "guided-generation",
)

# Route suffix under /v1/ for each capability.
ROUTES = {
    "chat": "chat",
    "vqa": "vqa",
    "human-parsing": "human-parsing",
    "pose-parts": "pose-parts",
    "open-vocab-seg": "seg",
    "matting": "matting",
    "edge": "edge",
    "guided-generation": "generate",
}

# Requests inline base64 PNGs up to this many bytes; larger images go multipart.
INLINE_IMAGE_LIMIT = 4 * 1024 * 1024


def request_digest(capability: str, body: dict) -> str:
    """Stable identity of one logical request, before any wire encoding.

    Images appear as content references here, so the digest does not depend
    on whether a payload later travels inline or as a multipart file.
    """
    return content_hash(canonical_json({"capability": capability, "body": body}).encode())


@dataclass(frozen=True)
class BackendDescriptor:
    """Where and how one capability is served."""

    capability: str
    mode: str = "mock"
    endpoint: str | None = None
    timeout: float = 30.0
    max_retries: int = 2
    retry_backoff: float = 0.25
    max_inflight: int = 4

    def __post_init__(self):
        if self.capability not in CAPABILITIES:
            raise ParameterError(f"unknown capability {self.capability!r}")
        if self.mode not in ("remote", "mock"):
            raise ParameterError(f"mode must be remote or mock, got {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ParameterError(f"remote {self.capability} descriptor needs an endpoint")
        if self.timeout <= 0:
            raise ParameterError("timeout must be positive")
        if self.max_retries < 0:
            raise ParameterError("max_retries must be non-negative")
        if self.max_inflight < 1:
            raise ParameterError("max_inflight must be at least 1")


@dataclass(frozen=True)
class BackendCallRecord:
    """One attempt against one capability; failures are recorded too."""

    capability: str
    request_digest: str
    latency_ms: float
    attempt: int
    outcome: str

    def to_json(self) -> dict:
        return {
            "capability": self.capability,
            "requestDigest": self.request_digest,
            "latencyMs": round(self.latency_ms, 3),
            "attempt": self.attempt,
            "outcome": self.outcome,
        }


def mock_descriptors(max_retries: int = 1) -> dict[str, BackendDescriptor]:
    """A full set of mock-mode descriptors (no backoff delay)."""
    return {
        cap: BackendDescriptor(
            capability=cap, mode="mock", max_retries=max_retries, retry_backoff=0.0
        )
        for cap in CAPABILITIES
    }


def descriptors_from_config(config: Mapping | None) -> dict[str, BackendDescriptor]:
    """Build one descriptor per capability from a config mapping.

    `config["backends"]` may hold per-capability settings; unspecified
    capabilities default to mock mode. An `endpoint` switches a capability
    to remote unless `mode` says otherwise.
    """
    backends = dict((config or {}).get("backends", {}))
    out: dict[str, BackendDescriptor] = {}
    for cap in CAPABILITIES:
        settings = dict(backends.pop(cap, {}))
        if "mode" not in settings:
            settings["mode"] = "remote" if settings.get("endpoint") else "mock"
        if settings["mode"] == "mock":
            settings.setdefault("retry_backoff", 0.0)
        out[cap] = BackendDescriptor(capability=cap, **settings)
    if backends:
        raise ParameterError(f"unknown backend capabilities in config: {sorted(backends)}")
    return out


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except Exception as exc:
        raise ProtocolError(f"bad base64 image payload: {exc}") from None


class Gateway:
    """Shared, thread-safe handle to all configured backends."""

    def __init__(
        self,
        descriptors: Mapping[str, BackendDescriptor],
        store: BlobStore,
        mock_suite=None,
        sleeper=time.sleep,
    ):
        missing = set(CAPABILITIES) - set(descriptors)
        extra = set(descriptors) - set(CAPABILITIES)
        if missing or extra:
            raise ParameterError(
                f"every capability must be configured exactly once "
                f"(missing: {sorted(missing)}, unknown: {sorted(extra)})"
            )
        for cap, desc in descriptors.items():
            if desc.capability != cap:
                raise ParameterError(f"descriptor under {cap!r} is for {desc.capability!r}")
        self.descriptors = dict(descriptors)
        self.store = store
        self.mock_suite = mock_suite
        self._sleeper = sleeper
        self._records: list[BackendCallRecord] = []
        self._records_lock = threading.Lock()
        self._gates = {
            cap: threading.BoundedSemaphore(desc.max_inflight)
            for cap, desc in self.descriptors.items()
        }
        self._dims_cache: dict[str, tuple[int, int]] = {}
        self._client: httpx.Client | None = None
        self._client_lock = threading.Lock()

    # -- observability ------------------------------------------------------

    @property
    def records(self) -> list[BackendCallRecord]:
        with self._records_lock:
            return list(self._records)

    def call_count(self, capability: str) -> int:
        """Number of attempts made against one capability (failures included)."""
        return sum(1 for r in self.records if r.capability == capability)

    def _record(self, capability: str, digest: str, started: float, attempt: int, outcome: str):
        record = BackendCallRecord(
            capability=capability,
            request_digest=digest,
            latency_ms=(time.monotonic() - started) * 1000.0,
            attempt=attempt,
            outcome=outcome,
        )
        with self._records_lock:
            self._records.append(record)

    # -- transport ----------------------------------------------------------

    def _invoke(self, capability: str, body: dict) -> dict:
        """Run one logical request with retries; returns the wire response."""
        desc = self.descriptors[capability]
        digest = request_digest(capability, body)
        attempts = desc.max_retries + 1
        last_detail = "no attempts made"
        for attempt in range(1, attempts + 1):
            started = time.monotonic()
            with self._gates[capability]:
                try:
                    if desc.mode == "mock":
                        if self.mock_suite is None:
                            raise ParameterError(
                                f"{capability} is in mock mode but no mock suite is attached"
                            )
                        response = self.mock_suite.handle(capability, body, digest)
                    else:
                        response = self._http_post(desc, body)
                    self._verify_hash(capability, response)
                except ProtocolError:
                    self._record(capability, digest, started, attempt, "protocol")
                    raise
                except BackendError as exc:
                    last_detail = exc.detail
                    self._record(capability, digest, started, attempt, f"error:{exc.detail}")
                except httpx.HTTPError as exc:
                    last_detail = f"{type(exc).__name__}: {exc}"
                    self._record(
                        capability, digest, started, attempt, f"transport:{type(exc).__name__}"
                    )
                else:
                    self._record(capability, digest, started, attempt, "ok")
                    return response
            if attempt < attempts and desc.retry_backoff > 0:
                self._sleeper(desc.retry_backoff * (2 ** (attempt - 1)))
        raise BackendError(capability, last_detail)

    def _http_post(self, desc: BackendDescriptor, body: dict) -> dict:
        url = desc.endpoint.rstrip("/") + "/v1/" + ROUTES[desc.capability]
        wire_body, files = self._encode_images(body)
        client = self._ensure_client()
        if files:
            response = client.post(
                url,
                data={"request": canonical_json(wire_body)},
                files=files,
                timeout=desc.timeout,
            )
        else:
            response = client.post(url, json=wire_body, timeout=desc.timeout)
        if response.status_code != 200:
            raise BackendError(desc.capability, f"http:{response.status_code}")
        try:
            payload = response.json()
        except ValueError as exc:
            raise ProtocolError(f"{desc.capability}: response is not JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ProtocolError(f"{desc.capability}: response must be a JSON object")
        return payload

    def _ensure_client(self) -> httpx.Client:
        with self._client_lock:
            if self._client is None:
                self._client = httpx.Client()
            return self._client

    def close(self):
        with self._client_lock:
            if self._client is not None:
                self._client.close()
                self._client = None

    def _encode_images(self, body: dict) -> tuple[dict, dict]:
        """Replace image refs with base64 payloads, or multipart parts past 4 MiB."""
        files: dict[str, tuple[str, bytes, str]] = {}

        def encode(value, key_path: str):
            if isinstance(value, dict):
                if value.get("kind") == "image-ref":
                    data = self.store.get(value["ref"])
                    if len(data) <= INLINE_IMAGE_LIMIT:
                        return {"encoding": "base64", "data": _b64(data)}
                    name = f"part{len(files)}"
                    files[name] = (name + ".png", data, "image/png")
                    return {"encoding": "multipart", "name": name}
                return {k: encode(v, f"{key_path}.{k}") for k, v in value.items()}
            if isinstance(value, list):
                return [encode(v, f"{key_path}[{i}]") for i, v in enumerate(value)]
            return value

        return encode(body, "$"), files

    @staticmethod
    def _verify_hash(capability: str, response: dict):
        declared = response.get("contentHash")
        if not declared:
            raise ProtocolError(f"{capability}: response carries no content hash")
        actual = content_hash(_primary_content(capability, response))
        if actual != declared:
            raise ProtocolError(
                f"{capability}: content hash mismatch (declared {declared[:12]}…, "
                f"got {actual[:12]}…)"
            )

    # -- image helpers ------------------------------------------------------

    def image_dimensions(self, ref: str) -> tuple[int, int]:
        """(width, height) of a stored image, cached per ref."""
        dims = self._dims_cache.get(ref)
        if dims is None:
            with Image.open(io.BytesIO(self.store.get(ref))) as img:
                dims = img.size
            self._dims_cache[ref] = dims
        return dims

    def _check_dims(self, capability: str, source_ref: str, got: tuple[int, int]):
        expected = self.image_dimensions(source_ref)
        if got != expected:
            raise ProtocolError(
                f"{capability}: result is {got[0]}x{got[1]} but the source image "
                f"is {expected[0]}x{expected[1]}"
            )

    @staticmethod
    def _image_ref(ref: str) -> dict:
        return {"kind": "image-ref", "ref": ref}

    # -- typed operations ---------------------------------------------------

    def call_chat(self, messages: Sequence[Mapping[str, str]]) -> str:
        for m in messages:
            if m.get("role") not in ("system", "user", "assistant"):
                raise ParameterError(f"bad chat role {m.get('role')!r}")
        body = {"messages": [{"role": m["role"], "content": m["content"]} for m in messages]}
        return _require_text(self._invoke("chat", body), "chat")

    def call_vqa(self, image_ref: str, question: str) -> str:
        body = {"image": self._image_ref(image_ref), "question": question}
        return _require_text(self._invoke("vqa", body), "vqa")

    def _call_label_map(self, capability: str, image_ref: str) -> LabelMap:
        response = self._invoke(capability, {"image": self._image_ref(image_ref)})
        section = response.get("labelMap")
        if not isinstance(section, dict) or "png" not in section or "vocabulary" not in section:
            raise ProtocolError(f"{capability}: response lacks labelMap.png/vocabulary")
        png = _unb64(section["png"])
        sidecar = canonical_json({"vocabulary": section["vocabulary"]})
        try:
            label_map = labelmap_from_png(png, sidecar)
        except Exception as exc:
            raise ProtocolError(f"{capability}: undecodable label map: {exc}") from None
        self._check_dims(capability, image_ref, (label_map.width, label_map.height))
        return label_map

    def call_human_parsing(self, image_ref: str) -> LabelMap:
        return self._call_label_map("human-parsing", image_ref)

    def call_pose_parts(self, image_ref: str) -> LabelMap:
        return self._call_label_map("pose-parts", image_ref)

    def call_open_vocab_seg(self, image_ref: str, phrase: str) -> BinaryMask:
        body = {"image": self._image_ref(image_ref), "phrase": phrase}
        response = self._invoke("open-vocab-seg", body)
        mask = _decode_png_section(response, "mask", "open-vocab-seg", mask_from_png)
        self._check_dims("open-vocab-seg", image_ref, (mask.width, mask.height))
        return mask

    def call_matting(self, image_ref: str) -> AlphaMatte:
        response = self._invoke("matting", {"image": self._image_ref(image_ref)})
        matte = _decode_png_section(response, "matte", "matting", matte_from_png)
        self._check_dims("matting", image_ref, (matte.width, matte.height))
        return matte

    def call_edge(self, image_ref: str) -> str:
        """Extract a soft-edge map; returns a ref to an 8-bit grayscale PNG."""
        response = self._invoke("edge", {"image": self._image_ref(image_ref)})
        png = _decode_png_section(response, "edge", "edge", lambda data: data)
        with Image.open(io.BytesIO(png)) as img:
            if img.mode != "L":
                raise ProtocolError(f"edge: map must be 8-bit grayscale, got {img.mode!r}")
            self._check_dims("edge", image_ref, img.size)
        return self.store.put(png, "image/png")

    def call_generate(self, job: "GenerationJob") -> str:
        """Run one guided-generation job; returns the result image ref."""
        body = {
            "image": self._image_ref(job.image_ref),
            "mask": {"png": _b64(mask_to_png(job.mask, bit_depth=1))},
            "prompt": job.prompt.text,
            "negativePrompt": job.prompt.negative_text,
            "condition": job.condition,
            "edge": self._image_ref(job.edge_ref) if job.edge_ref else None,
            "seed": job.seed,
            "strength": job.strength,
            "guidanceScale": job.guidance_scale,
        }
        response = self._invoke("guided-generation", body)
        png = _decode_png_section(response, "image", "guided-generation", lambda data: data)
        with Image.open(io.BytesIO(png)) as img:
            self._check_dims("guided-generation", job.image_ref, img.size)
        return self.store.put(png, "image/png")


def _primary_content(capability: str, response: dict) -> bytes:
    """The bytes a response's contentHash covers."""
    if capability in ("chat", "vqa"):
        text = response.get("text")
        if not isinstance(text, str):
            raise ProtocolError(f"{capability}: response lacks text")
        return text.encode("utf-8")
    section_key = {
        "human-parsing": "labelMap",
        "pose-parts": "labelMap",
        "open-vocab-seg": "mask",
        "matting": "matte",
        "edge": "edge",
        "guided-generation": "image",
    }[capability]
    section = response.get(section_key)
    if not isinstance(section, dict) or "png" not in section:
        raise ProtocolError(f"{capability}: response lacks {section_key}.png")
    return _unb64(section["png"])


def _require_text(response: dict, capability: str) -> str:
    text = response.get("text")
    if not isinstance(text, str) or not text:
        raise ProtocolError(f"{capability}: response lacks text")
    return text


def _decode_png_section(response: dict, key: str, capability: str, decoder):
    section = response.get(key)
    if not isinstance(section, dict) or "png" not in section:
        raise ProtocolError(f"{capability}: response lacks {key}.png")
    data = _unb64(section["png"])
    try:
        return decoder(data)
    except ProtocolError:
        raise
    except Exception as exc:
        raise ProtocolError(f"{capability}: undecodable {key} payload: {exc}") from None
