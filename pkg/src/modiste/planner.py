"""Requirement decomposition, task classification, and generation dispatch.

A free-form editing requirement is split into ordered clauses, each clause
is classified into one of four categories (Replacement, Recoloring,
Addition, Removal) with its source/target descriptions, a standardized
generation prompt is summarized from VQA details, and one guided-generation
job per task is executed — sequentially, each job consuming the previous
job's output image.

Language-model interactions use constrained single-line output formats
("clause | clause"; "category | source | target"). A malformed answer is
retried once; a second failure, or an unreachable backend, drops to
deterministic fallbacks (conjunction splitting, keyword classification,
template prompts), so the engine keeps working — degraded but predictable —
with no language model at all.
"""

from __future__ import annotations

import logging
import random
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from modiste.automask import (
    CATEGORIES,
    CATEGORY_ADDITION,
    CATEGORY_RECOLORING,
    CATEGORY_REMOVAL,
    CATEGORY_REPLACEMENT,
    AutomaskConfig,
    MaskPlan,
    OcclusionRuleTable,
    generate_mask,
)
from modiste.coseg import (
    CoSegmentation,
    DerivedSemanticRule,
    build_cosegmentation,
    derive_applicable,
)
from modiste.errors import (
    BackendError,
    ClassificationError,
    EngineError,
    ParameterError,
    PipelineError,
    ProtocolError,
)
from modiste.masks import BinaryMask, mask_to_png

log = logging.getLogger(__name__)

NEGATIVE_PROMPT = "deformed, extra limbs, blurry, watermark"

CONDITION_INPAINT = "inpaint"
CONDITION_INPAINT_EDGE = "inpaint+edge"

SPLIT_SYSTEM = (
    "You split a fashion photo editing request into its separate editable "
    "clauses. Reply with exactly one line: the clauses in their original "
    "order, separated by ' | '. Keep each clause's wording. No numbering, "
    "no commentary."
)

CLASSIFY_SYSTEM = (
    "You classify one fashion editing clause. Reply with exactly one line in "
    "the form 'category | source | target'. category is one of Replacement, "
    "Recoloring, Addition, Removal. source is the existing object being "
    "edited, or '-'. target is the desired object or appearance, or '-'. "
    "Removal has no target. Addition has no source. Recoloring's target is "
    "the color or appearance only. No extra words."
)

SUMMARIZE_SYSTEM = (
    "You write the positive prompt for an image inpainting model editing a "
    "fashion photo. Reply with exactly one line: a comma-separated visual "
    "description. No quotes, no commentary."
)

_STOPWORDS = frozenset(
    "a an the of to with in on for and or my his her their this that these those".split()
)

# Garments whose plural form is the garment (never singularized).
_PLURAL_ONLY = frozenset(
    "pants jeans shorts leggings trousers tights overalls glasses sunglasses "
    "spectacles socks clothes".split()
)

_COLOR_WORDS = frozenset(
    "red blue green black white yellow pink purple orange brown gray grey "
    "beige navy teal maroon cyan magenta gold golden silver khaki olive "
    "crimson scarlet turquoise lavender violet indigo ivory cream tan "
    "burgundy mint coral peach mustard charcoal denim dark light bright "
    "pale deep pastel neon vivid colorful striped plaid checkered floral "
    "polka-dot patterned".split()
)


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class EditRequest:
    text: str
    image_ref: str

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ParameterError("an edit request needs non-empty text")
        if not self.image_ref:
            raise ParameterError("an edit request needs an image reference")


@dataclass(frozen=True)
class EditTask:
    """One executable edit: category plus source/target descriptions."""

    category: str
    source_desc: str | None
    target_desc: str | None
    raw_text: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ClassificationError(self.raw_text, f"unknown category {self.category!r}")
        has_source = bool(self.source_desc and self.source_desc.strip())
        has_target = bool(self.target_desc and self.target_desc.strip())
        requirement = {
            CATEGORY_REMOVAL: (True, False),
            CATEGORY_ADDITION: (False, True),
            CATEGORY_REPLACEMENT: (True, True),
            CATEGORY_RECOLORING: (True, True),
        }[self.category]
        if (has_source, has_target) != requirement:
            raise ClassificationError(
                self.raw_text,
                f"{self.category} requires source={'present' if requirement[0] else 'absent'} "
                f"and target={'present' if requirement[1] else 'absent'}",
            )

    def to_json(self) -> dict:
        return {
            "category": self.category,
            "sourceDesc": self.source_desc,
            "targetDesc": self.target_desc,
            "rawText": self.raw_text,
        }


@dataclass(frozen=True)
class GenerationPrompt:
    text: str
    negative_text: str = NEGATIVE_PROMPT
    source_details: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ParameterError("a generation prompt needs non-empty text")

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "negativeText": self.negative_text,
            "sourceDetails": [list(pair) for pair in self.source_details],
        }


@dataclass(frozen=True)
class GenerationJob:
    """One guided-generation call, fully specified and replayable."""

    image_ref: str
    mask: BinaryMask
    prompt: GenerationPrompt
    condition: str
    category: str
    edge_ref: str | None = None
    seed: int = 0
    strength: float = 0.75
    guidance_scale: float = 7.5

    def __post_init__(self):
        if self.condition not in (CONDITION_INPAINT, CONDITION_INPAINT_EDGE):
            raise ParameterError(f"unknown condition {self.condition!r}")
        if (self.condition == CONDITION_INPAINT_EDGE) != (self.category == CATEGORY_RECOLORING):
            raise ParameterError(
                "the edge-conditioned pipeline is used for recoloring, and only for it"
            )
        if (self.condition == CONDITION_INPAINT_EDGE) != bool(self.edge_ref):
            raise ParameterError("edge conditioning and the edge-map reference go together")
        if self.mask.is_empty():
            raise ParameterError("a generation job needs a non-empty mask")


@dataclass(frozen=True)
class PlannerConfig:
    use_llm: bool = True
    seed: int | None = None
    strength: float = 0.75
    guidance_scale: float = 7.5
    negative_prompt: str = NEGATIVE_PROMPT
    automask: AutomaskConfig = field(default_factory=AutomaskConfig)


# ---------------------------------------------------------------------------
# Requirement splitting


def splitting_messages(text: str) -> list[dict]:
    return [
        {"role": "system", "content": SPLIT_SYSTEM},
        {"role": "user", "content": text},
    ]


class _FormatError(EngineError):
    """A language-model answer violated the constrained output format."""


def _parse_split_answer(answer: str) -> list[str]:
    line = answer.strip()
    if not line or "\n" in line:
        raise _FormatError(f"splitter answer is not a single line: {answer!r}")
    clauses = [c.strip() for c in line.split("|")]
    if not clauses or any(not c for c in clauses) or len(clauses) > 12:
        raise _FormatError(f"splitter answer has empty or too many clauses: {answer!r}")
    return clauses


def split_requirements_llm(text: str, chat: Callable) -> list[str]:
    """Backend-driven splitting; raises on failure instead of falling back."""
    if not text or not text.strip():
        raise ParameterError("cannot split an empty requirement")
    last_error: Exception | None = None
    for _ in range(2):  # one retry on a malformed answer
        answer = chat(splitting_messages(text))
        try:
            return _parse_split_answer(answer)
        except _FormatError as exc:
            last_error = exc
    raise last_error


_CLAUSE_VERBS = (
    "remove|delete|erase|take off|get rid of|add|wear|put on|give|attach|"
    "replace|swap|substitute|change|turn|convert|switch|make|recolor|"
    "recolour|dye|repaint|paint|color|colour"
)
_LEADING_FILLER = re.compile(r"^(?:please|also|then|now|and|next|finally)\s+", re.IGNORECASE)
_SEGMENT_SPLIT = re.compile(r"(;|,|\band\b)", re.IGNORECASE)
_VERB_START = re.compile(rf"^(?:{_CLAUSE_VERBS})\b", re.IGNORECASE)


def _strip_filler(segment: str) -> str:
    stripped = segment.strip()
    while True:
        reduced = _LEADING_FILLER.sub("", stripped)
        if reduced == stripped:
            return stripped
        stripped = reduced


def split_requirements_fallback(text: str) -> list[str]:
    """Deterministic conjunction splitting: new clause at each verb phrase."""
    if not text or not text.strip():
        raise ParameterError("cannot split an empty requirement")
    normalized = " ".join(text.strip().split()).rstrip(".!?")
    parts = _SEGMENT_SPLIT.split(normalized)
    clauses: list[str] = []
    first = _strip_filler(parts[0])
    if first:
        clauses.append(first)
    for i in range(1, len(parts) - 1, 2):
        separator, segment = parts[i].strip(), parts[i + 1].strip()
        if not segment:
            continue
        lead = _strip_filler(segment)
        if not clauses or (_VERB_START.match(lead) and lead):
            clauses.append(lead)
        elif separator in (";", ","):
            # Continuation of the previous clause ("…with a t-shirt, black
            # sneakers"), not a new edit: rebuild it verbatim.
            clauses[-1] = f"{clauses[-1]}{separator} {segment}"
        else:
            clauses[-1] = f"{clauses[-1]} {separator} {segment}"
    return clauses if clauses else [normalized]


def split_requirements(text: str, splitter: Callable | None) -> list[str]:
    """Split a requirement into ordered clauses, degrading deterministically."""
    if splitter is None:
        return split_requirements_fallback(text)
    try:
        return split_requirements_llm(text, splitter)
    except (_FormatError, BackendError, ProtocolError) as exc:
        log.warning("requirement splitter degraded to deterministic mode: %s", exc)
        return split_requirements_fallback(text)


# ---------------------------------------------------------------------------
# Task classification


def classification_messages(clause: str) -> list[dict]:
    return [
        {"role": "system", "content": CLASSIFY_SYSTEM},
        {"role": "user", "content": clause},
    ]


def _clean_phrase(phrase: str) -> str:
    words = [w for w in re.sub(r"[^\w\s'-]", " ", phrase.lower()).split() if w]
    while words and words[0] in _STOPWORDS:
        words = words[1:]
    if not words:
        return ""
    last = words[-1]
    if last.endswith("s") and len(last) > 3 and last not in _PLURAL_ONLY and not last.endswith("ss"):
        words[-1] = last[:-1]
    return " ".join(words)


def _content_tokens(text: str) -> set[str]:
    return {w for w in re.findall(r"[\w'-]+", text.lower()) if w not in _STOPWORDS}


def recolor_target(appearance: str, source_desc: str) -> str:
    """Normalize a recolor target to '{appearance} {object}'.

    The generation prompt must name the recolored object, so a bare color
    ("red") is suffixed with the source object; an answer that already names
    it ("red pants") is kept as-is.
    """
    appearance = " ".join(appearance.split())
    if _content_tokens(source_desc) <= _content_tokens(appearance):
        return appearance
    return f"{appearance} {source_desc}"


def _color_suffix(phrase: str) -> tuple[str, str] | None:
    """Split 'the t-shirt bright blue' into ('the t-shirt', 'bright blue')."""
    words = phrase.split()
    split_at = len(words)
    while split_at > 0 and (
        words[split_at - 1] in _COLOR_WORDS or words[split_at - 1].endswith("-colored")
    ):
        split_at -= 1
    if split_at == len(words) or split_at == 0:
        return None
    return " ".join(words[:split_at]), " ".join(words[split_at:])


_LEAD = (
    r"(?:please\s+|could you\s+|can you\s+|kindly\s+|now\s+|then\s+|also\s+"
    r"|i want to\s+|i'd like to\s+|i would like to\s+|let's\s+)*"
)
_RE_REMOVAL = re.compile(
    rf"^{_LEAD}(?:remove|delete|erase|take off|get rid of)\s+(?P<obj>.+)$", re.IGNORECASE
)
_RE_RECOLOR_OF = re.compile(
    rf"^{_LEAD}(?:change|alter)\s+the\s+colou?r\s+of\s+(?P<obj>.+?)\s+(?:to|into)\s+(?P<col>.+)$",
    re.IGNORECASE,
)
_RE_RECOLOR_POSSESSIVE = re.compile(
    rf"^{_LEAD}(?:change|alter)\s+(?P<obj>.+?)'s\s+colou?r\s+to\s+(?P<col>.+)$", re.IGNORECASE
)
_RE_RECOLOR_VERB = re.compile(
    rf"^{_LEAD}(?:recolou?r|dye|repaint|paint|colou?r)\s+(?P<rest>.+)$", re.IGNORECASE
)
_RE_REPLACE = re.compile(
    rf"^{_LEAD}(?:replace|swap|substitute)\s+(?P<obj>.+?)\s+(?:with|for|by)\s+(?P<tgt>.+)$",
    re.IGNORECASE,
)
_RE_CHANGE_TO = re.compile(
    rf"^{_LEAD}(?:change|turn|convert|switch)\s+(?P<obj>.+?)\s+(?:into|to|with)\s+(?P<tgt>.+)$",
    re.IGNORECASE,
)
_RE_MAKE_COLOR = re.compile(rf"^{_LEAD}(?:make|turn)\s+(?P<rest>.+)$", re.IGNORECASE)
_RE_ADDITION = re.compile(
    rf"^{_LEAD}(?:add|wear|put on|give (?:her|him|them)|attach|include)\s+(?P<tgt>.+)$",
    re.IGNORECASE,
)


def classify_task_fallback(clause: str) -> EditTask:
    """Keyword classification; raises ClassificationError when nothing fits."""
    if not clause or not clause.strip():
        raise ParameterError("cannot classify an empty clause")
    text = " ".join(clause.strip().split()).rstrip(".!?")

    match = _RE_REMOVAL.match(text)
    if match:
        source = _clean_phrase(match.group("obj"))
        if source:
            return EditTask(CATEGORY_REMOVAL, source, None, clause)

    match = _RE_RECOLOR_OF.match(text) or _RE_RECOLOR_POSSESSIVE.match(text)
    if match:
        source = _clean_phrase(match.group("obj"))
        appearance = _clean_phrase(match.group("col"))
        if source and appearance:
            return EditTask(
                CATEGORY_RECOLORING, source, recolor_target(appearance, source), clause
            )

    match = _RE_RECOLOR_VERB.match(text)
    if match:
        split = _color_suffix(match.group("rest"))
        if split:
            obj, color = split
            source = _clean_phrase(re.sub(r"\s+(?:to|in|into)$", "", obj, flags=re.IGNORECASE))
            if source:
                return EditTask(
                    CATEGORY_RECOLORING, source, recolor_target(color, source), clause
                )

    match = _RE_REPLACE.match(text)
    if match:
        source = _clean_phrase(match.group("obj"))
        target = _clean_phrase(match.group("tgt"))
        if source and target:
            return EditTask(CATEGORY_REPLACEMENT, source, target, clause)

    match = _RE_CHANGE_TO.match(text)
    if match:
        source = _clean_phrase(match.group("obj"))
        target_raw = match.group("tgt")
        target = _clean_phrase(target_raw)
        if source and target:
            target_words = set(target.split())
            if target_words and target_words <= _COLOR_WORDS:
                # "change the pants to red": a pure color phrase is a recolor.
                return EditTask(
                    CATEGORY_RECOLORING, source, recolor_target(target, source), clause
                )
            return EditTask(CATEGORY_REPLACEMENT, source, target, clause)

    match = _RE_MAKE_COLOR.match(text)
    if match:
        split = _color_suffix(match.group("rest"))
        if split:
            obj, color = split
            source = _clean_phrase(obj)
            if source and source not in ("it", "them"):
                return EditTask(
                    CATEGORY_RECOLORING, source, recolor_target(color, source), clause
                )

    match = _RE_ADDITION.match(text)
    if match:
        target = _clean_phrase(match.group("tgt"))
        if target:
            return EditTask(CATEGORY_ADDITION, None, target, clause)

    raise ClassificationError(clause)


def _parse_classify_answer(answer: str, clause: str) -> EditTask:
    line = answer.strip()
    if not line or "\n" in line:
        raise _FormatError(f"classifier answer is not a single line: {answer!r}")
    parts = [p.strip() for p in line.split("|")]
    if len(parts) != 3:
        raise _FormatError(f"classifier answer needs 3 fields: {answer!r}")
    category = parts[0].strip().title()
    source = None if parts[1] in ("-", "") else parts[1]
    target = None if parts[2] in ("-", "") else parts[2]
    if category not in CATEGORIES:
        raise _FormatError(f"classifier answer has unknown category: {answer!r}")
    if category == CATEGORY_RECOLORING and source and target:
        target = recolor_target(target, source)
    try:
        return EditTask(category, source, target, clause)
    except ClassificationError as exc:
        # Field presence violated the declared grammar — a format failure,
        # never silently repaired.
        raise _FormatError(str(exc)) from None


def classify_task_llm(clause: str, chat: Callable) -> EditTask:
    """Backend-driven classification; raises on failure instead of falling back."""
    if not clause or not clause.strip():
        raise ParameterError("cannot classify an empty clause")
    last_error: Exception | None = None
    for _ in range(2):  # one retry on a malformed answer
        answer = chat(classification_messages(clause))
        try:
            return _parse_classify_answer(answer, clause)
        except _FormatError as exc:
            last_error = exc
    raise last_error


def classify_task(clause: str, classifier: Callable | None) -> EditTask:
    """Classify one clause, degrading to keyword rules when the model fails."""
    if classifier is None:
        return classify_task_fallback(clause)
    try:
        return classify_task_llm(clause, classifier)
    except (_FormatError, BackendError, ProtocolError) as exc:
        log.warning("task classifier degraded to keyword rules: %s", exc)
        return classify_task_fallback(clause)


# ---------------------------------------------------------------------------
# Prompt standardization


def _vqa_questions(task: EditTask) -> list[str]:
    if task.category == CATEGORY_REMOVAL:
        return [
            f"What is directly around the {task.source_desc} in the photo? "
            "Describe the clothing and background it rests on.",
            "What is the person's skin tone?",
        ]
    if task.category == CATEGORY_ADDITION:
        return ["What is the person wearing overall? Describe colors and style briefly."]
    return [
        f"What does the {task.source_desc} look like? "
        "Describe its color, material, and fit."
    ]


def _strip_tokens(text: str, forbidden: set[str]) -> str:
    kept = [w for w in text.split() if re.sub(r"[^\w'-]", "", w.lower()) not in forbidden]
    return " ".join(kept)


def template_prompt(task: EditTask, details: Sequence[str]) -> str:
    """The deterministic prompt used when no summarizer is available."""
    if task.category == CATEGORY_REMOVAL:
        forbidden = _content_tokens(task.source_desc)
        cleaned = [d for d in (_strip_tokens(d, forbidden) for d in details) if d]
        joined = "; ".join(cleaned)
        return f"a photo of a person, {joined}" if joined else "a photo of a person"
    joined = "; ".join(d for d in details if d)
    base = f"a photo of a person wearing {task.target_desc}"
    return f"{base}, {joined}" if joined else base


def _prompt_is_acceptable(text: str, task: EditTask) -> bool:
    tokens = _content_tokens(text)
    if task.category == CATEGORY_REMOVAL:
        return not (_content_tokens(task.source_desc) & tokens)
    return _content_tokens(task.target_desc) <= tokens


def summarize_messages(task: EditTask, details: Sequence[str]) -> list[dict]:
    joined = "; ".join(details) if details else "none"
    if task.category == CATEGORY_REMOVAL:
        user = (
            f"An object ({task.source_desc}) is being removed from the photo. "
            f"Observed surroundings: {joined}. Describe the region as it should "
            "look after removal, mentioning only the skin, garments, or "
            "background that remain. Never mention the removed object."
        )
    else:
        user = (
            f"Edit category: {task.category}. The edited region must show: "
            f"{task.target_desc}. Observed details: {joined}. Write the prompt; "
            f"it must contain the exact words '{task.target_desc}'."
        )
    return [{"role": "system", "content": SUMMARIZE_SYSTEM}, {"role": "user", "content": user}]


def standardize_prompt(
    image_ref: str,
    task: EditTask,
    vqa: Callable | None,
    summarizer: Callable | None,
    negative_prompt: str = NEGATIVE_PROMPT,
) -> GenerationPrompt:
    """Build the positive prompt from VQA details, by model or by template."""
    details: list[tuple[str, str]] = []
    if vqa is not None:
        for question in _vqa_questions(task):
            try:
                details.append((question, vqa(image_ref, question)))
            except (BackendError, ProtocolError) as exc:
                log.warning("visual question skipped: %s", exc)
    answers = [answer for _, answer in details]

    text: str | None = None
    if summarizer is not None:
        for _ in range(2):  # one retry on an unusable summary
            try:
                candidate = summarizer(summarize_messages(task, answers)).strip()
            except (BackendError, ProtocolError) as exc:
                log.warning("prompt summarizer unavailable: %s", exc)
                break
            if candidate and "\n" not in candidate and _prompt_is_acceptable(candidate, task):
                text = candidate
                break
    if text is None:
        text = template_prompt(task, answers)
    return GenerationPrompt(
        text=text, negative_text=negative_prompt, source_details=tuple(details)
    )


# ---------------------------------------------------------------------------
# Pipeline selection and chained execution


def plan_generation(
    task: EditTask,
    plan: MaskPlan,
    image_ref: str,
    edge_backend: Callable | None,
    prompt: GenerationPrompt,
    config: PlannerConfig | None = None,
) -> GenerationJob:
    """Pick the generation pipeline: edge-conditioned for recoloring only."""
    config = config or PlannerConfig()
    seed = config.seed if config.seed is not None else random.randrange(2**31)
    if task.category == CATEGORY_RECOLORING:
        if edge_backend is None:
            raise PipelineError("recoloring requires an edge backend")
        try:
            edge_ref = edge_backend(image_ref)
        except (BackendError, ProtocolError) as exc:
            raise PipelineError(
                f"recoloring needs an edge map but the edge backend failed: {exc}"
            ) from exc
        condition = CONDITION_INPAINT_EDGE
    else:
        edge_ref = None
        condition = CONDITION_INPAINT
    return GenerationJob(
        image_ref=image_ref,
        mask=plan.mask,
        prompt=prompt,
        condition=condition,
        category=task.category,
        edge_ref=edge_ref,
        seed=seed,
        strength=config.strength,
        guidance_scale=config.guidance_scale,
    )


@dataclass(frozen=True)
class TaskExecution:
    """One executed task with every artifact needed to audit or replay it."""

    index: int  # 1-based position in the plan
    task: EditTask
    mask_plan: MaskPlan
    job: GenerationJob
    input_image_ref: str
    result_image_ref: str
    mask_ref: str
    record: dict


@dataclass(frozen=True)
class ExecutionReport:
    tasks: tuple[EditTask, ...]
    results: tuple[TaskExecution, ...]
    failed_index: int | None = None  # 1-based index of the task that failed
    error: str | None = None
    degraded_planner: bool = False

    @property
    def ok(self) -> bool:
        return self.failed_index is None


def default_coseg_builder(backends) -> Callable[[str], CoSegmentation]:
    """Build a fused semantic map for an image ref via the backends."""

    def build(image_ref: str) -> CoSegmentation:
        parsing = backends.call_human_parsing(image_ref)
        pose = backends.call_pose_parts(image_ref)
        coseg = build_cosegmentation(parsing, pose)
        return derive_applicable(coseg, DerivedSemanticRule.defaults())

    return build


def plan_tasks(text: str, backends, config: PlannerConfig | None = None) -> tuple[list[EditTask], bool]:
    """Split and classify a requirement; returns (tasks, degraded_planner)."""
    config = config or PlannerConfig()
    chat = backends.call_chat if config.use_llm else None
    degraded = False
    if chat is not None:
        try:
            clauses = split_requirements_llm(text, chat)
        except (_FormatError, BackendError, ProtocolError) as exc:
            log.warning("requirement splitter degraded to deterministic mode: %s", exc)
            clauses = split_requirements_fallback(text)
            degraded = True
    else:
        clauses = split_requirements_fallback(text)
    tasks = []
    for clause in clauses:
        if chat is not None:
            try:
                tasks.append(classify_task_llm(clause, chat))
                continue
            except (_FormatError, BackendError, ProtocolError) as exc:
                log.warning("task classifier degraded to keyword rules: %s", exc)
                degraded = True
        tasks.append(classify_task_fallback(clause))
    return tasks, degraded


def execute_plan(
    request: EditRequest,
    backends,
    config: PlannerConfig | None = None,
    coseg_provider: Callable[[str], CoSegmentation] | None = None,
    occlusion_table: OcclusionRuleTable | None = None,
    on_task_start: Callable[[int, EditTask], None] | None = None,
    on_task_done: Callable[[TaskExecution], None] | None = None,
) -> ExecutionReport:
    """Run a requirement end to end: split, classify, mask, prompt, generate.

    Tasks run strictly in order; task k+1 edits task k's output image. A
    failure halts the chain at its task index — earlier results remain valid
    artifacts, nothing is rolled back.
    """
    config = config or PlannerConfig()
    if not backends.store.has(request.image_ref):
        raise ParameterError(f"image {request.image_ref[:12]}… is not in the store")
    coseg_provider = coseg_provider or default_coseg_builder(backends)

    tasks, degraded = plan_tasks(request.text, backends, config)
    if not tasks:
        raise ParameterError("the requirement produced no executable tasks")

    vqa = backends.call_vqa
    summarizer = backends.call_chat if config.use_llm else None
    results: list[TaskExecution] = []
    current_ref = request.image_ref
    for index, task in enumerate(tasks, start=1):
        if on_task_start is not None:
            on_task_start(index, task)
        started = time.monotonic()
        try:
            coseg = coseg_provider(current_ref)
            plan = generate_mask(
                current_ref, task, coseg, backends,
                config=config.automask, occlusion_table=occlusion_table,
            )
            prompt = standardize_prompt(
                current_ref, task, vqa, summarizer, negative_prompt=config.negative_prompt
            )
            job = plan_generation(
                task, plan, current_ref, backends.call_edge, prompt, config
            )
            result_ref = backends.call_generate(job)
        except EngineError as exc:
            return ExecutionReport(
                tasks=tuple(tasks),
                results=tuple(results),
                failed_index=index,
                error=str(exc),
                degraded_planner=degraded,
            )
        mask_ref = backends.store.put(mask_to_png(plan.mask, bit_depth=1), "image/png")
        record = {
            "taskIndex": index,
            "task": task.to_json(),
            "inputImageRef": current_ref,
            "resultImageRef": result_ref,
            "maskRef": mask_ref,
            "maskPlan": plan.to_json(),
            "prompt": prompt.to_json(),
            "condition": job.condition,
            "edgeRef": job.edge_ref,
            "seed": job.seed,
            "strength": job.strength,
            "guidanceScale": job.guidance_scale,
            "latencyMs": round((time.monotonic() - started) * 1000.0, 3),
        }
        execution = TaskExecution(
            index=index,
            task=task,
            mask_plan=plan,
            job=job,
            input_image_ref=current_ref,
            result_image_ref=result_ref,
            mask_ref=mask_ref,
            record=record,
        )
        results.append(execution)
        if on_task_done is not None:
            on_task_done(execution)
        current_ref = result_ref
    return ExecutionReport(
        tasks=tuple(tasks), results=tuple(results), degraded_planner=degraded
    )
