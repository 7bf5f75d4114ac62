/** DOM rendering for the chat view.
 *
 * Rendering is a pure function of (session view, ui state): every call
 * rebuilds the tree from scratch, so there is no DOM state to drift out of
 * sync with the data. Overlay pixels are drawn by an injected callback so
 * the structure can be verified without a real canvas backend.
 */

import type { JobRecord, Turn } from "./types";
import type { SessionView } from "./state";
import { labelColor } from "./overlay";

export type OverlayKind = "none" | "mask" | "diff";

export interface UiState {
  /** The user's own message, echoed optimistically until the server's turn arrives. */
  pendingUserText: string | null;
  /** Client-side failures (rejected API calls), shown as assistant-style error turns. */
  errorNotes: string[];
  /** Per-job overlay toggle; resets to "none" on reload by design. */
  overlays: Record<number, OverlayKind>;
  streamStatus: "live" | "reconnecting" | "polling";
  busy: boolean;
}

export function initialUiState(): UiState {
  return { pendingUserText: null, errorNotes: [], overlays: {}, streamStatus: "live", busy: false };
}

export interface RenderHandlers {
  onSend(text: string): void;
  onUpload(file: File): void;
  onToggleOverlay(taskIndex: number, kind: OverlayKind): void;
  artifactUrl(ref: string): string;
  drawOverlay(canvas: HTMLCanvasElement, kind: "mask" | "diff", job: JobRecord): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function chip(label: string, extraClass = ""): HTMLSpanElement {
  const node = el("span", `chip ${extraClass}`.trim(), label);
  node.style.backgroundColor = labelColor(label);
  return node;
}

function renderTurn(turn: Turn, artifactUrl: (ref: string) => string): HTMLLIElement {
  const item = el("li", `turn ${turn.role}`);
  item.dataset.role = turn.role;
  item.appendChild(el("div", "text", turn.text));
  if (turn.imageRef) {
    const img = el("img", "attachment");
    img.src = artifactUrl(turn.imageRef);
    img.alt = "attached image";
    img.dataset.ref = turn.imageRef;
    item.appendChild(img);
  }
  return item;
}

function renderTranscript(view: SessionView, ui: UiState, handlers: RenderHandlers): HTMLElement {
  const list = el("ol", "transcript");
  list.id = "transcript";
  for (const turn of view.turns) {
    list.appendChild(renderTurn(turn, handlers.artifactUrl));
  }
  if (ui.pendingUserText !== null) {
    const pending = el("li", "turn user pending");
    pending.dataset.role = "user";
    pending.appendChild(el("div", "text", ui.pendingUserText));
    list.appendChild(pending);
  }
  for (const note of ui.errorNotes) {
    const errorTurn = el("li", "turn assistant error");
    errorTurn.dataset.role = "assistant";
    errorTurn.appendChild(el("div", "text", note));
    list.appendChild(errorTurn);
  }
  return list;
}

function renderJob(job: JobRecord, ui: UiState, handlers: RenderHandlers): HTMLElement {
  const card = el("section", "job-card");
  card.dataset.taskIndex = String(job.taskIndex);

  const head = el("header", "job-head");
  head.appendChild(chip(job.task.category, "category"));
  head.appendChild(el("span", "raw-text", job.task.rawText));
  card.appendChild(head);

  const planRow = el("div", "plan-row");
  planRow.appendChild(el("span", "plan-item", `source: ${job.maskPlan.provenance}`));
  planRow.appendChild(el("span", "plan-item", `dilation: ${job.maskPlan.dilationRadius}px`));
  planRow.appendChild(el("span", "plan-item", `condition: ${job.condition}`));
  card.appendChild(planRow);

  if (job.maskPlan.occludedLabels.length > 0) {
    const legend = el("div", "legend");
    legend.appendChild(el("span", "legend-title", "occluders"));
    for (const label of job.maskPlan.occludedLabels) {
      legend.appendChild(chip(label, "legend-chip"));
    }
    card.appendChild(legend);
  }

  const overlayKind = ui.overlays[job.taskIndex] ?? "none";
  const stack = el("figure", "image-stack");
  const result = el("img", "result");
  result.src = handlers.artifactUrl(job.resultImageRef);
  result.alt = `result of task ${job.taskIndex}`;
  result.dataset.ref = job.resultImageRef;
  stack.appendChild(result);
  const canvas = el("canvas", "overlay");
  canvas.dataset.maskRef = job.maskRef;
  canvas.hidden = overlayKind === "none";
  stack.appendChild(canvas);
  card.appendChild(stack);
  if (overlayKind !== "none") {
    handlers.drawOverlay(canvas, overlayKind, job);
  }

  const controls = el("div", "overlay-controls");
  for (const kind of ["mask", "diff"] as const) {
    const button = el("button", `toggle toggle-${kind}`, kind === "mask" ? "Mask" : "Diff");
    button.type = "button";
    button.setAttribute("aria-pressed", overlayKind === kind ? "true" : "false");
    button.addEventListener("click", () =>
      handlers.onToggleOverlay(job.taskIndex, overlayKind === kind ? "none" : kind),
    );
    controls.appendChild(button);
  }
  card.appendChild(controls);

  const stats = el("div", "stats");
  stats.appendChild(el("span", "stat", `seed ${job.seed}`));
  stats.appendChild(el("span", "stat", `strength ${job.strength}`));
  stats.appendChild(el("span", "stat", `guidance ${job.guidanceScale}`));
  stats.appendChild(el("span", "stat", `${job.latencyMs} ms`));
  card.appendChild(stats);

  const prompt = el("details", "prompt");
  prompt.appendChild(el("summary", "", "prompt"));
  prompt.appendChild(el("p", "prompt-text", job.prompt.text));
  if (job.prompt.negativeText) {
    prompt.appendChild(el("p", "prompt-negative", `avoid: ${job.prompt.negativeText}`));
  }
  for (const [attribute, value] of job.prompt.sourceDetails) {
    prompt.appendChild(el("p", "prompt-detail", `${attribute}: ${value}`));
  }
  card.appendChild(prompt);

  return card;
}

function renderComposer(view: SessionView, ui: UiState, handlers: RenderHandlers): HTMLElement {
  const form = el("form", "composer");
  form.id = "composer";

  const fileLabel = el("label", "upload-label", "attach photo");
  const fileInput = el("input", "image-input");
  fileInput.id = "image-input";
  fileInput.type = "file";
  fileInput.accept = "image/png";
  fileInput.addEventListener("change", () => {
    const file = fileInput.files?.[0];
    if (file) handlers.onUpload(file);
    fileInput.value = "";
  });
  fileLabel.appendChild(fileInput);
  form.appendChild(fileLabel);

  const input = el("input", "message-input");
  input.id = "message-input";
  input.type = "text";
  input.placeholder =
    view.state === "AwaitingImage" ? "say hello, or attach a photo to start" : "describe the edit";
  input.disabled = ui.busy;
  form.appendChild(input);

  const send = el("button", "send", "Send");
  send.type = "submit";
  send.disabled = ui.busy;
  form.appendChild(send);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    const text = input.value.trim();
    if (text) handlers.onSend(text);
    input.value = "";
  });
  return form;
}

export function renderApp(
  root: HTMLElement,
  view: SessionView,
  ui: UiState,
  handlers: RenderHandlers,
): void {
  root.textContent = "";

  const header = el("header", "app-header");
  header.appendChild(el("h1", "", "Modiste"));
  const badge = el("span", `badge state-${view.state.toLowerCase()}`);
  badge.id = "state-badge";
  badge.textContent =
    view.taskIndex !== null ? `${view.state} · task ${view.taskIndex}` : view.state;
  header.appendChild(badge);
  const status = el("span", `stream stream-${ui.streamStatus}`, ui.streamStatus);
  status.id = "stream-status";
  header.appendChild(status);
  root.appendChild(header);

  const main = el("main", "columns");

  const chat = el("section", "chat-column");
  chat.appendChild(renderTranscript(view, ui, handlers));
  chat.appendChild(renderComposer(view, ui, handlers));
  main.appendChild(chat);

  const side = el("aside", "jobs-column");
  if (view.currentImageRef) {
    const current = el("figure", "current-image");
    const img = el("img", "current");
    img.src = handlers.artifactUrl(view.currentImageRef);
    img.alt = "current image";
    img.dataset.ref = view.currentImageRef;
    current.appendChild(img);
    current.appendChild(el("figcaption", "", "current image"));
    side.appendChild(current);
  }
  if (view.lastError) {
    side.appendChild(el("div", "plan-error", view.lastError));
  }
  const jobs = el("div", "jobs");
  jobs.id = "jobs";
  for (const job of view.jobs) {
    jobs.appendChild(renderJob(job, ui, handlers));
  }
  side.appendChild(jobs);
  main.appendChild(side);

  root.appendChild(main);
}

/** Read the rendered turn list back out of the DOM (used for parity checks). */
export function renderedTurns(root: HTMLElement): Turn[] {
  const items = root.querySelectorAll<HTMLLIElement>("#transcript .turn:not(.pending):not(.error)");
  return Array.from(items, (item) => {
    const img = item.querySelector<HTMLImageElement>("img.attachment");
    return {
      role: (item.dataset.role ?? "assistant") as Turn["role"],
      text: item.querySelector(".text")?.textContent ?? "",
      imageRef: img?.dataset.ref ?? null,
    };
  });
}
