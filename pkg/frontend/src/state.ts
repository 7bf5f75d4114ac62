/** Pure session-view state: a fold over the event stream.
 *
 * The fold mirrors the server's own replay semantics so a view rebuilt from
 * events is byte-identical (per turn) to GET /transcript — the parity the
 * tests pin. Nothing here touches the DOM or the network.
 */

import type { JobRecord, SessionEvent, TaskInfo, TranscriptSnapshot, Turn } from "./types";

export const STABLE_STATES = ["AwaitingImage", "Ready", "Review"] as const;

export interface SessionView {
  state: string;
  taskIndex: number | null;
  currentImageRef: string | null;
  turns: Turn[];
  jobs: JobRecord[];
  plannedTasks: TaskInfo[];
  lastError: string | null;
}

export function emptyView(): SessionView {
  return {
    state: "AwaitingImage",
    taskIndex: null,
    currentImageRef: null,
    turns: [],
    jobs: [],
    plannedTasks: [],
    lastError: null,
  };
}

/** Apply one event, returning a new view; the input view is not mutated. */
export function applyEvent(view: SessionView, event: SessionEvent): SessionView {
  const next: SessionView = { ...view, turns: [...view.turns], jobs: [...view.jobs] };
  switch (event.type) {
    case "image-attached":
      next.currentImageRef = event.ref ?? next.currentImageRef;
      break;
    case "user-message":
    case "assistant-message":
      next.turns.push({
        role: event.type === "user-message" ? "user" : "assistant",
        text: event.text ?? "",
        imageRef: event.imageRef ?? null,
      });
      break;
    case "state-changed":
      next.state = event.state ?? next.state;
      next.taskIndex = event.taskIndex ?? null;
      break;
    case "job-executed":
      if (event.record) {
        next.jobs.push(event.record);
        next.currentImageRef = event.record.resultImageRef;
      }
      break;
    case "plan-created":
      next.plannedTasks = event.tasks ?? [];
      break;
    case "plan-failed":
      next.lastError = event.error ?? "plan failed";
      break;
    default:
      break;
  }
  return next;
}

/** Fold a whole event log. With `normalizeTail` (the default) a log that
 * ends inside a run folds to the nearest stable state, exactly as the
 * server's replay does: Ready when an image exists, AwaitingImage when not.
 * Live rendering passes `false` so transient badges stay visible. */
export function foldEvents(events: SessionEvent[], normalizeTail = true): SessionView {
  let view = emptyView();
  for (const event of events) {
    view = applyEvent(view, event);
  }
  if (normalizeTail && !(STABLE_STATES as readonly string[]).includes(view.state)) {
    view = {
      ...view,
      state: view.currentImageRef ? "Ready" : "AwaitingImage",
      taskIndex: null,
    };
  }
  return view;
}

/** Build a view from a transcript snapshot (the polling fallback when the
 * event stream is unavailable). Job records only travel on the stream, so
 * the overlay panel stays as-is until events resume. */
export function viewFromTranscript(snapshot: TranscriptSnapshot, previous?: SessionView): SessionView {
  return {
    state: snapshot.state,
    taskIndex: snapshot.taskIndex,
    currentImageRef: snapshot.currentImageRef,
    turns: snapshot.turns.map((t) => ({ ...t })),
    jobs: previous ? [...previous.jobs] : [],
    plannedTasks: previous ? [...previous.plannedTasks] : [],
    lastError: previous ? previous.lastError : null,
  };
}

/** Turn-list equality against a server transcript, field by field. */
export function turnsMatchTranscript(view: SessionView, snapshot: TranscriptSnapshot): boolean {
  if (view.turns.length !== snapshot.turns.length) return false;
  return view.turns.every((turn, i) => {
    const other = snapshot.turns[i];
    return (
      other !== undefined &&
      turn.role === other.role &&
      turn.text === other.text &&
      turn.imageRef === other.imageRef
    );
  });
}
