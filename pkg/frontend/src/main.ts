/** Application wiring: one session, one event stream, one render loop.
 *
 * The only client-side state that survives a reload is the session id in
 * the URL hash; everything else is rebuilt from the API. Live updates come
 * from the event stream; if the stream stays dead after retries, the app
 * degrades to polling the transcript endpoint, which converges on the same
 * final view.
 */

import { createClient, openEventStream, ApiError } from "./api";
import type { ApiClient, EventStreamHandle, EventStreamSource } from "./api";
import { applyEvent, emptyView, viewFromTranscript } from "./state";
import type { SessionView } from "./state";
import { compositeMask, diffHighlight } from "./overlay";
import { initialUiState, renderApp } from "./render";
import type { OverlayKind, RenderHandlers, UiState } from "./render";
import type { JobRecord, SessionEvent } from "./types";

const POLL_INTERVAL_MS = 2000;

interface Pixels {
  data: Uint8ClampedArray;
  width: number;
  height: number;
}

async function loadPixels(url: string): Promise<Pixels> {
  const img = new Image();
  img.src = url;
  await img.decode();
  const canvas = document.createElement("canvas");
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const context = canvas.getContext("2d");
  if (!context) throw new Error("canvas 2d context unavailable");
  context.drawImage(img, 0, 0);
  const data = context.getImageData(0, 0, canvas.width, canvas.height);
  return { data: data.data, width: canvas.width, height: canvas.height };
}

function paint(canvas: HTMLCanvasElement, pixels: Uint8ClampedArray, width: number, height: number): void {
  canvas.width = width;
  canvas.height = height;
  const context = canvas.getContext("2d");
  if (!context) return;
  const backing = new Uint8ClampedArray(pixels); // ImageData requires a plain ArrayBuffer backing
  context.putImageData(new ImageData(backing, width, height), 0, 0);
}

export interface AppOptions {
  root: HTMLElement;
  client?: ApiClient;
  sessionIdFromLocation?: () => string | null;
  storeSessionId?: (id: string) => void;
  eventSourceFactory?: (url: string) => EventStreamSource;
  pollIntervalMs?: number;
}

export interface AppHandle {
  stop(): void;
}

function hashSessionId(): string | null {
  const match = /^#s=([A-Za-z0-9-]+)$/.exec(window.location.hash);
  return match?.[1] ?? null;
}

export async function startApp(options: AppOptions): Promise<AppHandle> {
  const client = options.client ?? createClient();
  const readSessionId = options.sessionIdFromLocation ?? hashSessionId;
  const storeSessionId =
    options.storeSessionId ??
    ((id: string) => {
      window.location.hash = `s=${id}`;
    });

  let sessionId = readSessionId();
  if (sessionId) {
    try {
      await client.transcript(sessionId);
    } catch {
      sessionId = null;
    }
  }
  if (!sessionId) {
    const created = await client.createSession();
    sessionId = created.sessionId;
    storeSessionId(sessionId);
  }

  let view: SessionView = emptyView();
  const ui: UiState = initialUiState();
  let lastSeq = -1;
  let stream: EventStreamHandle | null = null;
  let pollTimer: ReturnType<typeof setInterval> | null = null;
  let stopped = false;

  const handlers: RenderHandlers = {
    artifactUrl: (ref) => client.artifactUrl(ref),
    onSend(text) {
      ui.pendingUserText = text;
      ui.busy = true;
      render();
      client
        .sendMessage(sessionId as string, text)
        .then((response) => {
          ui.busy = false;
          if (ui.streamStatus === "polling") {
            // The response body carries only the reply turns; the poll pulls
            // the authoritative full transcript.
            view = { ...view, state: response.state, currentImageRef: response.currentImageRef };
            void refreshFromTranscript();
          }
          render();
        })
        .catch((error: unknown) => {
          ui.busy = false;
          ui.pendingUserText = null;
          ui.errorNotes = [...ui.errorNotes, describeError(error)];
          render();
        });
    },
    onUpload(file) {
      ui.busy = true;
      render();
      client
        .uploadImage(sessionId as string, file)
        .then(() => {
          ui.busy = false;
          if (ui.streamStatus === "polling") void refreshFromTranscript();
          render();
        })
        .catch((error: unknown) => {
          ui.busy = false;
          ui.errorNotes = [...ui.errorNotes, describeError(error)];
          render();
        });
    },
    onToggleOverlay(taskIndex: number, kind: OverlayKind) {
      ui.overlays = { ...ui.overlays, [taskIndex]: kind };
      render();
    },
    drawOverlay(canvas: HTMLCanvasElement, kind: "mask" | "diff", job: JobRecord) {
      void drawOverlayPixels(canvas, kind, job);
    },
  };

  async function drawOverlayPixels(
    canvas: HTMLCanvasElement,
    kind: "mask" | "diff",
    job: JobRecord,
  ): Promise<void> {
    try {
      if (kind === "mask") {
        const [base, mask] = await Promise.all([
          loadPixels(client.artifactUrl(job.inputImageRef)),
          loadPixels(client.artifactUrl(job.maskRef)),
        ]);
        paint(canvas, compositeMask(base.data, mask.data), base.width, base.height);
      } else {
        const [before, after] = await Promise.all([
          loadPixels(client.artifactUrl(job.inputImageRef)),
          loadPixels(client.artifactUrl(job.resultImageRef)),
        ]);
        paint(canvas, diffHighlight(before.data, after.data), after.width, after.height);
      }
    } catch {
      /* artifact failed to load; the canvas stays blank and the toggle stays honest */
    }
  }

  function describeError(error: unknown): string {
    if (error instanceof ApiError) return `Request failed: ${error.message}`;
    return `Request failed: ${String(error)}`;
  }

  function render(): void {
    if (!stopped) renderApp(options.root, view, ui, handlers);
  }

  function onEvent(event: SessionEvent): void {
    if (event.seq <= lastSeq) return;
    lastSeq = event.seq;
    view = applyEvent(view, event);
    if (event.type === "user-message") ui.pendingUserText = null;
    render();
  }

  async function refreshFromTranscript(): Promise<void> {
    try {
      const snapshot = await client.transcript(sessionId as string);
      view = viewFromTranscript(snapshot, view);
      ui.pendingUserText = null;
      render();
    } catch {
      /* transient poll failure; the next tick retries */
    }
  }

  function startPolling(): void {
    ui.streamStatus = "polling";
    render();
    void refreshFromTranscript();
    pollTimer = setInterval(() => void refreshFromTranscript(), options.pollIntervalMs ?? POLL_INTERVAL_MS);
  }

  render();
  stream = openEventStream({
    url: client.eventsUrl(sessionId),
    onEvent,
    onFallback: startPolling,
    ...(options.eventSourceFactory ? { sourceFactory: options.eventSourceFactory } : {}),
  });

  return {
    stop() {
      stopped = true;
      stream?.close();
      if (pollTimer !== null) clearInterval(pollTimer);
    },
  };
}

declare global {
  interface Window {
    __modisteApp?: Promise<AppHandle>;
  }
}

if (typeof document !== "undefined") {
  const root = document.getElementById("app");
  if (root) {
    window.__modisteApp = startApp({ root });
  }
}
