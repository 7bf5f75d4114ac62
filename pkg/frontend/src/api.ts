/** Thin typed client for the session HTTP API.
 *
 * Every mutation goes through the documented endpoints and nothing else;
 * artifacts are addressed by content hash, so their URLs are cacheable
 * forever. The event stream wrapper reconnects with backoff and hands
 * control to a polling fallback when the stream stays dead.
 */

import type {
  AttachImageResponse,
  CreateSessionResponse,
  MessageResponse,
  SessionEvent,
  TranscriptSnapshot,
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function expectJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = `HTTP ${response.status}`;
    try {
      const body = (await response.json()) as { error?: string };
      if (body.error) detail = body.error;
    } catch {
      /* non-JSON error body; keep the status text */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export interface ApiClient {
  createSession(): Promise<CreateSessionResponse>;
  listSessions(): Promise<{ sessions: string[] }>;
  uploadImage(sessionId: string, data: Blob | ArrayBuffer): Promise<AttachImageResponse>;
  sendMessage(sessionId: string, text: string): Promise<MessageResponse>;
  transcript(sessionId: string): Promise<TranscriptSnapshot>;
  artifactUrl(ref: string): string;
  eventsUrl(sessionId: string, replayOnly?: boolean): string;
}

export function createClient(baseUrl = "", fetchFn: FetchLike = fetch.bind(globalThis)): ApiClient {
  const root = baseUrl.replace(/\/+$/, "");
  return {
    async createSession() {
      return expectJson(await fetchFn(`${root}/api/sessions`, { method: "POST" }));
    },
    async listSessions() {
      return expectJson(await fetchFn(`${root}/api/sessions`));
    },
    async uploadImage(sessionId, data) {
      return expectJson(
        await fetchFn(`${root}/api/sessions/${encodeURIComponent(sessionId)}/image`, {
          method: "POST",
          headers: { "Content-Type": "application/octet-stream" },
          body: data,
        }),
      );
    },
    async sendMessage(sessionId, text) {
      return expectJson(
        await fetchFn(`${root}/api/sessions/${encodeURIComponent(sessionId)}/messages`, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body: JSON.stringify({ text }),
        }),
      );
    },
    async transcript(sessionId) {
      return expectJson(
        await fetchFn(`${root}/api/sessions/${encodeURIComponent(sessionId)}/transcript`),
      );
    },
    artifactUrl(ref) {
      return `${root}/api/artifacts/${encodeURIComponent(ref)}`;
    },
    eventsUrl(sessionId, replayOnly = false) {
      const suffix = replayOnly ? "?replay=1" : "";
      return `${root}/api/sessions/${encodeURIComponent(sessionId)}/events${suffix}`;
    },
  };
}

/** Minimal surface of EventSource so tests can inject a fake. */
export interface EventStreamSource {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export interface EventStreamOptions {
  url: string;
  onEvent(event: SessionEvent): void;
  /** Called once the stream has failed `maxRetries + 1` times in a row. */
  onFallback(): void;
  sourceFactory?: (url: string) => EventStreamSource;
  maxRetries?: number;
  retryDelayMs?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export interface EventStreamHandle {
  close(): void;
}

/** Subscribe to the session event stream with reconnect-then-fallback. */
export function openEventStream(options: EventStreamOptions): EventStreamHandle {
  const factory =
    options.sourceFactory ?? ((url: string) => new EventSource(url) as unknown as EventStreamSource);
  const maxRetries = options.maxRetries ?? 3;
  const retryDelayMs = options.retryDelayMs ?? 1000;
  const schedule = options.setTimeoutFn ?? ((fn: () => void, ms: number) => setTimeout(fn, ms));

  let closed = false;
  let failures = 0;
  let source: EventStreamSource | null = null;

  const connect = () => {
    if (closed) return;
    source = factory(options.url);
    source.onmessage = (ev) => {
      failures = 0;
      try {
        options.onEvent(JSON.parse(ev.data) as SessionEvent);
      } catch {
        /* ignore malformed frames; the next replay resyncs */
      }
    };
    source.onerror = () => {
      if (closed) return;
      source?.close();
      source = null;
      failures += 1;
      if (failures > maxRetries) {
        options.onFallback();
        return;
      }
      schedule(connect, retryDelayMs * 2 ** (failures - 1));
    };
  };

  connect();
  return {
    close() {
      closed = true;
      source?.close();
      source = null;
    },
  };
}
