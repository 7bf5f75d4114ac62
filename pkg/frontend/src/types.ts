/** Shapes served by the session HTTP API. Field names mirror the wire exactly. */

export interface Turn {
  role: "user" | "assistant";
  text: string;
  imageRef: string | null;
}

export interface MaskPlanInfo {
  category: string;
  provenance: string;
  dilationRadius: number;
  occludedLabels: string[];
}

export interface TaskInfo {
  category: string;
  sourceDesc: string | null;
  targetDesc: string | null;
  rawText: string;
}

export interface PromptInfo {
  text: string;
  negativeText: string;
  sourceDetails: [string, string][];
}

export interface JobRecord {
  taskIndex: number;
  task: TaskInfo;
  inputImageRef: string;
  resultImageRef: string;
  maskRef: string;
  maskPlan: MaskPlanInfo;
  prompt: PromptInfo;
  condition: string;
  edgeRef: string | null;
  seed: number;
  strength: number;
  guidanceScale: number;
  latencyMs: number;
}

export interface SessionEvent {
  seq: number;
  type: string;
  sessionId?: string;
  state?: string;
  taskIndex?: number;
  text?: string;
  imageRef?: string | null;
  ref?: string;
  width?: number;
  height?: number;
  record?: JobRecord;
  tasks?: TaskInfo[];
  failedIndex?: number;
  error?: string;
}

export interface TranscriptSnapshot {
  sessionId: string;
  state: string;
  taskIndex: number | null;
  currentImageRef: string | null;
  turns: Turn[];
}

export interface CreateSessionResponse {
  sessionId: string;
  state: string;
}

export interface AttachImageResponse {
  ref: string;
  width: number;
  height: number;
  state: string;
}

export interface MessageResponse {
  turns: Turn[];
  state: string;
  currentImageRef: string | null;
}
