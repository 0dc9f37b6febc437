// Wire types mirrored from the session service, plus the client view model.

export type EventType =
  | "state"
  | "trainer_message"
  | "trainee_message"
  | "tool_call"
  | "tool_response"
  | "vlm_result"
  | "error";

export interface SessionEvent {
  type: EventType;
  seq: number;
  payload: Record<string, any>;
}

export type Connection = "idle" | "connecting" | "live" | "reconnecting" | "error";

export interface ChatMessage {
  seq: number;
  speaker: "trainer" | "trainee";
  text: string;
}

export type ToolRowKind = "call" | "response" | "vlm";

export interface ToolLogRow {
  seq: number;
  kind: ToolRowKind;
  name: string;
  ok: boolean | null; // null for call rows (no outcome yet)
  errorCode: string | null;
  summary: string;
}

export interface AssemblyPanel {
  sessionId: string;
  manualId: string;
  currentStep: number;
  totalSteps: number;
  remainingSteps: number;
  started: boolean;
  finished: boolean;
  exploded: boolean;
  zoom: number;
  rotation: string;
  highlights: string[];
  stepCompleted: boolean[];
  imageRef: string | null;
}

export interface SessionView {
  sessionId: string | null;
  connection: Connection;
  lastSeq: number;
  chat: ChatMessage[];
  pendingEcho: string[]; // optimistic sends awaiting their trainee_message event
  toolLog: ToolLogRow[];
  panel: AssemblyPanel | null;
  errorBanner: string | null;
}

export interface SessionHandle {
  session_id: string;
  manual_id: string;
  chunk_index: number;
  created_at: string;
  last_seq: number;
  state: Record<string, any>;
}

export interface ManualSummary {
  id: string;
  title: string;
  steps: number;
}
