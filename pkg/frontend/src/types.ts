// Shapes of the daemon's HTTP payloads and stream messages (docs/API.md).

export type SafetyStage =
  | "Disconnected"
  | "Idle"
  | "Running"
  | "SafetyPaused"
  | "Faulted";

export type SafetyCause =
  | "None"
  | "HandOff"
  | "HeartbeatTimeout"
  | "CrcBurst"
  | "OperatorStop";

export interface TelemetryBody {
  seq: number;
  timestamp_us: number;
  encoder_arm: number;
  encoder_motor: number;
  trigger_pressed: boolean;
  hand_present: boolean;
  torque_actual_cnm: number;
}

export interface CursorBody {
  x: number;
  y: number;
  inside_workspace: boolean;
}

export interface PointerBody {
  kind: "Press" | "Release";
  x: number | null;
  y: number | null;
}

export interface SafetyBody {
  state: SafetyStage;
  cause: SafetyCause;
  message?: string;
}

export interface SessionBody {
  event: "started" | "set_torque" | "open_game" | "notify" | "ended";
  session_id?: string;
  torque_nm?: number;
  game_id?: string;
  url?: string | null;
  message?: string;
  reason?: string;
  record?: unknown;
}

export type StreamMessage =
  | { type: "telemetry"; t_us: number; body: TelemetryBody }
  | { type: "cursor"; t_us: number; body: CursorBody }
  | { type: "pointer"; t_us: number; body: PointerBody }
  | { type: "safety"; t_us: number; body: SafetyBody }
  | { type: "session"; t_us: number; body: SessionBody };

export interface PortInfo {
  name: string;
  descriptor: string;
}

export interface SessionStatus {
  session_id: string;
  subject_id: string;
  active: boolean;
  paused: boolean;
  end_reason: string | null;
  active_time_s: number;
  block_index?: number;
  block_count?: number;
  game_id?: string;
  torque_nm?: number;
  levels_passed?: number;
  levels_to_advance?: number;
}

export interface DaemonStatus {
  link: string | null;
  link_status: "Closed" | "Open" | "Errored";
  link_error: string;
  safety: SafetyStage;
  safety_cause: SafetyCause;
  hand_present: boolean;
  torque_nm: number;
  session: SessionStatus | null;
  stream_clients: number;
  last_frame_age_ms: number | null;
  stats: Record<string, number>;
  games: string[];
  game_urls: Record<string, string>;
}

export interface CalibrationInfo {
  mode: string;
  ticks_min: number;
  ticks_max: number;
  sweeping: boolean;
  [key: string]: unknown;
}

export interface CategorySummary {
  name: string;
  question_count: number;
  counts: number[];
  percents: Record<string, number>;
}

export interface SurveySummary {
  categories: CategorySummary[];
}

export interface Questionnaire {
  categories: { name: string; questions: string[] }[];
}
