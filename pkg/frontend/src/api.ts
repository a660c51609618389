// Thin REST client. Fire-and-forget commands surface their API error
// message so panels can show it inline.

import type {
  CalibrationInfo,
  DaemonStatus,
  PortInfo,
  Questionnaire,
  SurveySummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.base + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await resp.text();
    const payload = text ? JSON.parse(text) : {};
    if (!resp.ok) {
      throw new ApiError(resp.status, payload.error ?? "error", payload.message ?? text);
    }
    return payload as T;
  }

  ports(): Promise<{ ports: PortInfo[] }> {
    return this.request("GET", "/api/ports");
  }

  status(): Promise<DaemonStatus> {
    return this.request("GET", "/api/status");
  }

  connect(port: string, scenario?: string): Promise<DaemonStatus> {
    const body: Record<string, unknown> = { port };
    if (scenario) body.scenario = scenario;
    return this.request("POST", "/api/connect", body);
  }

  disconnect(): Promise<DaemonStatus> {
    return this.request("POST", "/api/disconnect", {});
  }

  startSession(subjectId: string): Promise<{ session_id: string }> {
    return this.request("POST", "/api/session", { subject_id: subjectId });
  }

  stopSession(): Promise<{ record: unknown }> {
    return this.request("POST", "/api/session/stop", {});
  }

  levelPassed(source: "UIManual" | "GameHook" = "UIManual"): Promise<unknown> {
    return this.request("POST", "/api/session/level-passed", { source });
  }

  setTorque(nm: number): Promise<unknown> {
    return this.request("POST", "/api/torque", { nm });
  }

  calibration(): Promise<CalibrationInfo> {
    return this.request("GET", "/api/calibration");
  }

  calibrationAction(action: "start" | "commit" | "cancel" | "reload"): Promise<unknown> {
    return this.request("POST", "/api/calibration", { action });
  }

  questionnaire(): Promise<Questionnaire> {
    return this.request("GET", "/api/survey/questionnaire");
  }

  submitSurvey(subjectId: string, answers: Record<string, string>): Promise<unknown> {
    return this.request("POST", "/api/survey/responses", {
      subject_id: subjectId,
      answers,
    });
  }

  surveySummary(): Promise<SurveySummary> {
    return this.request("GET", "/api/survey/summary");
  }
}
