// Session state machine. One stimulus is answerable at a time; while a
// response is in flight every further record call is ignored, so a double
// click can never produce two POSTs. All displayed numbers come from server
// payloads.

import { ApiClient, Estimate, SessionConfig, Trial } from "./api.js";
import { SimulatedPatient } from "./patient.js";

export type Phase = "idle" | "starting" | "awaiting-response" | "posting" | "done" | "error";

export interface ViewState {
  phase: Phase;
  sessionId: string | null;
  trial: Trial | null;
  estimate: Estimate | null;
  responsesSent: number;
  postsIssued: number;
  lastError: string | null;
}

export type Listener = (view: ViewState) => void;

export class SessionController {
  private view: ViewState = {
    phase: "idle",
    sessionId: null,
    trial: null,
    estimate: null,
    responsesSent: 0,
    postsIssued: 0,
    lastError: null,
  };
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  get state(): ViewState {
    return { ...this.view };
  }

  private update(patch: Partial<ViewState>): void {
    this.view = { ...this.view, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async start(config: SessionConfig): Promise<void> {
    this.update({ phase: "starting", lastError: null });
    try {
      const { id } = await this.api.createSession(config);
      const trial = await this.api.getTrial(id);
      this.update({
        sessionId: id,
        trial,
        phase: trial.done ? "done" : "awaiting-response",
        responsesSent: 0,
        postsIssued: 0,
      });
    } catch (err) {
      this.update({ phase: "error", lastError: String(err) });
      throw err;
    }
  }

  /** Re-fetch the current proposal (e.g. after a page refresh). Idempotent. */
  async refresh(): Promise<void> {
    if (!this.view.sessionId) return;
    const trial = await this.api.getTrial(this.view.sessionId);
    this.update({ trial, phase: trial.done ? "done" : "awaiting-response" });
  }

  /**
   * Record the observer's answer for the stimulus on screen. Calls made
   * while a post is in flight (double clicks) are dropped client-side.
   */
  async record(correct: boolean): Promise<boolean> {
    if (this.view.phase !== "awaiting-response" || !this.view.sessionId || !this.view.trial) {
      return false;
    }
    const { sessionId, trial } = this.view;
    this.update({ phase: "posting" });
    try {
      const next = await this.api.submitResponse(
        sessionId,
        correct ? 1 : 0,
        trial.iteration,
      );
      const estimate = await this.api.getEstimate(sessionId);
      this.update({
        trial: next,
        estimate,
        phase: next.done ? "done" : "awaiting-response",
        responsesSent: this.view.responsesSent + 1,
        postsIssued: this.view.postsIssued + 1,
      });
      return true;
    } catch (err) {
      this.update({ phase: "error", lastError: String(err) });
      return false;
    }
  }

  async close(): Promise<void> {
    if (this.view.sessionId) {
      await this.api.closeSession(this.view.sessionId);
      this.update({ phase: "idle", sessionId: null, trial: null });
    }
  }
}

/**
 * Automated demo driver: answers every trial with a simulated patient until
 * the session completes, then returns the server's final estimate.
 */
export async function driveSimulatedPatient(
  controller: SessionController,
  patient: SimulatedPatient,
  onTrial?: (trial: Trial, c: 0 | 1) => void,
): Promise<Estimate> {
  for (;;) {
    const view = controller.state;
    if (view.phase === "done") break;
    if (view.phase !== "awaiting-response" || !view.trial || view.trial.done) {
      throw new Error(`driver stuck in phase ${view.phase}`);
    }
    const trial = view.trial;
    const c = patient.respond(trial.s!, trial.x!);
    onTrial?.(trial, c);
    const ok = await controller.record(c === 1);
    if (!ok) {
      throw new Error(`response rejected at iteration ${trial.iteration}`);
    }
  }
  const estimate = controller.state.estimate;
  if (!estimate) throw new Error("session finished without an estimate");
  return estimate;
}
