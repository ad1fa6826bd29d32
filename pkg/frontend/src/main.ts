// DOM wiring: config form, stimulus display, response buttons, estimate panel.
//
// Operator modes: (a) a human (or operator relaying a patient's answer)
// clicks Correct/Incorrect; (b) a simulated patient answers automatically.
// Configuration comes from the form plus URL query parameters
// (?server=...&calibration=...).

import { ApiClient } from "./api.js";
import { drawVaCurve } from "./chart.js";
import { Lcg, SimulatedPatient } from "./patient.js";
import { driveSimulatedPatient, SessionController } from "./session.js";
import { clampToViewport } from "./stimulus.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setup(): void {
  const params = new URLSearchParams(window.location.search);
  const serverInput = el<HTMLInputElement>("server");
  serverInput.value = params.get("server") ?? "http://127.0.0.1:8000";
  const calibrationInput = el<HTMLInputElement>("calibration");
  calibrationInput.value = params.get("calibration") ?? "40";

  const banner = el<HTMLDivElement>("banner");
  const letterBox = el<HTMLDivElement>("letter");
  const trialInfo = el<HTMLSpanElement>("trial-info");
  const estimateInfo = el<HTMLSpanElement>("estimate-info");
  const chart = el<HTMLCanvasElement>("chart");
  const correctBtn = el<HTMLButtonElement>("correct");
  const incorrectBtn = el<HTMLButtonElement>("incorrect");
  const startBtn = el<HTMLButtonElement>("start");
  const autoBtn = el<HTMLButtonElement>("auto");

  let controller: SessionController | null = null;

  function render(): void {
    if (!controller) return;
    const view = controller.state;
    banner.textContent = view.lastError ?? "";
    banner.style.display = view.lastError ? "block" : "none";

    const answerable = view.phase === "awaiting-response";
    correctBtn.disabled = !answerable;
    incorrectBtn.disabled = !answerable;

    if (view.trial && !view.trial.done && view.trial.stimulus) {
      const size = clampToViewport(view.trial.stimulus.size_px, 360);
      letterBox.textContent = view.trial.stimulus.letter;
      letterBox.style.fontSize = `${size}px`;
      trialInfo.textContent =
        `trial ${view.trial.iteration + 1} - letter size s = ${view.trial.s!.toFixed(3)}, ` +
        `correction [S, C] = [${view.trial.x![0].toFixed(2)}, ${view.trial.x![1].toFixed(2)}]`;
    } else if (view.phase === "done") {
      letterBox.textContent = "✓";
      letterBox.style.fontSize = "48px";
      trialInfo.textContent = "session complete";
    }

    if (view.estimate) {
      const [sphere, cylinder] = view.estimate.x_hat;
      const curve = view.estimate.va_curve;
      const last = curve.length ? curve[curve.length - 1].va : NaN;
      estimateInfo.textContent =
        `best correction ≈ [${sphere.toFixed(3)}, ${cylinder.toFixed(3)}] δ, ` +
        `estimated VA ${Number.isFinite(last) ? last.toFixed(3) : "?"} logMAR ` +
        `after ${view.responsesSent} responses`;
      drawVaCurve(chart, curve);
    }
  }

  async function start(): Promise<void> {
    const calibration = Number(calibrationInput.value);
    if (!(calibration > 0)) {
      banner.textContent = "calibration must be a positive pixel scale";
      banner.style.display = "block";
      return;
    }
    const api = new ApiClient(serverInput.value);
    controller = new SessionController(api);
    controller.onChange(render);
    try {
      await controller.start({
        rule: el<HTMLSelectElement>("rule").value,
        iterations: Number(el<HTMLInputElement>("iterations").value),
        seed: Number(el<HTMLInputElement>("seed").value),
        slope: Number(el<HTMLInputElement>("slope").value),
        calibration,
      });
    } catch {
      banner.textContent = "server unreachable - check the URL and retry";
      banner.style.display = "block";
    }
  }

  startBtn.addEventListener("click", () => void start());
  correctBtn.addEventListener("click", () => void controller?.record(true));
  incorrectBtn.addEventListener("click", () => void controller?.record(false));
  autoBtn.addEventListener("click", () => {
    if (!controller) return;
    const seed = Number(el<HTMLInputElement>("seed").value);
    const slope = Number(el<HTMLInputElement>("slope").value);
    const rng = new Lcg(seed + 7919);
    const truth = new Lcg(seed + 104729);
    const patient = new SimulatedPatient(
      truth.next() * 4 - 2,
      truth.next() * 4 - 2,
      slope,
      rng,
    );
    void driveSimulatedPatient(controller, patient);
  });
}

window.addEventListener("DOMContentLoaded", setup);
