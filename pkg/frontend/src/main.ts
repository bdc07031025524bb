// DOM wiring for the trial console. All session state lives on the service;
// refreshing the page and re-entering the session id resumes at the first
// unanswered trial.

import { ConsoleApi, Grade, JudgmentLabels } from "./api.js";
import { FlowUi, GradeAnswer, runSessionFlow } from "./flow.js";
import { PlaybackUnavailableError, WebAudioPlayer } from "./player.js";

const GRADES: Grade[] = ["lower", "same", "higher"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

class DomUi implements FlowUi {
  private readonly progress = el<HTMLParagraphElement>("progress");
  private readonly phase = el<HTMLParagraphElement>("phase");
  private readonly buttons = Array.from(
    document.querySelectorAll<HTMLButtonElement>("#grades button"),
  );

  constructor(private readonly recordLatency: boolean) {}

  onTrialStart(trialIndex: number, answered: number, total: number): void {
    show("trial-screen");
    this.progress.textContent = `Trial ${answered + 1} of ${total}`;
    this.phase.textContent = "Loading stimuli";
    this.setButtonsEnabled(false);
  }

  onPlaybackPhase(phase: "reference" | "gap" | "test"): void {
    this.phase.textContent = {
      reference: "Playing the reference",
      gap: "…",
      test: "Playing the test stimulus",
    }[phase];
  }

  promptGrade(labels: JudgmentLabels): Promise<GradeAnswer> {
    this.phase.textContent = "Your judgment?";
    const enabledAt = performance.now();
    return new Promise((resolve) => {
      this.buttons.forEach((button, i) => {
        button.textContent = labels[i];
        button.onclick = () => {
          // disable immediately so a double click cannot fire twice
          this.setButtonsEnabled(false);
          const latency = this.recordLatency
            ? Math.round(performance.now() - enabledAt)
            : null;
          resolve({ grade: GRADES[i], latencyMs: latency });
        };
      });
      this.setButtonsEnabled(true);
    });
  }

  async confirmRetry(message: string): Promise<boolean> {
    return window.confirm(`${message}\n\nRetry? (The response was not recorded twice.)`);
  }

  onComplete(answered: number, total: number, logUrl: string, reportUrl: string): void {
    show("summary-screen");
    el<HTMLParagraphElement>("summary-text").textContent =
      `Session complete: ${answered} of ${total} trials answered.`;
    el<HTMLAnchorElement>("log-link").href = logUrl;
    el<HTMLAnchorElement>("report-link").href = reportUrl;
  }

  private setButtonsEnabled(enabled: boolean): void {
    this.buttons.forEach((b) => {
      b.disabled = !enabled;
    });
  }
}

function show(id: string): void {
  for (const screen of Array.from(document.querySelectorAll<HTMLElement>(".screen"))) {
    screen.hidden = screen.id !== id;
  }
}

function blockWith(message: string): void {
  show("error-screen");
  el<HTMLParagraphElement>("error-text").textContent = message;
}

async function start(): Promise<void> {
  const base = el<HTMLInputElement>("service-url").value || window.location.origin;
  const api = new ConsoleApi(base);
  const muteTactile = el<HTMLInputElement>("mute-tactile").checked;
  const recordLatency = el<HTMLInputElement>("record-latency").checked;
  const player = new WebAudioPlayer(muteTactile);
  const ui = new DomUi(recordLatency);

  try {
    const resume = el<HTMLInputElement>("session-id").value.trim();
    let sessionId = resume;
    if (!sessionId) {
      const created = await api.createSession(
        el<HTMLSelectElement>("design").value,
        el<HTMLInputElement>("participant").value || "anonymous",
        Number(el<HTMLInputElement>("seed").value) || 0,
      );
      sessionId = created.session_id;
    }
    el<HTMLInputElement>("session-id").value = sessionId;
    await runSessionFlow(api, sessionId, player, ui);
  } catch (error) {
    if (error instanceof PlaybackUnavailableError) {
      blockWith(error.message);
    } else {
      blockWith(error instanceof Error ? error.message : String(error));
    }
  }
}

async function boot(): Promise<void> {
  el<HTMLInputElement>("service-url").value = window.location.origin;
  const api = new ConsoleApi(window.location.origin);
  try {
    const designs = await api.listDesigns();
    const select = el<HTMLSelectElement>("design");
    select.innerHTML = "";
    for (const design of designs) {
      const option = document.createElement("option");
      option.value = design.id;
      option.textContent = `${design.id} (${design.n_trials} trials)`;
      select.appendChild(option);
    }
  } catch {
    // service URL can still be edited by hand before starting
  }
  el<HTMLButtonElement>("start").onclick = () => void start();
  show("setup-screen");
}

void boot();
