// Session flow engine: one active trial at a time, every transition driven
// by service responses. The engine never reorders trials and never posts a
// grade twice; after a failed submit it asks the service whether the
// response landed before retrying.
//
// The player and UI are injected so the same engine runs in the browser
// (WebAudio + DOM) and under test (fakes, or a live-service walk in Node).

import { ApiError, Grade, JudgmentLabels, NextTrial, SubmitAck } from "./api.js";

// The slice of the service client the engine needs; ConsoleApi satisfies it.
export interface SessionApi {
  nextTrial(sessionId: string): Promise<NextTrial>;
  submitResponse(
    sessionId: string,
    trialIndex: number,
    grade: Grade,
    latencyMs: number | null,
  ): Promise<SubmitAck>;
  fetchStimulus(path: string): Promise<ArrayBuffer>;
  logUrl(sessionId: string): string;
  reportUrl(sessionId: string): string;
}

export interface StimulusPlayer {
  // Resolves when playback of the whole clip has finished.
  play(wav: ArrayBuffer): Promise<void>;
}

export interface GradeAnswer {
  grade: Grade;
  latencyMs: number | null;
}

export interface FlowUi {
  onTrialStart(trialIndex: number, answered: number, total: number): void;
  onPlaybackPhase(phase: "reference" | "gap" | "test"): void;
  // Must enable exactly the three grade controls and resolve on the first
  // activation; the engine calls this only after test playback has ended.
  promptGrade(labels: JudgmentLabels): Promise<GradeAnswer>;
  // Return true to retry, false to abort the session flow.
  confirmRetry(message: string): Promise<boolean>;
  onComplete(answered: number, total: number, logUrl: string, reportUrl: string): void;
}

export interface FlowOptions {
  // Injectable pause so tests can run the inter-stimulus gap instantly.
  pause?: (ms: number) => Promise<void>;
}

export interface FlowResult {
  answered: number;
  total: number;
}

const realPause = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class FlowAborted extends Error {
  constructor(cause: string) {
    super(`session flow aborted: ${cause}`);
    this.name = "FlowAborted";
  }
}

export async function runSessionFlow(
  api: SessionApi,
  sessionId: string,
  player: StimulusPlayer,
  ui: FlowUi,
  options: FlowOptions = {},
): Promise<FlowResult> {
  const pause = options.pause ?? realPause;

  for (;;) {
    const trial = await api.nextTrial(sessionId);
    if (trial.done) {
      ui.onComplete(
        trial.answered,
        trial.n_trials,
        api.logUrl(sessionId),
        api.reportUrl(sessionId),
      );
      return { answered: trial.answered, total: trial.n_trials };
    }
    const current = requireTrialFields(trial);
    ui.onTrialStart(current.trialIndex, trial.answered, trial.n_trials);

    const [reference, test] = await Promise.all([
      api.fetchStimulus(current.referenceUrl),
      api.fetchStimulus(current.testUrl),
    ]);
    ui.onPlaybackPhase("reference");
    await player.play(reference);
    ui.onPlaybackPhase("gap");
    await pause(current.gapMs);
    ui.onPlaybackPhase("test");
    await player.play(test);

    const answer = await ui.promptGrade(current.labels);
    await submitOnce(api, sessionId, current.trialIndex, answer, ui);
  }
}

interface CurrentTrial {
  trialIndex: number;
  referenceUrl: string;
  testUrl: string;
  gapMs: number;
  labels: JudgmentLabels;
}

function requireTrialFields(trial: NextTrial): CurrentTrial {
  if (
    trial.trial_index === undefined ||
    trial.reference_url === undefined ||
    trial.test_url === undefined ||
    trial.judgment_labels === undefined
  ) {
    throw new Error("service returned an incomplete trial payload");
  }
  return {
    trialIndex: trial.trial_index,
    referenceUrl: trial.reference_url,
    testUrl: trial.test_url,
    gapMs: trial.gap_ms ?? 700,
    labels: trial.judgment_labels,
  };
}

// Post the grade exactly once. A 409 means the service already holds a
// response for this trial (double click, replayed request), which is fine.
// On transport failures, probe the cursor: if it moved past this trial the
// response landed and a retry would double-post.
async function submitOnce(
  api: SessionApi,
  sessionId: string,
  trialIndex: number,
  answer: GradeAnswer,
  ui: FlowUi,
): Promise<void> {
  for (;;) {
    try {
      await api.submitResponse(sessionId, trialIndex, answer.grade, answer.latencyMs);
      return;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        return; // already recorded on the service
      }
      if (error instanceof ApiError && error.status < 500) {
        throw error; // a real protocol bug; retrying will not help
      }
      const landed = await cursorMovedPast(api, sessionId, trialIndex);
      if (landed) {
        return;
      }
      const message = error instanceof Error ? error.message : String(error);
      const retry = await ui.confirmRetry(`could not submit the response (${message})`);
      if (!retry) {
        throw new FlowAborted(message);
      }
    }
  }
}

async function cursorMovedPast(
  api: SessionApi,
  sessionId: string,
  trialIndex: number,
): Promise<boolean> {
  try {
    const probe = await api.nextTrial(sessionId);
    return probe.done || (probe.trial_index !== undefined && probe.trial_index > trialIndex);
  } catch {
    return false; // probe failed too; let the caller decide about retrying
  }
}
