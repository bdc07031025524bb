// Flow engine behavior against an in-memory service double: ordering,
// resume, and the no-double-post guarantees around flaky submissions.

import assert from "node:assert/strict";
import test from "node:test";

import { ApiError, Grade, JudgmentLabels, NextTrial, SubmitAck } from "../src/api.js";
import {
  FlowAborted,
  FlowUi,
  GradeAnswer,
  runSessionFlow,
  SessionApi,
  StimulusPlayer,
} from "../src/flow.js";

const LABELS: JudgmentLabels = ["Shorter", "Same", "Longer"];

interface FakeOptions {
  trials?: number;
  alreadyAnswered?: number;
  // Submission attempts (1-based) that throw after recording: a lost ack.
  loseAckOn?: number[];
  // Submission attempts that fail before recording anything.
  failCleanOn?: number[];
}

class FakeService implements SessionApi {
  total: number;
  answered: number;
  posts: Array<{ trialIndex: number; grade: Grade }> = [];
  fetched: string[] = [];
  private attempts = 0;
  private readonly loseAckOn: Set<number>;
  private readonly failCleanOn: Set<number>;

  constructor(options: FakeOptions = {}) {
    this.total = options.trials ?? 3;
    this.answered = options.alreadyAnswered ?? 0;
    this.loseAckOn = new Set(options.loseAckOn ?? []);
    this.failCleanOn = new Set(options.failCleanOn ?? []);
  }

  async nextTrial(): Promise<NextTrial> {
    if (this.answered >= this.total) {
      return { done: true, answered: this.answered, n_trials: this.total };
    }
    return {
      done: false,
      answered: this.answered,
      n_trials: this.total,
      trial_index: this.answered,
      pair_id: `pair-${this.answered}`,
      repetition: 0,
      order: ["reference", "test"],
      gap_ms: 700,
      judgment_labels: LABELS,
      reference_url: "/stimuli/fake/ref.wav",
      test_url: `/stimuli/fake/pair-${this.answered}.wav`,
    };
  }

  async submitResponse(
    _sessionId: string,
    trialIndex: number,
    grade: Grade,
  ): Promise<SubmitAck> {
    this.attempts += 1;
    if (this.failCleanOn.has(this.attempts)) {
      throw new TypeError("fetch failed"); // network error, nothing recorded
    }
    if (trialIndex !== this.answered) {
      throw new ApiError(409, `out of order: expected ${this.answered}`);
    }
    this.posts.push({ trialIndex, grade });
    this.answered += 1;
    if (this.loseAckOn.has(this.attempts)) {
      throw new TypeError("socket closed mid-response"); // recorded, ack lost
    }
    return {
      ok: true,
      answered: this.answered,
      n_trials: this.total,
      done: this.answered === this.total,
    };
  }

  async fetchStimulus(path: string): Promise<ArrayBuffer> {
    this.fetched.push(path);
    return new ArrayBuffer(8);
  }

  logUrl(): string {
    return "http://service/log";
  }

  reportUrl(): string {
    return "http://service/report";
  }
}

class InstantPlayer implements StimulusPlayer {
  played: number = 0;
  async play(): Promise<void> {
    this.played += 1;
  }
}

interface UiOptions {
  grades?: Grade[];
  retryAnswers?: boolean[];
}

class ScriptedUi implements FlowUi {
  events: string[] = [];
  retriesAsked = 0;
  private readonly grades: Grade[];
  private readonly retryAnswers: boolean[];
  private prompts = 0;

  constructor(options: UiOptions = {}) {
    this.grades = options.grades ?? ["lower", "same", "higher", "lower", "same"];
    this.retryAnswers = options.retryAnswers ?? [];
  }

  onTrialStart(trialIndex: number): void {
    this.events.push(`start:${trialIndex}`);
  }

  onPlaybackPhase(phase: "reference" | "gap" | "test"): void {
    this.events.push(`play:${phase}`);
  }

  async promptGrade(labels: JudgmentLabels): Promise<GradeAnswer> {
    assert.deepEqual(labels, LABELS);
    this.events.push("prompt");
    const grade = this.grades[this.prompts % this.grades.length];
    this.prompts += 1;
    return { grade, latencyMs: 321 };
  }

  async confirmRetry(): Promise<boolean> {
    const answer = this.retryAnswers[this.retriesAsked] ?? true;
    this.retriesAsked += 1;
    return answer;
  }

  onComplete(answered: number, total: number): void {
    this.events.push(`complete:${answered}/${total}`);
  }
}

const instantPause = async () => {};

test("walks every trial in service order and completes", async () => {
  const service = new FakeService({ trials: 3 });
  const ui = new ScriptedUi();
  const result = await runSessionFlow(service, "s", new InstantPlayer(), ui, {
    pause: instantPause,
  });
  assert.equal(result.answered, 3);
  assert.deepEqual(
    service.posts.map((p) => p.trialIndex),
    [0, 1, 2],
  );
  assert.equal(ui.events.at(-1), "complete:3/3");
});

test("plays reference, gap, test before prompting, every trial", async () => {
  const service = new FakeService({ trials: 2 });
  const ui = new ScriptedUi();
  await runSessionFlow(service, "s", new InstantPlayer(), ui, { pause: instantPause });
  const perTrial = ["play:reference", "play:gap", "play:test", "prompt"];
  assert.deepEqual(ui.events, [
    "start:0", ...perTrial,
    "start:1", ...perTrial,
    "complete:2/2",
  ]);
});

test("resumes at the first unanswered trial", async () => {
  const service = new FakeService({ trials: 5, alreadyAnswered: 3 });
  const ui = new ScriptedUi();
  await runSessionFlow(service, "s", new InstantPlayer(), ui, { pause: instantPause });
  assert.deepEqual(
    service.posts.map((p) => p.trialIndex),
    [3, 4],
  );
});

test("a lost ack is not re-posted once the cursor moved", async () => {
  const service = new FakeService({ trials: 2, loseAckOn: [1] });
  const ui = new ScriptedUi();
  await runSessionFlow(service, "s", new InstantPlayer(), ui, { pause: instantPause });
  // trial 0 recorded once despite the lost ack, then trial 1 as normal
  assert.deepEqual(
    service.posts.map((p) => p.trialIndex),
    [0, 1],
  );
  assert.equal(ui.retriesAsked, 0); // the probe settled it silently
});

test("a clean network failure asks to retry, then succeeds once", async () => {
  const service = new FakeService({ trials: 1, failCleanOn: [1] });
  const ui = new ScriptedUi({ retryAnswers: [true] });
  await runSessionFlow(service, "s", new InstantPlayer(), ui, { pause: instantPause });
  assert.equal(ui.retriesAsked, 1);
  assert.deepEqual(service.posts.map((p) => p.trialIndex), [0]);
});

test("declining the retry aborts the flow", async () => {
  const service = new FakeService({ trials: 1, failCleanOn: [1, 2, 3] });
  const ui = new ScriptedUi({ retryAnswers: [false] });
  await assert.rejects(
    runSessionFlow(service, "s", new InstantPlayer(), ui, { pause: instantPause }),
    FlowAborted,
  );
  assert.equal(service.posts.length, 0);
});

test("fetches both stimulus payloads for each trial", async () => {
  const service = new FakeService({ trials: 2 });
  await runSessionFlow(service, "s", new InstantPlayer(), new ScriptedUi(), {
    pause: instantPause,
  });
  assert.deepEqual(service.fetched, [
    "/stimuli/fake/ref.wav",
    "/stimuli/fake/pair-0.wav",
    "/stimuli/fake/ref.wav",
    "/stimuli/fake/pair-1.wav",
  ]);
});
