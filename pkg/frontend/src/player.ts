// WebAudio playback of the service's two-channel wave files. Channel 0 is
// the auditory stimulus; channel 1 is the rendered tactile signal, which a
// browser cannot send to an actuator, so it either plays on the second
// audio output channel or is muted.

import { StimulusPlayer } from "./flow.js";

export class PlaybackUnavailableError extends Error {
  constructor() {
    super("audio playback is unavailable in this browser (no AudioContext)");
    this.name = "PlaybackUnavailableError";
  }
}

export class WebAudioPlayer implements StimulusPlayer {
  private context: AudioContext | null = null;

  constructor(private readonly muteTactile: boolean) {}

  private ensureContext(): AudioContext {
    if (this.context) {
      return this.context;
    }
    const Ctor =
      (globalThis as { AudioContext?: typeof AudioContext }).AudioContext ??
      (globalThis as { webkitAudioContext?: typeof AudioContext }).webkitAudioContext;
    if (!Ctor) {
      throw new PlaybackUnavailableError();
    }
    this.context = new Ctor();
    return this.context;
  }

  async play(wav: ArrayBuffer): Promise<void> {
    const context = this.ensureContext();
    if (context.state === "suspended") {
      await context.resume();
    }
    // decodeAudioData may detach the buffer; hand it a private copy
    const buffer = await context.decodeAudioData(wav.slice(0));
    if (this.muteTactile && buffer.numberOfChannels > 1) {
      buffer.getChannelData(1).fill(0);
    }
    const source = context.createBufferSource();
    source.buffer = buffer;
    source.connect(context.destination);
    await new Promise<void>((resolve) => {
      source.onended = () => resolve();
      source.start();
    });
  }
}
