/** Loop playback transport over an injectable audio sink.
 *
 * Time is measured by the sink's clock; the transport schedules note
 * events a small lookahead window ahead of the playhead and wraps at
 * the 384-tick loop boundary.  With no usable audio backend the
 * SilentSink keeps the transport (and the UI) fully functional.
 */

import { LOOP_TICKS, LoopJson, NoteJson, offsetTicks, onsetTicks } from "./types.js";

export interface AudioSink {
  /** Current time in seconds. */
  now(): number;
  /** Schedule one note at an absolute sink time. */
  scheduleNote(note: NoteJson, when: number, duration: number): void;
  /** Cut everything scheduled. */
  stopAll(): void;
}

export class SilentSink implements AudioSink {
  private t = 0;
  now(): number {
    return this.t;
  }
  advance(dt: number): void {
    this.t += dt;
  }
  scheduleNote(): void {}
  stopAll(): void {}
}

export class WebAudioSink implements AudioSink {
  constructor(private readonly context: AudioContext) {}

  now(): number {
    return this.context.currentTime;
  }

  scheduleNote(note: NoteJson, when: number, duration: number): void {
    const oscillator = this.context.createOscillator();
    const gain = this.context.createGain();
    const frequency = note.instrument === 17
      ? 100 + (note.pitch - 128) * 12      // drums: short pitched thump
      : 440 * Math.pow(2, (note.pitch - 69) / 12);
    oscillator.frequency.value = frequency;
    oscillator.type = note.instrument === 17 ? "square" : "triangle";
    const velocity = (note.velocity + 1) / 32;
    gain.gain.setValueAtTime(0.15 * velocity, when);
    gain.gain.exponentialRampToValueAtTime(0.001, when + Math.max(0.05, duration));
    oscillator.connect(gain).connect(this.context.destination);
    oscillator.start(when);
    oscillator.stop(when + Math.max(0.05, duration));
  }

  stopAll(): void {
    // voices are one-shot; nothing persistent to tear down
  }
}

/** Best-effort sink factory: silent fallback when audio is unavailable. */
export function makeSink(): AudioSink {
  try {
    const Ctor = (globalThis as { AudioContext?: new () => AudioContext }).AudioContext;
    if (Ctor) return new WebAudioSink(new Ctor());
  } catch {
    // fall through to silence
  }
  return new SilentSink();
}

export class Transport {
  private loop: LoopJson | null = null;
  private playing = false;
  private startTime = 0;      // sink time of tick 0 of the current pass
  private pausedAt = 0;       // playhead ticks while paused
  private scheduledThrough = 0;  // absolute ticks scheduled so far

  constructor(
    private readonly sink: AudioSink,
    private readonly lookaheadSeconds = 0.2,
  ) {}

  setLoop(loop: LoopJson | null): void {
    const position = this.positionTicks();
    this.loop = loop;
    if (this.playing) {
      // keep the playhead; future pumps schedule the new material
      this.startTime = this.sink.now() - position * this.secondsPerTick();
      this.scheduledThrough = this.absoluteTicks();
    } else {
      this.pausedAt = Math.min(position, LOOP_TICKS);
    }
  }

  secondsPerTick(): number {
    const bpm = this.loop?.tempo_bpm ?? 120;
    return 60 / (bpm * 24);
  }

  /** Loop period in seconds (4 bars at the loop tempo). */
  periodSeconds(): number {
    return LOOP_TICKS * this.secondsPerTick();
  }

  get isPlaying(): boolean {
    return this.playing;
  }

  /** Playhead position within the loop, in ticks. */
  positionTicks(): number {
    if (!this.playing) return this.pausedAt;
    const elapsed = (this.sink.now() - this.startTime) / this.secondsPerTick();
    return ((elapsed % LOOP_TICKS) + LOOP_TICKS) % LOOP_TICKS;
  }

  private absoluteTicks(): number {
    return (this.sink.now() - this.startTime) / this.secondsPerTick();
  }

  play(): void {
    if (this.playing) return;  // idempotent
    this.playing = true;
    this.startTime = this.sink.now() - this.pausedAt * this.secondsPerTick();
    this.scheduledThrough = this.pausedAt;
    this.pump();
  }

  pause(): void {
    if (!this.playing) return;
    this.pausedAt = this.positionTicks();
    this.playing = false;
    this.sink.stopAll();
  }

  stop(): void {
    this.playing = false;
    this.pausedAt = 0;
    this.scheduledThrough = 0;
    this.sink.stopAll();
  }

  /** Schedule everything inside the lookahead window; call on a timer. */
  pump(): void {
    if (!this.playing || this.loop === null) return;
    const horizon = this.absoluteTicks() + this.lookaheadSeconds / this.secondsPerTick();
    while (this.scheduledThrough < horizon) {
      const windowStart = this.scheduledThrough;
      const windowEnd = Math.min(horizon, windowStart + LOOP_TICKS);
      for (const note of this.loop.notes) {
        const base = Math.floor(windowStart / LOOP_TICKS) * LOOP_TICKS;
        for (const passBase of [base, base + LOOP_TICKS]) {
          const tick = passBase + onsetTicks(note);
          if (tick >= windowStart && tick < windowEnd) {
            const when = this.startTime + tick * this.secondsPerTick();
            const duration = (offsetTicks(note) - onsetTicks(note)) * this.secondsPerTick();
            this.sink.scheduleNote(note, when, duration);
          }
        }
      }
      this.scheduledThrough = windowEnd;
    }
  }
}
