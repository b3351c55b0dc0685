/** Wire types for the /v1 loop-editing API. */

export interface NoteJson {
  instrument: number;
  pitch: number;
  onset_beat: number;
  onset_tick: number;
  offset_beat: number;
  offset_tick: number;
  velocity: number;
  tag: number;
}

export interface LoopJson {
  notes: NoteJson[];
  tempo_bpm: number;
  tags: number[];
}

export type SelectorJson =
  | { kind: "all" }
  | { kind: "slots"; slots: number[] }
  | { kind: "instrument"; instrument: number; pitch_in: number[] | null }
  | { kind: "time_window"; start_tick: number; end_tick: number };

export type AttributeName =
  | "instrument"
  | "pitch"
  | "onset_beat"
  | "onset_tick"
  | "offset_beat"
  | "offset_tick"
  | "velocity"
  | "tempo"
  | "tag";

export interface ConstraintJson {
  selector: SelectorJson;
  attribute: AttributeName;
  allowed: number[];
  allow_inactive: boolean;
}

export interface NoteCountJson {
  min: number;
  max: number;
  slots: number[] | null;
}

export interface RegenerateJson {
  selector: SelectorJson;
  attributes: AttributeName[] | null;
}

export interface EditSpecJson {
  base: LoopJson | null;
  constraints: ConstraintJson[];
  note_count: NoteCountJson | null;
  regenerate: RegenerateJson | null;
}

export interface SamplerOptionsJson {
  seed?: number | null;
  temperature?: number;
  enforce_prior_support?: boolean;
}

export interface LoopRecordJson {
  id: string;
  loop: LoopJson;
  created_at: number;
  parent_id: string | null;
  seed: number;
}

export interface LoopListJson {
  records: LoopRecordJson[];
  total: number;
  offset: number;
}

export interface ApiErrorJson {
  code: string;
  message: string;
  detail?: { row?: number; [key: string]: unknown } | null;
}

export const TICKS_PER_BEAT = 24;
export const BEATS_PER_LOOP = 16;
export const LOOP_TICKS = TICKS_PER_BEAT * BEATS_PER_LOOP;
export const NUM_INSTRUMENT_CLASSES = 18;
export const DRUM_CLASS = 17;

export function onsetTicks(note: NoteJson): number {
  return note.onset_beat * TICKS_PER_BEAT + note.onset_tick;
}

export function offsetTicks(note: NoteJson): number {
  return note.offset_beat * TICKS_PER_BEAT + note.offset_tick;
}

/** Canonical slot order: mirrors the engine's encode-time note sort. */
export function canonicalOrder(notes: NoteJson[]): NoteJson[] {
  return [...notes].sort((a, b) =>
    onsetTicks(a) - onsetTicks(b)
    || a.instrument - b.instrument
    || a.pitch - b.pitch
    || offsetTicks(a) - offsetTicks(b)
    || a.velocity - b.velocity
    || a.tag - b.tag,
  );
}
