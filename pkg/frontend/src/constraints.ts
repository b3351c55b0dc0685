/** Paint-kind -> EditSpec builders.
 *
 * These mirror the engine's steering rule table exactly; the golden
 * tests hold the emitted JSON byte-identical to the engine's own
 * constructions, so a painted overlay and a server-side action compile
 * to the same prior.
 */

import {
  AttributeName,
  ConstraintJson,
  DRUM_CLASS,
  EditSpecJson,
  LoopJson,
  NoteJson,
  SelectorJson,
  TICKS_PER_BEAT,
  canonicalOrder,
  onsetTicks,
} from "./types.js";

export const SCALES: Record<string, number[]> = {
  major: [0, 2, 4, 5, 7, 9, 11],
  minor: [0, 2, 3, 5, 7, 8, 10],
  harmonic_minor: [0, 2, 3, 5, 7, 8, 11],
  dorian: [0, 2, 3, 5, 7, 9, 10],
  mixolydian: [0, 2, 4, 5, 7, 9, 10],
  pentatonic_major: [0, 2, 4, 7, 9],
  pentatonic_minor: [0, 3, 5, 7, 10],
  blues: [0, 3, 5, 6, 7, 10],
  chromatic: [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11],
};

export const GRIDS: Record<string, number[]> = {
  quarter: [0],
  eighth: [0, 12],
  triplet: [0, 8, 16],
  sixteenth: [0, 6, 12, 18],
  sixteenth_triplet: [0, 4, 8, 12, 16, 20],
};

export function scalePitches(root: number, intervals: number[]): number[] {
  const classes = new Set(intervals.map((i) => (((root + i) % 12) + 12) % 12));
  const out: number[] = [];
  for (let p = 0; p < 128; p++) {
    if (classes.has(p % 12)) out.push(p);
  }
  return out;
}

function slotsSelector(slots: number[]): SelectorJson {
  return { kind: "slots", slots: [...new Set(slots)].sort((a, b) => a - b) };
}

/** BPM -> tempo bin: nearest of 32 log-spaced anchors in 40..250. */
export function quantizeTempo(bpm: number): number {
  const clamped = Math.max(20, Math.min(320, bpm));
  let best = 0;
  let bestDistance = Infinity;
  for (let i = 0; i < 32; i++) {
    const anchor = 40 * Math.pow(250 / 40, i / 31);
    const distance = Math.abs(Math.log(anchor) - Math.log(clamped));
    if (distance < bestDistance) {
      bestDistance = distance;
      best = i;
    }
  }
  return best;
}

/** Pin regenerated slots to the loop's global tempo and tags. */
function globalPins(loop: LoopJson, selector: SelectorJson): ConstraintJson[] {
  return [
    { selector, attribute: "tempo", allowed: [quantizeTempo(loop.tempo_bpm)],
      allow_inactive: true },
    { selector, attribute: "tag", allowed: [...loop.tags].sort((a, b) => a - b),
      allow_inactive: true },
  ];
}

function instrumentSlots(notes: NoteJson[], instrument: number): number[] {
  const slots: number[] = [];
  canonicalOrder(notes).forEach((note, slot) => {
    if (note.instrument === instrument) slots.push(slot);
  });
  return slots;
}

function paddingSlots(loop: LoopJson, nNotes: number): number[] {
  const out: number[] = [];
  for (let s = loop.notes.length; s < nNotes; s++) out.push(s);
  return out;
}

function emptySpec(): EditSpecJson {
  return { base: null, constraints: [], note_count: null, regenerate: null };
}

/** Tonality paint: restrict pitches to a scale (re-pitching kept notes). */
export function buildScaleSpec(
  loop: LoopJson | null,
  root: number,
  scale: string,
  nNotes: number,
  instrument: number | null = null,
): EditSpecJson {
  const intervals = SCALES[scale];
  if (!intervals) throw new Error(`unknown scale ${scale}`);
  const allowed = scalePitches(root % 12, intervals);
  if (loop === null) {
    const constraint: ConstraintJson = {
      selector: { kind: "all" },
      attribute: "pitch",
      allowed,
      allow_inactive: true,
    };
    return { ...emptySpec(), constraints: [constraint] };
  }
  const ordered = canonicalOrder(loop.notes);
  const slots: number[] = [];
  ordered.forEach((note, slot) => {
    if (instrument !== null ? note.instrument === instrument
                            : note.instrument !== DRUM_CLASS) {
      slots.push(slot);
    }
  });
  const selector = slotsSelector(slots);
  return {
    base: loop,
    constraints: [{ selector, attribute: "pitch", allowed, allow_inactive: false }],
    note_count: null,
    regenerate: { selector, attributes: ["pitch"] },
  };
}

/** Rhythm paint: pin onsets of selected notes to a tick grid. */
export function buildGridSpec(
  loop: LoopJson | null,
  grid: string | number[],
  nNotes: number,
  instrument: number | null = null,
  pitchIn: number[] | null = null,
): EditSpecJson {
  const ticks = typeof grid === "string" ? GRIDS[grid] : grid;
  if (!ticks) throw new Error(`unknown grid ${grid}`);
  const allowed = [...ticks].sort((a, b) => a - b);
  if (loop === null) {
    const constraint: ConstraintJson = {
      selector: { kind: "all" },
      attribute: "onset_tick",
      allowed,
      allow_inactive: true,
    };
    return { ...emptySpec(), constraints: [constraint] };
  }
  const ordered = canonicalOrder(loop.notes);
  const slots: number[] = [];
  ordered.forEach((note, slot) => {
    if (instrument !== null && note.instrument !== instrument) return;
    if (pitchIn !== null && !pitchIn.includes(note.pitch)) return;
    slots.push(slot);
  });
  const selector = slotsSelector(slots);
  return {
    base: loop,
    constraints: [{ selector, attribute: "onset_tick", allowed, allow_inactive: false }],
    note_count: null,
    regenerate: { selector, attributes: ["onset_tick"] },
  };
}

/** Infill paint: reopen a beat window (optionally a pitch band) for new material. */
export function buildInfillSpec(
  loop: LoopJson,
  startBeat: number,
  endBeat: number,
  nNotes: number,
  pitchRange: [number, number] | null = null,
): EditSpecJson {
  if (!(0 <= startBeat && startBeat < endBeat && endBeat <= 16)) {
    throw new Error(`beat window [${startBeat}, ${endBeat}) out of range`);
  }
  const ordered = canonicalOrder(loop.notes);
  const startTick = startBeat * TICKS_PER_BEAT;
  const endTick = endBeat * TICKS_PER_BEAT;
  const slots: number[] = [];
  ordered.forEach((note, slot) => {
    const t = onsetTicks(note);
    if (startTick <= t && t < endTick) slots.push(slot);
  });
  slots.push(...paddingSlots(loop, nNotes));
  const selector = slotsSelector(slots);
  const beats: number[] = [];
  for (let b = startBeat; b < endBeat; b++) beats.push(b);
  const constraints: ConstraintJson[] = [
    { selector, attribute: "onset_beat", allowed: beats, allow_inactive: true },
  ];
  if (pitchRange !== null) {
    const [lo, hi] = pitchRange;
    const allowed: number[] = [];
    for (let p = lo; p <= hi; p++) allowed.push(p);
    constraints.push({ selector, attribute: "pitch", allowed, allow_inactive: true });
  }
  constraints.push(...globalPins(loop, selector));
  return { base: loop, constraints, note_count: null,
           regenerate: { selector, attributes: null } };
}

/** Lock paint: regenerate everything except the locked instrument. */
export function buildLockSpec(
  loop: LoopJson,
  lockedInstrument: number,
  nNotes: number,
): EditSpecJson {
  const ordered = canonicalOrder(loop.notes);
  const slots: number[] = [];
  ordered.forEach((note, slot) => {
    if (note.instrument !== lockedInstrument) slots.push(slot);
  });
  slots.push(...paddingSlots(loop, nNotes));
  const selector = slotsSelector(slots);
  const allowed: number[] = [];
  for (let c = 0; c < 18; c++) {
    if (c !== lockedInstrument) allowed.push(c);
  }
  return {
    base: loop,
    constraints: [
      { selector, attribute: "instrument", allowed, allow_inactive: true },
      ...globalPins(loop, selector),
    ],
    note_count: null,
    regenerate: { selector, attributes: null },
  };
}

/** Density paint: note-count range for a fresh generation. */
export function buildDensitySpec(min: number, max: number): EditSpecJson {
  return { ...emptySpec(), note_count: { min, max, slots: null } };
}

export type PaintKind = "scale" | "grid" | "infill" | "lock";

export interface PaintArgs {
  root?: number;
  scale?: string;
  grid?: string | number[];
  instrument?: number | null;
  pitchIn?: number[] | null;
  startBeat?: number;
  endBeat?: number;
  pitchRange?: [number, number] | null;
}

/** Dispatch a paint gesture onto the matching builder. */
export function paintConstraint(
  kind: PaintKind,
  args: PaintArgs,
  loop: LoopJson | null,
  nNotes: number,
): EditSpecJson {
  switch (kind) {
    case "scale":
      return buildScaleSpec(loop, args.root ?? 0, args.scale ?? "major", nNotes,
                            args.instrument ?? null);
    case "grid":
      return buildGridSpec(loop, args.grid ?? "sixteenth", nNotes,
                           args.instrument ?? null, args.pitchIn ?? null);
    case "infill":
      if (loop === null) throw new Error("infill requires a current loop");
      return buildInfillSpec(loop, args.startBeat ?? 0, args.endBeat ?? 16, nNotes,
                             args.pitchRange ?? null);
    case "lock":
      if (loop === null) throw new Error("lock requires a current loop");
      return buildLockSpec(loop, args.instrument ?? DRUM_CLASS, nNotes);
  }
}
