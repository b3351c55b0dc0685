/** Piano-roll geometry and canvas rendering.
 *
 * Layout is pure (testable without a DOM): one horizontal lane per
 * instrument class present in the loop, notes as rectangles on the
 * 384-tick grid, constraint overlays as translucent shapes.  Overlays
 * never mutate loop state; the server remains the source of truth.
 */

import {
  ConstraintJson,
  DRUM_CLASS,
  EditSpecJson,
  LOOP_TICKS,
  LoopJson,
  NoteJson,
  TICKS_PER_BEAT,
  offsetTicks,
  onsetTicks,
} from "./types.js";

export interface NoteRect {
  x: number;
  y: number;
  width: number;
  height: number;
  lane: number;
  note: NoteJson;
}

export interface OverlayShape {
  kind: "scale" | "grid" | "infill" | "lock";
  x: number;
  y: number;
  width: number;
  height: number;
  lane: number | null;  // null = spans all lanes
}

export interface Viewport {
  width: number;
  height: number;
}

export const LANE_NAMES = [
  "piano", "chrom perc", "organ", "guitar", "ac bass", "el bass",
  "strings", "ensemble", "brass", "reed", "pipe", "lead", "pad",
  "fx", "ethnic", "percussive", "sound fx", "drums",
];

/** Instrument classes present, in fixed class order (drums last). */
export function lanesOf(loop: LoopJson): number[] {
  const present = new Set(loop.notes.map((n) => n.instrument));
  return [...present].sort((a, b) => a - b);
}

function pitchBand(notes: NoteJson[]): [number, number] {
  let lo = 127;
  let hi = 0;
  for (const note of notes) {
    lo = Math.min(lo, note.pitch);
    hi = Math.max(hi, note.pitch);
  }
  if (lo > hi) return [48, 72];
  return [lo, hi];
}

/** One rectangle per note; exactly one per note in the loop. */
export function noteRects(loop: LoopJson, view: Viewport): NoteRect[] {
  const lanes = lanesOf(loop);
  if (lanes.length === 0) return [];
  const laneHeight = view.height / lanes.length;
  const rects: NoteRect[] = [];
  for (const [laneIndex, instrument] of lanes.entries()) {
    const laneNotes = loop.notes.filter((n) => n.instrument === instrument);
    const [lo, hi] = pitchBand(laneNotes);
    const span = Math.max(1, hi - lo + 1);
    const rowHeight = Math.min(laneHeight / span, laneHeight / 4);
    for (const note of laneNotes) {
      const x = (onsetTicks(note) / LOOP_TICKS) * view.width;
      const width = Math.max(
        2, ((offsetTicks(note) - onsetTicks(note)) / LOOP_TICKS) * view.width);
      const row = hi - note.pitch;
      const y = laneIndex * laneHeight + Math.min(row * rowHeight, laneHeight - rowHeight);
      rects.push({ x, y, width, height: Math.max(2, rowHeight - 1),
                   lane: laneIndex, note });
    }
  }
  return rects;
}

/** Translucent shapes for the pending draft's constraints. */
export function overlayShapes(
  draft: EditSpecJson | null,
  loop: LoopJson,
  view: Viewport,
): OverlayShape[] {
  if (draft === null) return [];
  const lanes = lanesOf(loop);
  const laneHeight = lanes.length ? view.height / lanes.length : view.height;
  const shapes: OverlayShape[] = [];
  for (const constraint of draft.constraints) {
    if (constraint.attribute === "pitch") {
      shapes.push({ kind: "scale", x: 0, y: 0, width: view.width,
                    height: view.height, lane: null });
    } else if (constraint.attribute === "onset_tick") {
      for (const tick of constraint.allowed) {
        for (let beat = 0; beat < 16; beat++) {
          const x = ((beat * TICKS_PER_BEAT + tick) / LOOP_TICKS) * view.width;
          shapes.push({ kind: "grid", x, y: 0, width: 1,
                        height: view.height, lane: null });
        }
      }
    } else if (constraint.attribute === "onset_beat") {
      const beats = constraint.allowed;
      const lo = Math.min(...beats);
      const hi = Math.max(...beats) + 1;
      shapes.push({
        kind: "infill",
        x: (lo * TICKS_PER_BEAT / LOOP_TICKS) * view.width,
        y: 0,
        width: ((hi - lo) * TICKS_PER_BEAT / LOOP_TICKS) * view.width,
        height: view.height,
        lane: null,
      });
    } else if (constraint.attribute === "instrument") {
      const locked = lanes.filter((c) => !constraint.allowed.includes(c));
      for (const instrument of locked) {
        const laneIndex = lanes.indexOf(instrument);
        if (laneIndex >= 0) {
          shapes.push({ kind: "lock", x: 0, y: laneIndex * laneHeight,
                        width: view.width, height: laneHeight, lane: laneIndex });
        }
      }
    }
  }
  return shapes;
}

const OVERLAY_COLORS: Record<OverlayShape["kind"], string> = {
  scale: "rgba(80, 170, 255, 0.12)",
  grid: "rgba(255, 210, 80, 0.5)",
  infill: "rgba(120, 255, 140, 0.18)",
  lock: "rgba(200, 200, 200, 0.35)",
};

/** Draw the grid, notes, overlays and playhead onto a canvas. */
export function render(
  ctx: CanvasRenderingContext2D,
  loop: LoopJson,
  draft: EditSpecJson | null,
  view: Viewport,
  playheadTicks: number | null,
): void {
  ctx.clearRect(0, 0, view.width, view.height);
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, view.width, view.height);

  ctx.strokeStyle = "#2a2e3a";
  for (let beat = 0; beat <= 16; beat++) {
    const x = (beat / 16) * view.width;
    ctx.lineWidth = beat % 4 === 0 ? 1.5 : 0.5;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, view.height);
    ctx.stroke();
  }

  const lanes = lanesOf(loop);
  const laneHeight = lanes.length ? view.height / lanes.length : view.height;
  ctx.fillStyle = "#8a90a0";
  ctx.font = "11px sans-serif";
  for (const [laneIndex, instrument] of lanes.entries()) {
    ctx.fillText(LANE_NAMES[instrument] ?? String(instrument), 4,
                 laneIndex * laneHeight + 12);
    ctx.strokeStyle = "#22252f";
    ctx.beginPath();
    ctx.moveTo(0, laneIndex * laneHeight);
    ctx.lineTo(view.width, laneIndex * laneHeight);
    ctx.stroke();
  }

  for (const shape of overlayShapes(draft, loop, view)) {
    ctx.fillStyle = OVERLAY_COLORS[shape.kind];
    ctx.fillRect(shape.x, shape.y, shape.width, shape.height);
  }

  for (const rect of noteRects(loop, view)) {
    const isDrum = rect.note.instrument === DRUM_CLASS;
    const velocity = (rect.note.velocity + 1) / 32;
    ctx.fillStyle = isDrum
      ? `rgba(255, 140, 90, ${0.45 + 0.55 * velocity})`
      : `rgba(110, 190, 255, ${0.45 + 0.55 * velocity})`;
    ctx.fillRect(rect.x, rect.y, rect.width, rect.height);
  }

  if (playheadTicks !== null) {
    const x = (playheadTicks / LOOP_TICKS) * view.width;
    ctx.strokeStyle = "#ff5072";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.moveTo(x, 0);
    ctx.lineTo(x, view.height);
    ctx.stroke();
  }
}
