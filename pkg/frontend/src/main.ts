/** Browser entry point: wires the session, piano roll and transport. */

import { ApiClient, ApiError } from "./api.js";
import { PaintKind } from "./constraints.js";
import { render } from "./pianoroll.js";
import { EditSession } from "./session.js";
import { Transport, makeSink } from "./transport.js";
import { DRUM_CLASS } from "./types.js";

const N_NOTES = 16;

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function main(): void {
  const api = new ApiClient("");
  const session = new EditSession(api, N_NOTES);
  const transport = new Transport(makeSink());
  const canvas = element<HTMLCanvasElement>("roll");
  const ctx = canvas.getContext("2d")!;
  const status = element<HTMLSpanElement>("status");

  function flash(message: string, isError = false): void {
    status.textContent = message;
    status.className = isError ? "error" : "";
  }

  function redraw(): void {
    const loop = session.current?.loop ?? { notes: [], tempo_bpm: 120, tags: [0] };
    const playhead = transport.isPlaying ? transport.positionTicks() : null;
    render(ctx, loop, session.draft, { width: canvas.width, height: canvas.height },
           playhead);
    element<HTMLSpanElement>("record-id").textContent =
      session.currentId ? `${session.currentId} (seed ${session.current!.seed})` : "-";
    (element<HTMLButtonElement>("undo")).disabled = !session.canUndo();
  }

  async function guard(work: () => Promise<unknown>): Promise<void> {
    try {
      flash("working...");
      await work();
      flash("ok");
    } catch (error) {
      if (error instanceof ApiError) {
        const row = error.body.detail?.row;
        flash(`${error.body.code}${row !== undefined ? ` (row ${row})` : ""}: `
              + error.body.message, true);
      } else {
        flash(String(error), true);
      }
    }
    transport.setLoop(session.current?.loop ?? null);
    redraw();
  }

  element<HTMLButtonElement>("generate").onclick = () =>
    guard(() => session.generateFresh({ seed: seedInput() }));
  element<HTMLButtonElement>("undo").onclick = () => guard(() => session.undo());
  element<HTMLButtonElement>("submit").onclick = () =>
    guard(async () => {
      const result = await session.submit({ seed: seedInput() });
      if (result === null) flash("nothing to submit");
    });

  const actionSelect = element<HTMLSelectElement>("action");
  element<HTMLButtonElement>("run-action").onclick = () =>
    guard(() => {
      const action = actionSelect.value;
      const args: Record<string, unknown> = {
        regenerate_instrument: { instrument: "drums" },
        constrain_scale: { root: rootInput(), scale: scaleSelect() },
        constrain_grid: { grid: gridSelect() },
        set_density: { min: 4, max: 12 },
        humanize_velocity: { spread: 2 },
        change_tempo: { tempo_bpm: 140 },
        regenerate_region: { start_beat: 0, end_beat: 4 },
        generate_fresh: {},
      }[action] as Record<string, unknown>;
      return session.runAction(action, args ?? {}, { seed: seedInput() });
    });

  const paintButtons: Array<[string, PaintKind, () => object]> = [
    ["paint-scale", "scale", () => ({ root: rootInput(), scale: scaleSelect() })],
    ["paint-grid", "grid", () => ({ grid: gridSelect(), instrument: DRUM_CLASS })],
    ["paint-infill", "infill", () => ({ startBeat: 4, endBeat: 8 })],
    ["paint-lock", "lock", () => ({ instrument: DRUM_CLASS })],
  ];
  for (const [id, kind, argsOf] of paintButtons) {
    element<HTMLButtonElement>(id).onclick = () => {
      try {
        session.paint(kind, argsOf());
        flash(`painted ${kind} (submit to apply)`);
      } catch (error) {
        flash(String(error), true);
      }
      redraw();
    };
  }
  element<HTMLButtonElement>("clear-draft").onclick = () => {
    session.clearDraft();
    flash("draft cleared");
    redraw();
  };

  element<HTMLButtonElement>("play").onclick = () => {
    transport.setLoop(session.current?.loop ?? null);
    transport.play();
  };
  element<HTMLButtonElement>("pause").onclick = () => transport.pause();
  element<HTMLButtonElement>("stop").onclick = () => transport.stop();
  element<HTMLAnchorElement>("download").onclick = (event) => {
    event.preventDefault();
    if (session.currentId) window.open(api.midiUrl(session.currentId), "_blank");
  };

  const seedInput = () => {
    const raw = element<HTMLInputElement>("seed").value;
    return raw === "" ? null : Number(raw);
  };
  const rootInput = () => Number(element<HTMLSelectElement>("root").value);
  const scaleSelect = () => element<HTMLSelectElement>("scale").value;
  const gridSelect = () => element<HTMLSelectElement>("grid").value;

  setInterval(() => {
    transport.pump();
    if (transport.isPlaying) redraw();
  }, 40);

  api.health()
    .then((h) => flash(h.model_loaded ? "service ready" : "service up, no model", !h.model_loaded))
    .catch(() => flash("service unreachable", true));
  redraw();
}

main();
