/** End-to-end: the client against a live service process.
 *
 * Spins up the engine's HTTP service on an untrained desk checkpoint,
 * then walks the full editing flow: generate, named edit with lineage,
 * undo via re-fetch, painted draft submission, and MIDI download.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { EditSession } from "../src/session.js";
import { DRUM_CLASS } from "../src/types.js";

const REPO_ROOT = resolve(dirname(fileURLToPath(import.meta.url)), "..", "..");
const PORT = 8977;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let workDir = "";

async function waitForHealth(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${BASE}/v1/health`);
      if (response.ok) return;
    } catch (error) {
      lastError = error;
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error(`service did not come up: ${lastError}`);
}

beforeAll(async () => {
  workDir = mkdtempSync(join(tmpdir(), "superloop-e2e-"));
  const configPath = join(workDir, "model.json");
  writeFileSync(configPath, JSON.stringify({
    model: { d_model: 32, n_layers: 1, n_heads: 2, n_notes: 16 },
  }));
  const checkpoint = join(workDir, "model.ckpt");
  const env = { ...process.env, PYTHONPATH: join(REPO_ROOT, "src") };
  const init = spawnSync(
    "python3", ["-m", "superloop", "init", "--config", configPath,
                "--seed", "0", "--out", checkpoint],
    { cwd: REPO_ROOT, env, encoding: "utf-8" },
  );
  if (init.status !== 0) {
    throw new Error(`checkpoint init failed: ${init.stderr}`);
  }
  server = spawn(
    "python3", ["-m", "superloop", "serve", "--checkpoint", checkpoint,
                "--port", String(PORT), "--store", join(workDir, "store")],
    { cwd: REPO_ROOT, env, stdio: ["ignore", "pipe", "pipe"] },
  );
  await waitForHealth(60_000);
}, 90_000);

afterAll(() => {
  server?.kill("SIGTERM");
  if (workDir) rmSync(workDir, { recursive: true, force: true });
});

describe("live service flow", () => {
  it("generate -> edit -> undo walks the lineage", async () => {
    const api = new ApiClient(BASE);
    const health = await api.health();
    expect(health.model_loaded).toBe(true);

    const session = new EditSession(api, 16);
    const first = await session.generateFresh({ seed: 7 });
    expect(first.id).toBeTruthy();
    expect(first.parent_id).toBeNull();

    const second = await session.runAction(
      "regenerate_instrument", { instrument: "drums" }, { seed: 8 });
    expect(second.parent_id).toBe(first.id);

    const nonDrum = (notes: Array<{ instrument: number }>) =>
      notes.filter((n) => n.instrument !== DRUM_CLASS)
        .map((n) => JSON.stringify(n)).sort();
    expect(nonDrum(second.loop.notes)).toEqual(nonDrum(first.loop.notes));

    const restored = await session.undo();
    expect(restored?.id).toBe(first.id);
    expect(JSON.stringify(restored?.loop)).toBe(JSON.stringify(first.loop));
    expect(session.canUndo()).toBe(false);
  }, 120_000);

  it("fresh scale paint constrains every sampled pitch", async () => {
    const api = new ApiClient(BASE);
    const session = new EditSession(api, 16);
    // no base loop: the tonality constraint covers all slots
    session.paint("scale", { root: 0, scale: "major" });
    const record = await session.submit({ seed: 22 });
    expect(record).not.toBeNull();
    for (const note of record!.loop.notes) {
      expect(note.instrument).not.toBe(DRUM_CLASS); // scale rules drums out
      expect([0, 2, 4, 5, 7, 9, 11]).toContain(note.pitch % 12);
    }
  }, 120_000);

  it("lock paint keeps the locked lane byte-identical", async () => {
    const api = new ApiClient(BASE);
    const session = new EditSession(api, 16);
    const parent = await session.generateFresh({ seed: 41 });
    session.paint("lock", { instrument: DRUM_CLASS });
    const child = await session.submit({ seed: 42 });
    expect(child).not.toBeNull();
    const drums = (notes: Array<{ instrument: number }>) =>
      notes.filter((n) => n.instrument === DRUM_CLASS)
        .map((n) => JSON.stringify(n)).sort();
    expect(drums(child!.loop.notes)).toEqual(drums(parent.loop.notes));
  }, 120_000);

  it("identical seeds produce identical loops", async () => {
    const api = new ApiClient(BASE);
    const a = await api.generate(null, { seed: 99 });
    const b = await api.generate(null, { seed: 99 });
    expect(JSON.stringify(a.loop)).toBe(JSON.stringify(b.loop));
  }, 120_000);

  it("serves MIDI bytes for a record", async () => {
    const api = new ApiClient(BASE);
    const record = await api.generate(null, { seed: 31 });
    const response = await fetch(api.midiUrl(record.id));
    expect(response.status).toBe(200);
    const bytes = new Uint8Array(await response.arrayBuffer());
    expect(Array.from(bytes.slice(0, 4))).toEqual([0x4d, 0x54, 0x68, 0x64]); // MThd
  }, 120_000);

  it("surfaces infeasible constraints as 422 with a row index", async () => {
    const api = new ApiClient(BASE);
    const spec = {
      base: null,
      constraints: [
        { selector: { kind: "slots" as const, slots: [0] },
          attribute: "pitch" as const, allowed: [60], allow_inactive: false },
        { selector: { kind: "slots" as const, slots: [0] },
          attribute: "pitch" as const, allowed: [61], allow_inactive: false },
      ],
      note_count: null,
      regenerate: null,
    };
    await expect(api.generate(spec, { seed: 1 })).rejects.toMatchObject({
      status: 422,
      body: { code: "infeasible", detail: { row: 1 } },
    });
  }, 120_000);
});
