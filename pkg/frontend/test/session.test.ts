/** Session behaviour against a mocked service. */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { EditSession } from "../src/session.js";
import { LoopJson, LoopRecordJson } from "../src/types.js";

function makeLoop(pitch: number): LoopJson {
  return {
    notes: [{ instrument: 0, pitch, onset_beat: 0, onset_tick: 0,
              offset_beat: 1, offset_tick: 0, velocity: 10, tag: 0 }],
    tempo_bpm: 120,
    tags: [0],
  };
}

/** In-memory stand-in for the service with request counting. */
function mockService() {
  const records = new Map<string, LoopRecordJson>();
  let counter = 0;
  const calls: string[] = [];

  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    calls.push(`${init?.method ?? "GET"} ${input}`);
    const respond = (status: number, body: unknown) =>
      new Response(JSON.stringify(body), { status });

    const generate = input.endsWith("/v1/generate");
    const edit = /\/v1\/loops\/([^/]+)\/edit$/.exec(input);
    const get = /\/v1\/loops\/([^/]+)$/.exec(input);
    if (generate || edit) {
      const parent = edit ? edit[1] : null;
      if (parent !== null && !records.has(parent)) {
        return respond(404, { code: "unknown_loop", message: "no such record" });
      }
      counter += 1;
      const record: LoopRecordJson = {
        id: `r${counter}`,
        loop: makeLoop(60 + counter),
        created_at: counter,
        parent_id: parent,
        seed: counter,
      };
      records.set(record.id, record);
      return respond(200, record);
    }
    if (get) {
      const record = records.get(get[1]);
      return record
        ? respond(200, record)
        : respond(404, { code: "unknown_loop", message: "no such record" });
    }
    return respond(404, { code: "unknown_route", message: input });
  };

  return { api: new ApiClient("http://svc", fetchImpl), calls, records };
}

describe("EditSession", () => {
  it("submit with no changes sends no request", async () => {
    const { api, calls } = mockService();
    const session = new EditSession(api, 16);
    const result = await session.submit();
    expect(result).toBeNull();
    expect(calls).toHaveLength(0);
  });

  it("paint accumulates a draft and submit clears it", async () => {
    const { api } = mockService();
    const session = new EditSession(api, 16);
    await session.generateFresh();
    session.paint("scale", { root: 0, scale: "major" });
    expect(session.hasChanges()).toBe(true);
    const record = await session.submit();
    expect(record).not.toBeNull();
    expect(session.hasChanges()).toBe(false);
  });

  it("undo walks the lineage by re-fetching the parent", async () => {
    const { api, calls } = mockService();
    const session = new EditSession(api, 16);
    const first = await session.generateFresh();
    const second = await session.runAction("regenerate_instrument", { instrument: "drums" });
    expect(second.parent_id).toBe(first.id);
    expect(session.undoStack).toEqual([first.id]);

    const restored = await session.undo();
    expect(restored?.id).toBe(first.id);
    expect(session.currentId).toBe(first.id);
    expect(calls.at(-1)).toBe(`GET http://svc/v1/loops/${first.id}`);
    expect(session.canUndo()).toBe(false);
    expect(await session.undo()).toBeNull();
  });

  it("multi-step undo unwinds in reverse order", async () => {
    const { api } = mockService();
    const session = new EditSession(api, 16);
    const a = await session.generateFresh();
    const b = await session.runAction("set_density", { min: 2, max: 6 });
    await session.runAction("humanize_velocity", {});
    expect((await session.undo())?.id).toBe(b.id);
    expect((await session.undo())?.id).toBe(a.id);
  });

  it("merges painted regenerate slot sets in the draft", async () => {
    const { api } = mockService();
    const session = new EditSession(api, 16);
    await session.generateFresh();
    session.paint("infill", { startBeat: 0, endBeat: 4 });
    const draft = session.paint("lock", { instrument: 17 });
    expect(draft.regenerate).not.toBeNull();
    expect(draft.constraints.length).toBeGreaterThanOrEqual(2);
  });
});
