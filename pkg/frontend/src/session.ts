/** Editing session: current record, undo lineage, pending draft.
 *
 * The server is the source of truth; the client never mutates loop
 * data locally.  Every submitted edit creates a new record and pushes
 * the previous id onto the undo stack, so undo is a lineage walk of
 * re-fetches, not a local diff.
 */

import { ApiClient } from "./api.js";
import { PaintArgs, PaintKind, paintConstraint } from "./constraints.js";
import { EditSpecJson, LoopRecordJson, SamplerOptionsJson } from "./types.js";

export class EditSession {
  current: LoopRecordJson | null = null;
  readonly undoStack: string[] = [];
  draft: EditSpecJson | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly nNotes: number,
  ) {}

  get currentId(): string | null {
    return this.current?.id ?? null;
  }

  hasChanges(): boolean {
    return this.draft !== null;
  }

  async load(id: string): Promise<LoopRecordJson> {
    this.current = await this.api.getLoop(id);
    this.draft = null;
    return this.current;
  }

  /** Accumulate a paint gesture into the draft spec. */
  paint(kind: PaintKind, args: PaintArgs): EditSpecJson {
    const delta = paintConstraint(kind, args, this.current?.loop ?? null, this.nNotes);
    if (this.draft === null) {
      this.draft = delta;
    } else {
      this.draft = {
        base: delta.base ?? this.draft.base,
        constraints: [...this.draft.constraints, ...delta.constraints],
        note_count: delta.note_count ?? this.draft.note_count,
        regenerate: mergeRegenerate(this.draft, delta),
      };
    }
    return this.draft;
  }

  clearDraft(): void {
    this.draft = null;
  }

  /** Submit the pending draft; no-op (guard) when nothing changed. */
  async submit(sampler: SamplerOptionsJson = {}): Promise<LoopRecordJson | null> {
    if (!this.hasChanges()) {
      return null;
    }
    const record = await this.api.generate(this.draft, sampler);
    this.pushCurrent();
    this.current = record;
    this.draft = null;
    return record;
  }

  /** Run a named server-side action on the current loop. */
  async runAction(
    action: string,
    args: Record<string, unknown>,
    sampler: SamplerOptionsJson = {},
  ): Promise<LoopRecordJson> {
    if (this.current === null) {
      const record = await this.api.generate(null, sampler);
      this.current = record;
      return record;
    }
    const record = await this.api.edit(this.current.id, action, args, sampler);
    this.pushCurrent();
    this.current = record;
    this.draft = null;
    return record;
  }

  /** Generate from scratch (seeds the session). */
  async generateFresh(sampler: SamplerOptionsJson = {}): Promise<LoopRecordJson> {
    const record = await this.api.generate(null, sampler);
    this.pushCurrent();
    this.current = record;
    this.draft = null;
    return record;
  }

  canUndo(): boolean {
    return this.undoStack.length > 0;
  }

  /** Walk one step back along the lineage (re-fetching the record). */
  async undo(): Promise<LoopRecordJson | null> {
    const previous = this.undoStack.pop();
    if (previous === undefined) {
      return null;
    }
    this.current = await this.api.getLoop(previous);
    this.draft = null;
    return this.current;
  }

  private pushCurrent(): void {
    if (this.current !== null) {
      this.undoStack.push(this.current.id);
    }
  }
}

function mergeRegenerate(a: EditSpecJson, b: EditSpecJson) {
  if (a.regenerate === null) return b.regenerate;
  if (b.regenerate === null) return a.regenerate;
  const slotsOf = (spec: EditSpecJson) =>
    spec.regenerate!.selector.kind === "slots"
      ? (spec.regenerate!.selector as { slots: number[] }).slots
      : null;
  const sa = slotsOf(a);
  const sb = slotsOf(b);
  if (sa === null || sb === null) return b.regenerate;
  const slots = [...new Set([...sa, ...sb])].sort((x, y) => x - y);
  const attrs =
    a.regenerate.attributes === null || b.regenerate.attributes === null
      ? null
      : [...new Set([...a.regenerate.attributes, ...b.regenerate.attributes])].sort();
  return { selector: { kind: "slots" as const, slots }, attributes: attrs };
}
