/**
 * Editor-session controller: mirrors buffers, streams coalesced edits to the
 * engine, and manages the suggestion lifecycle.
 *
 * Rules the controller enforces:
 *  - the engine is the source of truth; accept applies the candidate through
 *    the engine's apply path and the local buffer follows the response;
 *  - a suggestion is never shown or applied when its pre-code no longer
 *    matches the live buffer (staleness guard);
 *  - a rejected suggestion stays suppressed for its (file, span) until the
 *    next prior edit;
 *  - engine responses only apply when their revision matches the local one
 *    (optimistic concurrency).
 */
import { EngineClient } from "./engineClient.js";
import { EditPayload, Suggestion } from "./protocol.js";

export interface BufferChange {
  file: string;
  /** 1-based inclusive pre-change span; lineEnd = lineStart - 1 inserts. */
  lineStart: number;
  lineEnd: number;
  newLines: string[];
}

export interface SessionOptions {
  debounceMs?: number;
  maxSuggestions?: number;
}

interface PendingRegion {
  file: string;
  /** current-coordinate span covered by the coalesced edit */
  lo: number;
  hi: number;
  /** pre-change lines of the original region */
  before: string[];
}

export type SuggestionListener = (suggestions: Suggestion[]) => void;

export class SessionController {
  private buffers = new Map<string, string[]>();
  private revision = 0;
  private pendingRegion: PendingRegion | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private flushWaiters: Array<() => void> = [];
  private suggestions: Suggestion[] = [];
  private suppressed = new Set<string>();
  private listeners: SuggestionListener[] = [];
  private errorListeners: Array<(err: Error) => void> = [];
  private disposed = false;
  /** set while the engine is unreachable; cleared by the next success */
  lastError: Error | null = null;
  private readonly debounceMs: number;
  private readonly maxSuggestions: number;

  constructor(private readonly engine: EngineClient, options: SessionOptions = {}) {
    this.debounceMs = options.debounceMs ?? 300;
    this.maxSuggestions = options.maxSuggestions ?? 5;
  }

  async open(projectFiles: Record<string, string>, language = "python", prompt?: string) {
    const result = await this.engine.initialize(projectFiles, language, prompt);
    this.revision = result.revision;
    this.buffers.clear();
    for (const [file, text] of Object.entries(projectFiles)) {
      const lines = text.split("\n");
      if (lines.length && lines[lines.length - 1] === "") lines.pop();
      this.buffers.set(file, lines);
    }
  }

  onSuggestions(listener: SuggestionListener): void {
    this.listeners.push(listener);
  }

  onError(listener: (err: Error) => void): void {
    this.errorListeners.push(listener);
  }

  dispose(): void {
    this.disposed = true;
    if (this.timer) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pendingRegion = null;
    const waiters = this.flushWaiters;
    this.flushWaiters = [];
    for (const resolve of waiters) resolve();
  }

  bufferLines(file: string): string[] {
    return [...(this.buffers.get(file) ?? [])];
  }

  currentSuggestions(): Suggestion[] {
    return this.visible();
  }

  /** Host calls this for every buffer change event. */
  recordChange(change: BufferChange): void {
    const lines = this.buffers.get(change.file);
    if (!lines) throw new Error(`unknown buffer ${change.file}`);
    const before = lines.slice(change.lineStart - 1, change.lineEnd);
    lines.splice(change.lineStart - 1, before.length, ...change.newLines);

    this.coalesce(change, before);
    // a live mutation immediately withdraws any suggestion it invalidated
    this.publish();
    if (this.timer) clearTimeout(this.timer);
    this.timer = setTimeout(() => void this.flush(), this.debounceMs);
  }

  private coalesce(change: BufferChange, before: string[]): void {
    const delta = change.newLines.length - before.length;
    const changeLo = change.lineStart;
    const changeHi = change.lineStart + Math.max(change.newLines.length, 1) - 1;
    const region = this.pendingRegion;
    if (region && region.file === change.file) {
      const touches = changeLo <= region.hi + 1 && region.lo - 1 <= changeHi;
      if (touches) {
        if (changeLo < region.lo) {
          const extra = before.slice(0, Math.min(region.lo - changeLo, before.length));
          region.before = [...extra, ...region.before];
          region.lo = changeLo;
        }
        if (change.lineEnd > region.hi) {
          const extraCount = change.lineEnd - region.hi;
          region.before = [...region.before, ...before.slice(before.length - extraCount)];
        }
        region.hi = Math.max(region.hi + delta, changeHi);
        return;
      }
      // disjoint edit: flush the previous region right away
      void this.flush();
    }
    this.pendingRegion = {
      file: change.file,
      lo: changeLo,
      hi: change.lineStart + change.newLines.length - 1,
      before,
    };
  }

  /** Waits until queued changes are posted and suggestions refreshed. */
  whenIdle(): Promise<void> {
    if (!this.pendingRegion && !this.timer) return Promise.resolve();
    return new Promise((resolve) => this.flushWaiters.push(resolve));
  }

  private async flush(): Promise<void> {
    if (this.timer) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (this.disposed) return;
    const region = this.pendingRegion;
    this.pendingRegion = null;
    if (region) {
      const lines = this.buffers.get(region.file)!;
      const after = lines.slice(region.lo - 1, Math.max(region.hi, region.lo - 1));
      const edit: EditPayload = {
        file: region.file,
        line_start: region.lo,
        line_end: region.lo + region.before.length - 1,
        code_before: region.before,
        code_after: after,
      };
      try {
        const result = await this.engine.edit(edit, this.revision);
        this.revision = result.revision;
        this.lastError = null;
        this.suppressed.clear(); // suppression lasts until the next prior edit
        await this.refreshSuggestions();
      } catch (err) {
        // engine unreachable or out of sync: keep the event queued so no
        // data is lost, surface the state to the host
        this.pendingRegion = region;
        this.lastError = err as Error;
        for (const listener of this.errorListeners) listener(this.lastError);
      }
    }
    const waiters = this.flushWaiters;
    this.flushWaiters = [];
    for (const resolve of waiters) resolve();
  }

  private async refreshSuggestions(): Promise<void> {
    const asked = this.revision;
    const result = await this.engine.step(this.maxSuggestions, asked);
    if (result.revision !== this.revision) return; // stale response: discard
    this.suggestions = result.suggestions;
    this.publish();
  }

  private isStale(s: Suggestion): boolean {
    const lines = this.buffers.get(s.file);
    if (!lines) return true;
    const current = lines.slice(s.span[0] - 1, s.span[1]);
    return (
      current.length !== s.pre_lines.length ||
      current.some((line, i) => line !== s.pre_lines[i])
    );
  }

  private visible(): Suggestion[] {
    return this.suggestions.filter(
      (s) => !this.isStale(s) && !this.suppressed.has(suppressKey(s))
    );
  }

  private publish(): void {
    const visible = this.visible();
    for (const listener of this.listeners) listener(visible);
  }

  async accept(id: string): Promise<EditPayload> {
    const suggestion = this.suggestions.find((s) => s.id === id);
    if (!suggestion) throw new Error(`unknown suggestion ${id}`);
    if (this.isStale(suggestion)) {
      throw new Error("suggestion is stale: buffer changed underneath it");
    }
    if (!suggestion.post_lines) {
      throw new Error("suggestion carries no content to apply");
    }
    const result = await this.engine.accept(id, this.revision);
    this.revision = result.revision;
    const applied = result.applied;
    const lines = this.buffers.get(applied.file)!;
    lines.splice(
      applied.line_start - 1,
      applied.code_before.length,
      ...applied.code_after
    );
    this.suppressed.clear();
    await this.refreshSuggestions(); // an accepted edit feeds the next step
    return applied;
  }

  async reject(id: string): Promise<void> {
    const suggestion = this.suggestions.find((s) => s.id === id);
    if (!suggestion) return;
    await this.engine.reject(id);
    this.suppressed.add(suppressKey(suggestion));
    this.suggestions = this.suggestions.filter((s) => s.id !== id);
    this.publish();
  }
}

function suppressKey(s: Suggestion): string {
  return `${s.file}:${s.span[0]}:${s.span[1]}`;
}
