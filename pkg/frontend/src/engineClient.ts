/**
 * Newline-delimited JSON-RPC client for a local engine process (stdio or any
 * socket-like stream pair). Requests are correlated by id; the transport is
 * strictly ordered so responses resolve in arrival order.
 */
import { ChildProcess, spawn } from "node:child_process";
import { Readable, Writable } from "node:stream";

import {
  EditPayload,
  EngineError,
  RpcRequest,
  RpcResponse,
  StepResult,
} from "./protocol.js";

interface Pending {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
}

export class EngineClient {
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private buffer = "";
  private proc: ChildProcess | null = null;

  constructor(private readonly input: Writable, output: Readable) {
    output.setEncoding("utf-8");
    output.on("data", (chunk: string) => this.onData(chunk));
    output.on("close", () => this.failAll(new Error("engine stream closed")));
  }

  /** Spawn the engine as a child process speaking stdio. */
  static spawn(command: string, args: string[] = ["-m", "nextedit.cli", "serve", "--stdio"]): EngineClient {
    const proc = spawn(command, args, { stdio: ["pipe", "pipe", "inherit"] });
    if (!proc.stdin || !proc.stdout) {
      throw new Error("engine process has no stdio");
    }
    const client = new EngineClient(proc.stdin, proc.stdout);
    client.proc = proc;
    return client;
  }

  dispose(): void {
    this.failAll(new Error("client disposed"));
    this.proc?.kill();
    this.proc = null;
  }

  private onData(chunk: string): void {
    this.buffer += chunk;
    let nl: number;
    while ((nl = this.buffer.indexOf("\n")) >= 0) {
      const line = this.buffer.slice(0, nl).trim();
      this.buffer = this.buffer.slice(nl + 1);
      if (!line) continue;
      let message: RpcResponse;
      try {
        message = JSON.parse(line) as RpcResponse;
      } catch {
        continue;
      }
      const waiter = this.pending.get(message.id);
      if (!waiter) continue;
      this.pending.delete(message.id);
      if (message.error) {
        waiter.reject(new EngineError(message.error.code, message.error.message));
      } else {
        waiter.resolve(message.result);
      }
    }
  }

  private failAll(err: Error): void {
    for (const waiter of this.pending.values()) waiter.reject(err);
    this.pending.clear();
  }

  request<T>(method: string, params: unknown): Promise<T> {
    const id = this.nextId++;
    const message: RpcRequest = { jsonrpc: "2.0", id, method, params };
    return new Promise<T>((resolve, reject) => {
      this.pending.set(id, { resolve: resolve as (v: unknown) => void, reject });
      this.input.write(JSON.stringify(message) + "\n", (err) => {
        if (err) {
          this.pending.delete(id);
          reject(err);
        }
      });
    });
  }

  initialize(projectFiles: Record<string, string>, language = "python", prompt?: string) {
    return this.request<{ revision: number; files: string[] }>("initialize", {
      project_files: projectFiles,
      language,
      prompt,
    });
  }

  edit(edit: EditPayload, revision: number) {
    return this.request<{ revision: number }>("edit", { edit, revision });
  }

  step(k: number, revision: number) {
    return this.request<StepResult>("step", { k, revision });
  }

  accept(id: string, revision: number) {
    return this.request<{ revision: number; applied: EditPayload }>("accept", {
      id,
      revision,
    });
  }

  reject(id: string) {
    return this.request<{ ok: boolean }>("reject", { id });
  }

  sessionInfo() {
    return this.request<{ revision: number; prior_edits: number }>("session", {});
  }

  shutdown() {
    return this.request<Record<string, never>>("shutdown", {});
  }
}
