/**
 * Wire types for the engine's newline-delimited JSON-RPC endpoint.
 * Line spans are 1-based and inclusive, matching the engine.
 */

export interface EditPayload {
  file: string;
  line_start: number;
  line_end: number;
  code_before: string[];
  code_after: string[];
}

export interface Suggestion {
  id: string;
  file: string;
  span: [number, number];
  pre_lines: string[];
  post_lines: string[] | null;
  confidence: number;
  provenance: "tool" | "neural";
  service: string | null;
}

export interface StepResult {
  revision: number;
  suggestions: Suggestion[];
}

export interface RpcRequest {
  jsonrpc: "2.0";
  id: number;
  method: string;
  params: unknown;
}

export interface RpcError {
  code: number;
  message: string;
}

export interface RpcResponse {
  jsonrpc: "2.0";
  id: number;
  result?: unknown;
  error?: RpcError;
}

export class EngineError extends Error {
  constructor(public readonly code: number, message: string) {
    super(message);
    this.name = "EngineError";
  }
}

/** Engine-side code for a suggestion whose pre-code no longer matches. */
export const STALE_SUGGESTION = -32010;
