export { EngineClient } from "./engineClient.js";
export { SessionController } from "./session.js";
export type { BufferChange, SessionOptions, SuggestionListener } from "./session.js";
export type { EditPayload, StepResult, Suggestion } from "./protocol.js";
export { EngineError, STALE_SUGGESTION } from "./protocol.js";
