/** Newline-delimited JSON message layer for remote LM scoring.
 *
 * One message per frame: a UTF-8 JSON object terminated by LF. The `type`
 * field selects the message kind; unknown fields are ignored on decode.
 * Words travel as strings; the EOS sentinel is the literal "</s>".
 */

import { z } from "zod";

export const EOS_SENTINEL = "</s>";

export const BAD_REQUEST = "bad_request";
export const UNKNOWN_MEMS = "unknown_mems";
export const BATCH_TOO_LARGE = "batch_too_large";

export const DEFAULT_MAX_BATCH = 1024;

export class ProtocolError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly reqId: number | null = null,
  ) {
    super(`${code}: ${message}`);
  }
}

export interface ScoreRequest {
  type: "score";
  id: number;
  context: string[];
  word: string;
  mems_id?: string;
}

export interface BatchScoreRequest {
  type: "batch";
  id: number;
  items: Array<{ context: string[]; word: string }>;
  common_mems_id?: string;
}

export interface SaveMemsRequest {
  type: "save_mems";
  id: number;
  context: string[];
  mems_id?: string;
}

export interface ScoreResponse {
  type: "score_resp";
  id: number;
  logprob: number;
}

export interface BatchScoreResponse {
  type: "batch_resp";
  id: number;
  logprobs: number[];
}

export interface SaveMemsResponse {
  type: "save_mems_resp";
  id: number;
  mems_id: string;
}

export interface ErrorResponse {
  type: "error";
  id: number | null;
  code: string;
  message: string;
}

export type Request = ScoreRequest | BatchScoreRequest | SaveMemsRequest;
export type Response =
  | ScoreResponse
  | BatchScoreResponse
  | SaveMemsResponse
  | ErrorResponse;
export type Message = Request | Response;

const word = z.string().min(1).refine((w) => !/\s/.test(w), {
  message: "words may not contain whitespace",
});
const context = z.array(word);
const reqId = z.number().int();

const scoreRequest = z.object({
  type: z.literal("score"),
  id: reqId,
  context,
  word: z.string(),
  mems_id: z.string().optional(),
});

const batchScoreRequest = z.object({
  type: z.literal("batch"),
  id: reqId,
  items: z.array(z.object({ context, word: z.string() })).min(1),
  common_mems_id: z.string().optional(),
});

const saveMemsRequest = z.object({
  type: z.literal("save_mems"),
  id: reqId,
  context,
  mems_id: z.string().optional(),
});

const scoreResponse = z.object({
  type: z.literal("score_resp"),
  id: reqId,
  logprob: z.number(),
});

const batchScoreResponse = z.object({
  type: z.literal("batch_resp"),
  id: reqId,
  logprobs: z.array(z.number()),
});

const saveMemsResponse = z.object({
  type: z.literal("save_mems_resp"),
  id: reqId,
  mems_id: z.string(),
});

const errorResponse = z.object({
  type: z.literal("error"),
  id: reqId.nullable().optional().transform((v) => v ?? null),
  code: z.string(),
  message: z.string().optional().transform((v) => v ?? ""),
});

const messageSchemas: Record<string, z.ZodType> = {
  score: scoreRequest,
  batch: batchScoreRequest,
  save_mems: saveMemsRequest,
  score_resp: scoreResponse,
  batch_resp: batchScoreResponse,
  save_mems_resp: saveMemsResponse,
  error: errorResponse,
};

export function encode(msg: Message): Buffer {
  return Buffer.from(JSON.stringify(msg) + "\n", "utf-8");
}

export function decode(frame: Buffer | string): Message {
  const text = typeof frame === "string" ? frame : frame.toString("utf-8");
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (e) {
    throw new ProtocolError(BAD_REQUEST, `malformed JSON: ${e}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolError(BAD_REQUEST, "frame is not a JSON object");
  }
  const record = obj as Record<string, unknown>;
  const id = typeof record.id === "number" && Number.isInteger(record.id)
    ? (record.id as number)
    : null;
  const mtype = record.type;
  if (typeof mtype !== "string" || !(mtype in messageSchemas)) {
    throw new ProtocolError(BAD_REQUEST, `unknown type tag ${JSON.stringify(mtype)}`, id);
  }
  if (id === null && mtype !== "error") {
    throw new ProtocolError(BAD_REQUEST, "missing or non-integer id");
  }
  const parsed = messageSchemas[mtype].safeParse(obj);
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    throw new ProtocolError(
      BAD_REQUEST,
      `${mtype}: ${issue.path.join(".")} ${issue.message}`,
      id,
    );
  }
  return parsed.data as Message;
}
