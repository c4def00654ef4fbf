/** TCP server exposing the tiny transformer over the newline-JSON protocol.
 *
 * Node's single-threaded event loop doubles as the single inference
 * executor: requests from all connections are dispatched one at a time, so
 * batch requests are processed atomically.
 */

import * as net from "node:net";

import { SegmentMems, TinyLm } from "./model.js";
import {
  BATCH_TOO_LARGE,
  BatchScoreRequest,
  DEFAULT_MAX_BATCH,
  ErrorResponse,
  Message,
  ProtocolError,
  Response,
  SaveMemsRequest,
  ScoreRequest,
  UNKNOWN_MEMS,
  decode,
  encode,
} from "./protocol.js";

export const DEFAULT_CAPACITY = 1024;

/** LRU map mems_id -> SegmentMems; ids are never reused. */
export class MemsStore {
  private readonly store = new Map<string, SegmentMems>();
  private nextId = 0;

  constructor(readonly capacity: number = DEFAULT_CAPACITY) {}

  get(memsId: string): SegmentMems | null {
    const mems = this.store.get(memsId);
    if (mems === undefined) return null;
    this.store.delete(memsId); // refresh recency
    this.store.set(memsId, mems);
    return mems;
  }

  save(mems: SegmentMems): string {
    const memsId = `m${this.nextId++}`;
    this.store.set(memsId, mems);
    while (this.store.size > this.capacity) {
      const oldest = this.store.keys().next().value as string;
      this.store.delete(oldest);
    }
    return memsId;
  }
}

export interface TlmServerOptions {
  maxBatch?: number;
  capacity?: number;
  logStream?: NodeJS.WritableStream;
}

export class TlmServer {
  readonly store: MemsStore;
  private readonly maxBatch: number;
  private readonly log: NodeJS.WritableStream;
  private readonly tcp: net.Server;

  constructor(readonly model: TinyLm, options: TlmServerOptions = {}) {
    this.store = new MemsStore(options.capacity ?? DEFAULT_CAPACITY);
    this.maxBatch = options.maxBatch ?? DEFAULT_MAX_BATCH;
    this.log = options.logStream ?? process.stderr;
    this.tcp = net.createServer((socket) => this.serveConnection(socket));
  }

  private resolveMems(memsId: string | undefined, reqId: number): SegmentMems | null {
    if (memsId === undefined) return null;
    const mems = this.store.get(memsId);
    if (mems === null) {
      throw new ProtocolError(UNKNOWN_MEMS, `unknown mems_id ${JSON.stringify(memsId)}`, reqId);
    }
    return mems;
  }

  handleScore(req: ScoreRequest): Response {
    const mems = this.resolveMems(req.mems_id, req.id);
    return {
      type: "score_resp",
      id: req.id,
      logprob: this.model.score(req.context, req.word, mems),
    };
  }

  handleBatch(req: BatchScoreRequest): Response {
    if (req.items.length > this.maxBatch) {
      throw new ProtocolError(
        BATCH_TOO_LARGE,
        `batch of ${req.items.length} exceeds max ${this.maxBatch}`,
        req.id,
      );
    }
    const mems = this.resolveMems(req.common_mems_id, req.id);
    return {
      type: "batch_resp",
      id: req.id,
      logprobs: req.items.map((item) => this.model.score(item.context, item.word, mems)),
    };
  }

  handleSaveMems(req: SaveMemsRequest): Response {
    const prior = this.resolveMems(req.mems_id, req.id);
    const mems = this.model.saveMems(req.context, prior);
    return { type: "save_mems_resp", id: req.id, mems_id: this.store.save(mems) };
  }

  dispatch(frame: Buffer | string): Response {
    const start = process.hrtime.bigint();
    let method: string;
    let batchSize = 1;
    let response: Response;
    try {
      const msg: Message = decode(frame);
      switch (msg.type) {
        case "score":
          method = "score";
          response = this.handleScore(msg);
          break;
        case "batch":
          method = "batch";
          batchSize = msg.items.length;
          response = this.handleBatch(msg);
          break;
        case "save_mems":
          method = "save_mems";
          response = this.handleSaveMems(msg);
          break;
        default:
          throw new ProtocolError(
            "bad_request",
            `unexpected message ${msg.type}`,
            "id" in msg ? msg.id : null,
          );
      }
    } catch (e) {
      if (!(e instanceof ProtocolError)) throw e;
      method = "error";
      const error: ErrorResponse = {
        type: "error",
        id: e.reqId,
        code: e.code,
        message: e.message.replace(/^[a-z_]+: /, ""),
      };
      response = error;
    }
    const latencyUs = Number((process.hrtime.bigint() - start) / 1000n);
    this.log.write(
      JSON.stringify({ method, batch_size: batchSize, latency_us: latencyUs }) + "\n",
    );
    return response;
  }

  private serveConnection(socket: net.Socket): void {
    let buffer = "";
    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf-8");
      let newline: number;
      while ((newline = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newline);
        buffer = buffer.slice(newline + 1);
        if (!line.trim()) continue;
        socket.write(encode(this.dispatch(line)));
      }
    });
    socket.on("error", () => socket.destroy());
  }

  listen(host: string, port: number): Promise<net.AddressInfo> {
    return new Promise((resolve, reject) => {
      this.tcp.once("error", reject);
      this.tcp.listen(port, host, () => {
        resolve(this.tcp.address() as net.AddressInfo);
      });
    });
  }

  close(): Promise<void> {
    return new Promise((resolve) => this.tcp.close(() => resolve()));
  }
}
