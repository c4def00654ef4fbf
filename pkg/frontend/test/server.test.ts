import * as net from "node:net";
import { Writable } from "node:stream";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { TinyLm } from "../src/model.js";
import {
  BatchScoreResponse,
  ErrorResponse,
  Message,
  SaveMemsResponse,
  ScoreResponse,
  decode,
  encode,
} from "../src/protocol.js";
import { MemsStore, TlmServer } from "../src/server.js";
import { parseSymbols } from "../src/tokenizer.js";

const SYMBOLS = "<eps> 0\n<unk> 1\nso 2\ndoes 3\nit 4\nsodas 5\n";

function makeServer(options = {}): { server: TlmServer; logged: string[] } {
  const logged: string[] = [];
  const logStream = new Writable({
    write(chunk, _enc, done) {
      logged.push(chunk.toString());
      done();
    },
  });
  const model = new TinyLm(parseSymbols(SYMBOLS), {
    layers: 2, width: 32, heads: 2, memLen: 16, seed: 5,
  });
  return { server: new TlmServer(model, { logStream, ...options }), logged };
}

describe("dispatch", () => {
  it("score responds with the model logprob", () => {
    const { server } = makeServer();
    const resp = server.dispatch(
      encode({ type: "score", id: 1, context: ["so"], word: "does" }),
    ) as ScoreResponse;
    expect(resp.type).toBe("score_resp");
    expect(resp.id).toBe(1);
    expect(resp.logprob).toBe(server.model.score(["so"], "does", null));
  });

  it("batch equals elementwise single scores", () => {
    const { server } = makeServer();
    const items = [
      { context: ["so"], word: "does" },
      { context: [], word: "it" },
      { context: ["so", "does"], word: "</s>" },
    ];
    const batch = server.dispatch(
      encode({ type: "batch", id: 2, items }),
    ) as BatchScoreResponse;
    const singles = items.map((item, i) => (server.dispatch(
      encode({ type: "score", id: 10 + i, ...item }),
    ) as ScoreResponse).logprob);
    expect(batch.logprobs).toEqual(singles);
  });

  it("batch items are independent of co-batched items", () => {
    const { server } = makeServer();
    const target = { context: ["so", "does"], word: "it" };
    const alone = server.dispatch(
      encode({ type: "batch", id: 1, items: [target] }),
    ) as BatchScoreResponse;
    const crowded = server.dispatch(
      encode({
        type: "batch",
        id: 2,
        items: [
          { context: ["sodas", "sodas", "sodas"], word: "sodas" },
          target,
          { context: [], word: "</s>" },
        ],
      }),
    ) as BatchScoreResponse;
    expect(crowded.logprobs[1]).toBe(alone.logprobs[0]);
  });

  it("save then score equals concatenated context", () => {
    const { server } = makeServer();
    const saved = server.dispatch(
      encode({ type: "save_mems", id: 1, context: ["so", "does"] }),
    ) as SaveMemsResponse;
    const withMems = server.dispatch(
      encode({
        type: "score", id: 2, context: ["it"], word: "sodas",
        mems_id: saved.mems_id,
      }),
    ) as ScoreResponse;
    const concat = server.dispatch(
      encode({ type: "score", id: 3, context: ["so", "does", "it"], word: "sodas" }),
    ) as ScoreResponse;
    expect(withMems.logprob).toBe(concat.logprob);
  });

  it("unknown mems_id yields unknown_mems", () => {
    const { server } = makeServer();
    const resp = server.dispatch(
      encode({ type: "score", id: 1, context: [], word: "so", mems_id: "m99" }),
    ) as ErrorResponse;
    expect(resp.type).toBe("error");
    expect(resp.code).toBe("unknown_mems");
    expect(resp.id).toBe(1);
  });

  it("oversized batches yield batch_too_large", () => {
    const { server } = makeServer({ maxBatch: 2 });
    const items = Array.from({ length: 3 }, () => ({ context: [], word: "so" }));
    const resp = server.dispatch(
      encode({ type: "batch", id: 1, items }),
    ) as ErrorResponse;
    expect(resp.code).toBe("batch_too_large");
  });

  it("malformed frames yield bad_request", () => {
    const { server } = makeServer();
    const resp = server.dispatch("{broken") as ErrorResponse;
    expect(resp.type).toBe("error");
    expect(resp.code).toBe("bad_request");
    expect(resp.id).toBe(null);
  });

  it("same requests give identical responses across restarts", () => {
    const frames = [
      encode({ type: "save_mems", id: 1, context: ["so", "does"] }),
      encode({ type: "score", id: 2, context: ["it"], word: "sodas", mems_id: "m0" }),
      encode({ type: "batch", id: 3, items: [{ context: [], word: "so" }] }),
    ];
    const runA = makeServer().server;
    const runB = makeServer().server;
    for (const frame of frames) {
      expect(runA.dispatch(frame)).toEqual(runB.dispatch(frame));
    }
  });

  it("writes one JSON log line per request", () => {
    const { server, logged } = makeServer();
    server.dispatch(encode({ type: "score", id: 1, context: [], word: "so" }));
    server.dispatch(encode({
      type: "batch", id: 2,
      items: [{ context: [], word: "so" }, { context: [], word: "it" }],
    }));
    const lines = logged.map((line) => JSON.parse(line));
    expect(lines[0].method).toBe("score");
    expect(lines[1].method).toBe("batch");
    expect(lines[1].batch_size).toBe(2);
    for (const line of lines) expect(line.latency_us).toBeGreaterThanOrEqual(0);
  });
});

describe("mems store", () => {
  const mems = () => ({ layers: [[[1, 2]]], finals: [[1, 2]] });

  it("evicts the oldest entry past capacity", () => {
    const store = new MemsStore(2);
    const a = store.save(mems());
    const b = store.save(mems());
    const c = store.save(mems());
    expect(store.get(a)).toBe(null);
    expect(store.get(b)).not.toBe(null);
    expect(store.get(c)).not.toBe(null);
  });

  it("lookup refreshes recency", () => {
    const store = new MemsStore(2);
    const a = store.save(mems());
    const b = store.save(mems());
    store.get(a);
    store.save(mems());
    expect(store.get(a)).not.toBe(null);
    expect(store.get(b)).toBe(null);
  });

  it("never reuses ids", () => {
    const store = new MemsStore(2);
    const seen = new Set<string>();
    for (let i = 0; i < 10; i++) {
      const id = store.save(mems());
      expect(seen.has(id)).toBe(false);
      seen.add(id);
    }
  });
});

describe("socket round trips", () => {
  let server: TlmServer;
  let address: net.AddressInfo;

  beforeEach(async () => {
    server = makeServer().server;
    address = await server.listen("127.0.0.1", 0);
  });

  afterEach(async () => {
    await server.close();
  });

  function roundtrip(frames: Buffer[]): Promise<Message[]> {
    return new Promise((resolve, reject) => {
      const socket = net.createConnection(address.port, address.address);
      const replies: Message[] = [];
      let buffer = "";
      socket.on("connect", () => {
        for (const frame of frames) socket.write(frame);
      });
      socket.on("data", (chunk) => {
        buffer += chunk.toString("utf-8");
        let newline: number;
        while ((newline = buffer.indexOf("\n")) >= 0) {
          replies.push(decode(buffer.slice(0, newline)));
          buffer = buffer.slice(newline + 1);
        }
        if (replies.length === frames.length) {
          socket.end();
          resolve(replies);
        }
      });
      socket.on("error", reject);
    });
  }

  it("serves scores over TCP", async () => {
    const [reply] = await roundtrip([
      encode({ type: "score", id: 1, context: ["so"], word: "does" }),
    ]);
    expect((reply as ScoreResponse).logprob).toBe(
      server.model.score(["so"], "does", null));
  });

  it("handles pipelined frames and split packets", async () => {
    const frames = Array.from({ length: 5 }, (_, i) =>
      encode({ type: "score", id: i, context: [], word: "so" }));
    const replies = await roundtrip(frames);
    expect(replies.map((r) => (r as ScoreResponse).id)).toEqual([0, 1, 2, 3, 4]);
    const logprobs = new Set(replies.map((r) => (r as ScoreResponse).logprob));
    expect(logprobs.size).toBe(1);
  });

  it("keeps serving after a bad frame", async () => {
    const replies = await roundtrip([
      Buffer.from("{broken\n"),
      encode({ type: "score", id: 2, context: [], word: "so" }),
    ]);
    expect((replies[0] as ErrorResponse).code).toBe("bad_request");
    expect((replies[1] as ScoreResponse).id).toBe(2);
  });
});
