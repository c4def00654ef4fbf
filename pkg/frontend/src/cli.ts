#!/usr/bin/env node
/** `tlm-server serve`: run the tiny transformer scoring server.
 *
 * Exit codes: 0 success, 1 usage, 2 model/vocab load failure, 3 bind failure.
 */

import { parseArgs } from "node:util";

import { DEFAULT_CONFIG, TinyLm } from "./model.js";
import { DEFAULT_MAX_BATCH } from "./protocol.js";
import { DEFAULT_CAPACITY, TlmServer } from "./server.js";
import { loadSymbols } from "./tokenizer.js";

function parseAddress(address: string): { host: string; port: number } {
  const split = address.lastIndexOf(":");
  const host = split > 0 ? address.slice(0, split) : "127.0.0.1";
  const port = parseInt(address.slice(split + 1), 10);
  if (Number.isNaN(port)) throw new Error(`bad address ${JSON.stringify(address)}`);
  return { host, port };
}

const USAGE = `usage: tlm-server serve --symbols VOCAB [options]
  --address HOST:PORT   listen address (default 127.0.0.1:9090; port 0 = ephemeral)
  --seed N              weight initialization seed (default 0)
  --layers N            transformer layers (default ${DEFAULT_CONFIG.layers})
  --width N             model width (default ${DEFAULT_CONFIG.width})
  --heads N             attention heads (default ${DEFAULT_CONFIG.heads})
  --mem-len N           cached memory positions (default ${DEFAULT_CONFIG.memLen})
  --capacity N          memory store capacity (default ${DEFAULT_CAPACITY})
  --max-batch N         batch request limit (default ${DEFAULT_MAX_BATCH})`;

export async function main(argv: string[]): Promise<number> {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        symbols: { type: "string" },
        address: { type: "string", default: "127.0.0.1:9090" },
        seed: { type: "string", default: "0" },
        layers: { type: "string", default: String(DEFAULT_CONFIG.layers) },
        width: { type: "string", default: String(DEFAULT_CONFIG.width) },
        heads: { type: "string", default: String(DEFAULT_CONFIG.heads) },
        "mem-len": { type: "string", default: String(DEFAULT_CONFIG.memLen) },
        capacity: { type: "string", default: String(DEFAULT_CAPACITY) },
        "max-batch": { type: "string", default: String(DEFAULT_MAX_BATCH) },
      },
    });
  } catch (e) {
    console.error(`error: ${(e as Error).message}\n${USAGE}`);
    return 1;
  }
  const { values, positionals } = parsed;
  if (positionals.length !== 1 || positionals[0] !== "serve" || !values.symbols) {
    console.error(USAGE);
    return 1;
  }

  let model: TinyLm;
  try {
    const tokenizer = loadSymbols(values.symbols);
    model = new TinyLm(tokenizer, {
      layers: parseInt(values.layers!, 10),
      width: parseInt(values.width!, 10),
      heads: parseInt(values.heads!, 10),
      memLen: parseInt(values["mem-len"]!, 10),
      seed: parseInt(values.seed!, 10),
    });
  } catch (e) {
    console.error(`model load failed: ${(e as Error).message}`);
    return 2;
  }

  const server = new TlmServer(model, {
    capacity: parseInt(values.capacity!, 10),
    maxBatch: parseInt(values["max-batch"]!, 10),
  });
  let address;
  try {
    const { host, port } = parseAddress(values.address!);
    address = await server.listen(host, port);
  } catch (e) {
    console.error(`bind failed: ${(e as Error).message}`);
    return 3;
  }
  console.error(`listening on ${address.address}:${address.port}`);

  await new Promise<void>((resolve) => {
    const stop = () => server.close().then(resolve);
    process.on("SIGINT", stop);
    process.on("SIGTERM", stop);
  });
  return 0;
}

const entry = process.argv[1];
if (entry && (entry.endsWith("cli.js") || entry.endsWith("tlm-server"))) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
