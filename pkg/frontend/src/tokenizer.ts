/** Word-level tokenizer built from a `symbol id` vocabulary file.
 *
 * The epsilon symbol is excluded from the model vocabulary (it is a lattice
 * artifact, never a predictable token); begin/end sentence markers are added
 * if the file does not list them. Unknown words map to `<unk>`.
 */

import { readFileSync } from "node:fs";

export const EPS_SYM = "<eps>";
export const UNK_SYM = "<unk>";
export const BOS_SYM = "<s>";
export const EOS_SYM = "</s>";

export class Tokenizer {
  readonly tokens: string[];
  private readonly ids = new Map<string, number>();
  readonly unkId: number;
  readonly bosId: number;
  readonly eosId: number;

  constructor(symbols: string[]) {
    const seen = new Set(symbols);
    if (!seen.has(UNK_SYM)) {
      throw new Error(`vocabulary is missing ${UNK_SYM}`);
    }
    this.tokens = symbols.filter((s) => s !== EPS_SYM);
    for (const special of [BOS_SYM, EOS_SYM]) {
      if (!seen.has(special)) this.tokens.push(special);
    }
    this.tokens.forEach((tok, i) => this.ids.set(tok, i));
    this.unkId = this.ids.get(UNK_SYM)!;
    this.bosId = this.ids.get(BOS_SYM)!;
    this.eosId = this.ids.get(EOS_SYM)!;
  }

  get size(): number {
    return this.tokens.length;
  }

  id(word: string): number {
    return this.ids.get(word) ?? this.unkId;
  }

  encode(words: readonly string[]): number[] {
    return words.map((w) => this.id(w));
  }
}

export function parseSymbols(text: string): Tokenizer {
  const symbols: string[] = [];
  const byId: Array<[number, string]> = [];
  for (const [lineno, raw] of text.split("\n").entries()) {
    const line = raw.trim();
    if (!line) continue;
    const fields = line.split(/\s+/);
    if (fields.length !== 2 || !/^\d+$/.test(fields[1])) {
      throw new Error(`symbols line ${lineno + 1}: expected 'symbol id'`);
    }
    byId.push([parseInt(fields[1], 10), fields[0]]);
  }
  byId.sort((a, b) => a[0] - b[0]);
  for (const [, sym] of byId) symbols.push(sym);
  return new Tokenizer(symbols);
}

export function loadSymbols(path: string): Tokenizer {
  return parseSymbols(readFileSync(path, "utf-8"));
}
