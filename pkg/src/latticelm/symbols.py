"""Word symbol tables (Kaldi words.txt convention)."""

from __future__ import annotations

EPS = "<eps>"
UNK = "<unk>"
BOS_SYM = "<s>"
EOS_SYM = "</s>"


class SymbolTableError(ValueError):
    pass


class SymbolTable:
    """Bidirectional word string <-> integer id mapping.

    Id 0 is reserved for the epsilon symbol. The table must contain an
    out-of-vocabulary token <unk>. Immutable after construction.
    """

    def __init__(self, entries):
        self._sym2id: dict[str, int] = {}
        self._id2sym: dict[int, str] = {}
        self._entries = tuple(entries)
        for sym, idx in self._entries:
            if sym in self._sym2id:
                raise SymbolTableError(f"duplicate symbol: {sym!r}")
            if idx in self._id2sym:
                raise SymbolTableError(f"duplicate id: {idx}")
            if idx < 0:
                raise SymbolTableError(f"negative id for {sym!r}: {idx}")
            self._sym2id[sym] = idx
            self._id2sym[idx] = sym
        if self._sym2id.get(EPS) != 0:
            raise SymbolTableError(f"table must map {EPS} to id 0")
        if UNK not in self._sym2id:
            raise SymbolTableError(f"table must contain {UNK}")

    def lookup(self, symbol: str) -> int:
        try:
            return self._sym2id[symbol]
        except KeyError:
            raise SymbolTableError(f"unknown symbol: {symbol!r}") from None

    def symbol(self, idx: int) -> str:
        try:
            return self._id2sym[idx]
        except KeyError:
            raise SymbolTableError(f"unknown id: {idx}") from None

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._sym2id

    def has_id(self, idx: int) -> bool:
        return idx in self._id2sym

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return iter(self._entries)

    def __eq__(self, other):
        return isinstance(other, SymbolTable) and self._entries == other._entries


def parse_symbols(text: str) -> SymbolTable:
    """Parse `symbol id` lines into a SymbolTable."""
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 2:
            raise SymbolTableError(f"line {lineno}: expected `symbol id`, got {line!r}")
        sym, id_str = fields
        try:
            idx = int(id_str)
        except ValueError:
            raise SymbolTableError(f"line {lineno}: non-integer id {id_str!r}") from None
        entries.append((sym, idx))
    return SymbolTable(entries)


def write_symbols(table: SymbolTable) -> str:
    return "".join(f"{sym} {idx}\n" for sym, idx in table.items())
