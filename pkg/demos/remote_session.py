"""Narrative walkthrough: remote scoring with batching and conversation memory.

Starts the ARPA scoring server in-process, rescoring a two-utterance
conversation where the first utterance's transcript becomes memory for the
second.

Run with: python3 demos/remote_session.py
"""

import io

from latticelm.client import (Connection, RemoteBackend, SessionState,
                              batch_prefetch, session_commit)
from latticelm.fixtures import fixture_arpa, fixture_lattice, fixture_symbols, stamp_lm_costs
from latticelm.lm import CachedBackend
from latticelm.rescore import best_path, rescore
from latticelm.server import LmServer

symbols = fixture_symbols()
model = fixture_arpa(4)

server = LmServer(model, log_stream=io.StringIO())
server.start_background()
print(f"server listening on {server.address[0]}:{server.address[1]}")

conn = Connection(*server.address)
session = SessionState("conversation-1")

lat = stamp_lm_costs(fixture_lattice(), fixture_arpa(2), symbols, 2)

# Utterance 1: batched prefetch gathers every query the rescorer will make
# and fetches them in one round trip, then rescoring runs cache-only.
cache = batch_prefetch(lat, order=4, connection=conn, symbols=symbols, session=session)
first = rescore(lat, CachedBackend(None, cache), order=4)
best1 = best_path(first, 1.0)
print("utterance 1 best path:", " ".join(symbols.symbol(w) for w in best1.words))

# Commit the transcript as conversation memory for the next utterance.
session_commit(best1, conn, symbols, session)
print("committed memory id:", session.current_mems_id)

# Utterance 2: same lattice, but now the LM sees the previous transcript as
# context, so the scores (and potentially the best path) change.
backend = RemoteBackend(conn, symbols, session)
second = rescore(lat, backend, order=4)
best2 = best_path(second, 1.0)
print("utterance 2 best path:", " ".join(symbols.symbol(w) for w in best2.words))
print(f"utterance 1 lm cost {best1.lm_cost:.4f} vs with memory {best2.lm_cost:.4f}")

conn.close()
server.shutdown()
