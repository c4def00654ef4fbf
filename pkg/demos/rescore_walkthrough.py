"""Narrative walkthrough: lattices, rescoring, best path, oracle, and WER.

Run with: python3 demos/rescore_walkthrough.py
"""

import random

from latticelm.fixtures import (fixture_arpa, fixture_lattice, fixture_symbols,
                                random_lattice, stamp_lm_costs)
from latticelm.lattice import enumerate_paths, write_lattice
from latticelm.lm import ArpaBackend
from latticelm.rescore import best_path, oracle_path, rescore, wer

symbols = fixture_symbols()
bigram = fixture_arpa(2)
fourgram = fixture_arpa(4)

# The classic confusable pair: did the speaker say "so does" or "sodas"?
lat = stamp_lm_costs(fixture_lattice(), bigram, symbols, order=2)
print("First-pass lattice (bigram LM costs stamped on the arcs):")
print(write_lattice(lat))

print("All hypotheses with their costs (lm, ac) in nats:")
for path in enumerate_paths(lat).paths:
    words = " ".join(symbols.symbol(w) for w in path.words)
    print(f"  {words:12s} lm={path.lm_cost:.4f} ac={path.ac_cost:.4f} "
          f"total={path.total(1.0):.4f}")

# Second pass: replace the bigram costs with a stronger 4-gram model.
second = rescore(lat, ArpaBackend(fourgram, symbols), order=4)
best = best_path(second, lm_scale=1.0)
print("\nAfter 4-gram rescoring the best path is:",
      " ".join(symbols.symbol(w) for w in best.words))

# The oracle path is the hypothesis closest to the reference - a lower
# bound on what any rescoring pass could achieve.
reference = (symbols.lookup("so"), symbols.lookup("does"))
path, counts = oracle_path(second, reference)
print(f"Oracle errors vs 'so does': {counts.errors} "
      f"(S={counts.substitutions} I={counts.insertions} D={counts.deletions})")

# WER over a small batch of random lattices.
rng = random.Random(7)
total_best = total_oracle = 0
for i in range(20):
    rl = stamp_lm_costs(random_lattice(rng, f"u{i}"), bigram, symbols, 2)
    ref = best_path(rl, 1.0).words or (symbols.lookup("so"),)
    rescored = rescore(rl, ArpaBackend(fourgram, symbols), 4)
    total_best += wer(best_path(rescored, 1.0).words, ref).errors
    total_oracle += oracle_path(rescored, ref)[1].errors
print(f"\nOver 20 random lattices: best-path errors={total_best}, "
      f"oracle errors={total_oracle} (oracle is always <= best)")
