#!/usr/bin/env python3
"""Independent recount of corpus statistics for data/mini_corpus.jsonl.

Counts byte tokens directly from the raw text (structured) and from the
whitespace-collapsed text (baseline), counts newline-delimited lines, and
averages. The printed values are frozen into the C++ tests.
"""
import json
import sys

path = sys.argv[1] if len(sys.argv) > 1 else "data/mini_corpus.jsonl"
limit = int(sys.argv[2]) if len(sys.argv) > 2 else 1024

rows = []
with open(path, "rb") as f:
    for raw in f:
        if not raw.strip():
            continue
        obj = json.loads(raw)
        code = obj["func"].encode("utf-8")
        structured = len(code)
        baseline = len(b" ".join(code.split()))
        parts = code.split(b"\n")
        if parts and parts[-1] == b"":
            parts = parts[:-1]
        rows.append((obj["idx"], structured, baseline, len(parts)))

n = len(rows)
sum_s = sum(r[1] for r in rows)
sum_b = sum(r[2] for r in rows)
sum_l = sum(r[3] for r in rows)
print(f"count={n}")
print(f"sum_structured={sum_s}")
print(f"sum_baseline={sum_b}")
print(f"sum_lines={sum_l}")
print(f"mean_structured={sum_s / n!r}")
print(f"mean_baseline={sum_b / n!r}")
print(f"mean_lines={sum_l / n!r}")
print(f"ratio={sum_b / sum_s!r}")
for lim in (1, 100, 200, limit):
    print(f"frac_over_{lim}={sum(1 for r in rows if r[1] > lim) / n!r}")
print("per_snippet=" + ";".join(f"{i}:{s}:{b}:{l}" for i, s, b, l in rows[:5]))
