#!/usr/bin/env python3
"""Regenerates the derived fixtures in the parent directory.

Independent of the Rust code: ranks come from a dense linear solve with
numpy, ingestion expectations from a direct reading of the JSONL files.

    python3 derive.py          # report fixtures whose content would change
    python3 derive.py --write  # rewrite them
"""

import json
import sys
from pathlib import Path
from urllib.parse import urlsplit

import numpy as np

HERE = Path(__file__).resolve().parent
FIXTURES = HERE.parent
RANK_TOL = 1e-10


def dense_rank(n, edges, restart, d):
    """Solves x = d (M x + r * dangling(x)) + (1 - d) r for x."""
    edges = sorted(set(map(tuple, edges)))
    r = np.asarray(restart, dtype=float)
    m = np.zeros((n, n))
    out = np.zeros(n)
    for s, _ in edges:
        out[s] += 1
    for s, t in edges:
        m[t, s] += 1.0 / out[s]
    for s in range(n):
        if out[s] == 0:
            m[:, s] = r
    x = np.linalg.solve(np.eye(n) - d * m, (1 - d) * r)
    return x / x.sum()


def rank_fixture(name, n, edges, damping, trusted=None):
    if trusted is None:
        restart = [1.0 / n] * n
    else:
        restart = [1.0 / len(trusted) if i in trusted else 0.0 for i in range(n)]
    x = dense_rank(n, edges, restart, damping)
    inputs = {"kind": "rank", "n_nodes": n, "edges": edges, "damping": damping}
    if trusted is not None:
        inputs["trusted"] = trusted
    return {
        "name": name,
        "inputs": inputs,
        "expected": [
            {"field": f"score[{i}]", "value": float(v), "tol": RANK_TOL, "origin": "derived"}
            for i, v in enumerate(x)
        ],
    }


def canonical(raw):
    """Scheme://host[:port]path[?query], host lower-cased, trailing slash dropped."""
    u = urlsplit(raw.strip())
    if not u.scheme or not u.hostname:
        return None
    out = f"{u.scheme}://{u.hostname.lower()}"
    if u.port is not None:
        out += f":{u.port}"
    out += u.path.rstrip("/")
    if u.query:
        out += "?" + u.query
    return out


def scope(page, link):
    a, b = urlsplit(page), urlsplit(link)
    same = a.scheme == b.scheme and a.hostname.lower() == b.hostname.lower()
    return "int" if same else "ext"


def ingest_fixture(name, dirname):
    files = sorted((FIXTURES / dirname).glob("crawl_*.jsonl"))
    crawls, dropped, times = [], 0, []
    for f in files:
        pages = {}
        stamps = []
        for line in f.read_text().splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            links = set()
            for raw in rec.get("out_links", []):
                c = canonical(raw)
                if c is None:
                    dropped += 1
                else:
                    links.add(c)
            pages[canonical(rec["url"])] = links
            stamps.append(rec["fetch_time"])
        stamps.sort()
        times.append(stamps[(len(stamps) - 1) // 2])
        crawls.append(pages)
    read = sorted(set().union(*crawls))
    kept = [u for u in read if all(u in c for c in crawls)]
    exp = [
        ("pages_read", len(read)),
        ("pages_kept", len(kept)),
        ("pages_discarded_incomplete", len(read) - len(kept)),
        ("pages_discarded_invalid", 0),
        ("outlinks_dropped", dropped),
    ]
    for i in range(len(crawls) - 1):
        new = {"int": 0, "ext": 0}
        for u in kept:
            for link in crawls[i + 1][u] - crawls[i][u]:
                new[scope(u, link)] += 1
        exp += [(f"new_int[{i}]", new["int"]), (f"new_ext[{i}]", new["ext"])]
    expected = [{"field": k, "value": v, "tol": 0.0, "origin": "derived"} for k, v in exp]
    expected.append({"field": "kept_urls", "value": " ".join(kept), "origin": "derived"})
    expected.append({"field": "consistent", "value": True, "origin": "trivial"})
    for c, t in enumerate(times):
        iso = t.replace("Z", "+00:00")
        expected.append({"field": f"crawl_time[{c}]", "value": iso, "origin": "derived"})
    return {"name": name, "inputs": {"kind": "ingest", "dir": dirname}, "expected": expected}


def fixtures():
    yield "pagerank_dangling.json", rank_fixture(
        "PageRank with a dangling page",
        5,
        [[0, 1], [0, 2], [1, 2], [2, 0], [3, 2], [3, 4], [1, 3]],
        0.85,
    )
    yield "trustrank_two_seeds.json", rank_fixture(
        "TrustRank from two trusted pages",
        6,
        [[0, 1], [1, 2], [2, 0], [2, 3], [3, 4], [4, 3], [5, 0], [1, 4]],
        0.85,
        trusted=[0, 5],
    )
    yield "ingest_three_crawls.json", ingest_fixture(
        "three crawls, one page missing from the second", "ingest_three_crawls"
    )


def main():
    write = "--write" in sys.argv[1:]
    stale = 0
    for fname, fixture in fixtures():
        path = FIXTURES / fname
        text = json.dumps(fixture, indent=2) + "\n"
        if path.exists() and path.read_text() == text:
            continue
        stale += 1
        if write:
            path.write_text(text)
            print(f"wrote {fname}")
        else:
            print(f"stale {fname}")
    return 1 if stale and not write else 0


if __name__ == "__main__":
    sys.exit(main())
