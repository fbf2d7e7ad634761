#!/usr/bin/env python3
"""Writes the COPY-body golden fixtures used by the marker round-trip tests.

The grammar is written out here by hand, independently of the C++ renderer.
"""
import os
import random

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "markers")


def block(ts, idx, nbytes, count):
    return ("Perf Marker\n"
            f"    Timestamp: {ts}\n"
            f"    Stripe Index: {idx}\n"
            f"    Stripe Bytes Transferred: {nbytes}\n"
            f"    Total Stripe Count: {count}\n"
            "End\n")


def main():
    rng = random.Random(20200301)
    os.makedirs(HERE, exist_ok=True)
    for i in range(20):
        stripes = [1, 1, 2, 4, 8][i % 5]
        periods = i % 6
        ts = 1700000000 + i * 97
        per_stripe = [0] * stripes
        body = ""
        for _ in range(periods):
            ts += rng.randint(0, 5)
            for s in range(stripes):
                per_stripe[s] += rng.randint(0, 4 << 20)
                body += block(ts, s, per_stripe[s], stripes)
        if i % 4 == 3:
            reason = rng.choice([
                "REMOTE_FAILURE: HTTP 404 from https://127.0.0.1:9/data/f",
                "TIMEOUT: no progress from remote for 30 s",
                "CANCELLED: client went away",
            ])
            body += f"failure: {reason}\n"
        else:
            body += "success: Created\n"
        with open(os.path.join(HERE, f"copy_body_{i:02d}.txt"), "w", newline="\n") as f:
            f.write(body)


if __name__ == "__main__":
    main()
