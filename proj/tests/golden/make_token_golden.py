#!/usr/bin/env python3
"""Independent oracle for the token wire format and HMAC caveat chain."""
import base64
import hashlib
import hmac
import json
import os

ROOT_KEY = b"golden-root-key"
KEY_ID = "k1"
LOCATION = "https://ep1:8443"
CAVEATS = [
    "scope:DOWNLOAD:/data",
    "scope:UPLOAD:/staging",
    "before:2024-01-01T00:00:00Z",
    "::group::",
    "scope:DOWNLOAD:/data/run1",
]


def chain(key, key_id, caveats):
    sig = hmac.new(key, key_id.encode(), hashlib.sha256).digest()
    for c in caveats:
        sig = hmac.new(sig, c.encode(), hashlib.sha256).digest()
    return sig


def main():
    sig = chain(ROOT_KEY, KEY_ID, CAVEATS)
    doc = {"l": LOCATION, "k": KEY_ID, "c": CAVEATS, "s": sig.hex()}
    raw = json.dumps(doc, separators=(",", ":"), sort_keys=True).encode()
    token = base64.urlsafe_b64encode(raw).decode().rstrip("=")
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, "token_attenuated.txt"), "w") as f:
        f.write(token + "\n")
    with open(os.path.join(here, "token_attenuated.sig"), "w") as f:
        f.write(sig.hex() + "\n")


if __name__ == "__main__":
    main()
