"""Script bytes served at GET /script by the two services.

The headless agent decides which state machine to instantiate by hashing
the bytes it downloaded, so the service and the agent must agree on the
content.  When the browser front end is built, services can be configured
to serve those files instead; the agent then trusts them via the same
hash registry.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Optional

IDP_SCRIPT_FALLBACK = b"// issuer window script placeholder (build frontend/ for the browser demo)\n"
RP_SCRIPT_FALLBACK = b"// rp window script placeholder (build frontend/ for the browser demo)\n"

IDP_SCRIPT_NAME = "idp_script.js"
RP_SCRIPT_NAME = "rp_script.js"


def load_script(static_dir: Optional[str], name: str, fallback: bytes) -> bytes:
    if static_dir:
        path = Path(static_dir) / name
        if path.is_file():
            return path.read_bytes()
    return fallback


def script_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
