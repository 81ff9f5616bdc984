"""Hash-chain broadcast signing and a permissioned IoT blockchain toolkit.

Subpackages cover the broadcast signing pipeline (``pls``), user-side
posting with jam-spoof arbitration (``slvp``), content-addressable storage
with proof triggers (``cas``), the minimal Merkle forest over block history
(``merkle``), block formation / enrolment / noise filtering (``ledger``),
zero-latency hash-based signatures (``emergency``), and a deterministic
adversarial network simulator (``netsim``) with a CLI (``cli``).
"""

__version__ = "0.1.0"
