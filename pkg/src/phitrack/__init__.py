"""phitrack: content-signature discovery and hash-ledger version tracking
for sensitive medical-imaging files."""

__version__ = "0.1.0"
