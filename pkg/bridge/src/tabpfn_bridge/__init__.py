"""tabpfn-bridge: stdio server exposing conditional table generators
behind a line-delimited JSON protocol."""

PROTOCOL_VERSION = 1

__version__ = "0.1.0"
