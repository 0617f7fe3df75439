"""Verification kernel: terms, tactics, VC splitting, canonicalizers, SMT bridge and interop."""

__version__ = "0.1.0"
