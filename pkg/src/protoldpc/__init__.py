"""Protograph LDPC and generalized-LDPC analysis for erasure and AWGN channels."""

from __future__ import annotations

__version__ = "0.1.0"
