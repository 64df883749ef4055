"""Trojan layer injection, mode switching and integrity checks for NTMF classifiers."""

from ._core import *  # noqa: F401,F403

__all__ = [name for name in dir() if not name.startswith("_")]
