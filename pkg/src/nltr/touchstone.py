"""Version-1 Touchstone (.s2p) writer and a strict reader for it."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .network import SParams
from .surface import atomic_write

_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
_OPTION = re.compile(
    r"^#(?:\s+(HZ|KHZ|MHZ|GHZ|S|Y|Z|H|G|MA|DB|RI|R\s+\S+))*\s*$", re.IGNORECASE)


def _g(x: float) -> str:
    s = "%.17g" % float(x)
    return "0" if s == "-0" else s


def format_touchstone(freqs: Sequence[float], series: Sequence[SParams],
                      comments: Sequence[str] = ()) -> str:
    """Render a 2-port series as Touchstone v1 text (Hz, S, RI).

    Raises
    ------
    ValueError
        On an empty series, mismatched lengths, mixed reference impedances.
    AssertionError
        When frequencies are not strictly ascending (caller bug).
    """
    freqs = [float(f) for f in freqs]
    if not freqs or len(freqs) != len(series):
        raise ValueError("touchstone series must be nonempty and match its frequencies")
    z_refs = {float(s.z_ref) for s in series}
    if len(z_refs) != 1:
        raise ValueError("touchstone series must use a single reference impedance")
    assert all(b > a for a, b in zip(freqs, freqs[1:])), "frequencies must ascend"
    lines = [f"! {c}" for c in comments]
    lines.append(f"# Hz S RI R {_g(z_refs.pop())}")
    for f, s in zip(freqs, series):
        vals = [s.s11, s.s21, s.s12, s.s22]
        lines.append(" ".join([_g(f)] + [_g(p) for v in vals for p in (v.real, v.imag)]))
    return "\n".join(lines) + "\n"


def write_touchstone(freqs, series, path, comments=()) -> Path:
    path = Path(path)
    atomic_write(path, format_touchstone(freqs, series, comments))
    return path


def parse_touchstone(text: str):
    """Parse 2-port Touchstone v1 text.

    Returns
    -------
    freqs : ndarray, Hz
    s : ndarray, shape (n, 2, 2)
    z_ref : float
    comments : list of str

    Raises ``ValueError`` on any grammar violation.
    """
    unit, fmt, param, z_ref = 1e9, "MA", "S", 50.0
    seen_option = False
    comments, numbers = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        body, _, comment = raw.partition("!")
        if comment and not body.strip():
            comments.append(comment.strip())
        body = body.strip()
        if not body:
            continue
        if body.startswith("#"):
            if seen_option:
                raise ValueError(f"line {lineno}: second option line")
            if not _OPTION.match(body):
                raise ValueError(f"line {lineno}: malformed option line {body!r}")
            seen_option = True
            toks = body[1:].split()
            i = 0
            while i < len(toks):
                t = toks[i].upper()
                if t in _UNITS:
                    unit = _UNITS[t]
                elif t in ("S", "Y", "Z", "H", "G"):
                    param = t
                elif t in ("MA", "DB", "RI"):
                    fmt = t
                elif t == "R":
                    i += 1
                    z_ref = float(toks[i])
                i += 1
            continue
        if not seen_option:
            raise ValueError(f"line {lineno}: data before option line")
        try:
            numbers.extend(float(t) for t in body.split())
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric data {body!r}") from None
    if not seen_option:
        raise ValueError("missing option line")
    if param != "S":
        raise ValueError(f"unsupported parameter type {param}")
    if not numbers or len(numbers) % 9:
        raise ValueError("2-port data must come in groups of 9 numbers")
    arr = np.array(numbers).reshape(-1, 9)
    freqs = arr[:, 0] * unit
    if np.any(np.diff(freqs) <= 0):
        raise ValueError("frequencies must be strictly ascending")
    a, b = arr[:, 1::2], arr[:, 2::2]
    if fmt == "RI":
        vals = a + 1j * b
    elif fmt == "MA":
        vals = a * np.exp(1j * np.radians(b))
    else:
        vals = 10 ** (a / 20) * np.exp(1j * np.radians(b))
    # v1 two-port order is S11 S21 S12 S22
    s = np.empty((arr.shape[0], 2, 2), dtype=complex)
    s[:, 0, 0], s[:, 1, 0], s[:, 0, 1], s[:, 1, 1] = vals.T
    return freqs, s, z_ref, comments
