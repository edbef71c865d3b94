"""Sectioned ``key = value`` text files.

Mission plans (``.mis``) and stack configs (``.ini``) share this reader. It is
a thin layer over :mod:`configparser` that keeps section order, forbids
duplicates, and turns every parser failure into :class:`KVSyntaxError` with a
line number where one is known.
"""

from __future__ import annotations

import configparser
import re

_LINE_RE = re.compile(r"line (\d+)")


class KVSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


def _make_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(
        interpolation=None,
        strict=True,
        comment_prefixes=("#",),
        inline_comment_prefixes=None,
        empty_lines_in_values=False,
        delimiters=("=",),
        default_section="\x00default",
    )
    parser.optionxform = str  # keep key case
    return parser


def read_sections(text: str | bytes) -> dict[str, dict[str, str]]:
    """Parse ``text`` into an ordered ``{section: {key: value}}`` mapping."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise KVSyntaxError(f"not valid UTF-8 at byte {exc.start}") from None
    parser = _make_parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        if isinstance(exc, configparser.ParsingError) and getattr(exc, "errors", None):
            line, raw = exc.errors[0]
            raise KVSyntaxError(f"expected 'key = value', got {raw.strip()!r}", line) from None
        line = getattr(exc, "lineno", None)
        if line is None:
            m = _LINE_RE.search(str(exc))
            line = int(m.group(1)) if m else None
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        raise KVSyntaxError(msg, line) from None
    except (ValueError, TypeError) as exc:
        raise KVSyntaxError(str(exc)) from None
    return {name: dict(parser.items(name)) for name in parser.sections()}


def write_sections(sections: dict[str, dict[str, str]], header: str = "") -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" if h else "#" for h in header.splitlines())
        lines.append("")
    for name, items in sections.items():
        lines.append(f"[{name}]")
        for key, value in items.items():
            lines.append(f"{key} = {value}" if value != "" else f"{key} =")
        lines.append("")
    return "\n".join(lines)
