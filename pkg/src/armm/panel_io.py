"""Long-format panel files.

One observation per row under the header `id,t,value`. Rows are sorted by
(id, t) with t strictly increasing inside each id; t fixes the order only,
the values are treated as consecutive observations. Floats are written with
repr, so a write/read round trip reproduces them bit for bit.
"""

from __future__ import annotations

import math

from .errors import ConfigError, PanelFormatError
from .features import TimeSeries

HEADER = "id,t,value"


def parse_panel(lines, origin: str = "panel") -> list[TimeSeries]:
    """Parse an iterable of text lines; errors name the offending line."""
    it = iter(lines)
    try:
        header = next(it)
    except StopIteration:
        raise PanelFormatError(f"{origin}: empty input") from None
    if header.strip() != HEADER:
        raise PanelFormatError(
            f"{origin}: line 1: expected header {HEADER!r}, got {header.strip()!r}"
        )
    panel = []
    seen = set()
    cur_id = None
    cur_t = None
    values = []

    def close_current(line_no):
        if cur_id is None:
            return
        if len(values) < 2:
            raise PanelFormatError(
                f"{origin}: line {line_no}: id {cur_id!r} has fewer than 2 rows"
            )
        panel.append(TimeSeries(cur_id, values.copy()))

    line_no = 1
    for raw in it:
        line_no += 1
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise PanelFormatError(
                f"{origin}: line {line_no}: expected 3 fields, got {len(parts)}"
            )
        sid, t_raw, v_raw = (p.strip() for p in parts)
        if not sid:
            raise PanelFormatError(f"{origin}: line {line_no}: empty id")
        try:
            t = int(t_raw)
        except ValueError:
            raise PanelFormatError(
                f"{origin}: line {line_no}: t must be an integer, got {t_raw!r}"
            ) from None
        try:
            v = float(v_raw)
        except ValueError:
            raise PanelFormatError(
                f"{origin}: line {line_no}: value must be a number, got {v_raw!r}"
            ) from None
        if not math.isfinite(v):
            raise PanelFormatError(
                f"{origin}: line {line_no}: value must be finite, got {v_raw!r}"
            )
        if sid != cur_id:
            close_current(line_no)
            if sid in seen:
                raise PanelFormatError(
                    f"{origin}: line {line_no}: rows not sorted, id {sid!r} reappears"
                )
            if cur_id is not None and sid < cur_id:
                raise PanelFormatError(
                    f"{origin}: line {line_no}: rows not sorted, id {sid!r} after {cur_id!r}"
                )
            seen.add(sid)
            cur_id = sid
            cur_t = None
            values = []
        if cur_t is not None and t <= cur_t:
            raise PanelFormatError(
                f"{origin}: line {line_no}: t not strictly increasing for id {sid!r}"
            )
        cur_t = t
        values.append(v)
    close_current(line_no + 1)
    if not panel:
        raise PanelFormatError(f"{origin}: no observation rows")
    return panel


def read_panel(path) -> list[TimeSeries]:
    """Read a panel file; IO failures propagate as OSError."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_panel(fh, origin=str(path))


def panel_to_csv(panel: list[TimeSeries]) -> str:
    """Render a panel, renumbering t to 1..n per series."""
    ids = [s.id for s in panel]
    if sorted(ids) != ids:
        raise ConfigError("panel ids must be sorted to produce a valid file")
    if len(set(ids)) != len(ids):
        raise ConfigError("panel ids must be unique")
    lines = [HEADER]
    for series in panel:
        for t, v in enumerate(series.values, start=1):
            lines.append(f"{series.id},{t},{float(v)!r}")
    return "\n".join(lines) + "\n"


def write_panel(path, panel: list[TimeSeries]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(panel_to_csv(panel))
