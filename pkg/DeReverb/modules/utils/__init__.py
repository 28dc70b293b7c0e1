#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

__all__ = [
    "sec_to_min",
    "write_csv",
    "render_table",
    "history_rows",
    "run_limited",
]

import asyncio
import csv
import io
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

import aiofiles

from ...logger import LOGGER

T = TypeVar("T")


def sec_to_min(seconds):
    """
    Convert seconds to minutes:second format.
    """
    try:
        minutes = int(seconds // 60)
        remaining_seconds = int(seconds % 60)
        return f"{minutes}:{remaining_seconds:02}"
    except Exception as e:
        LOGGER.warning("Failed to convert seconds to minutes:seconds format: %s", e)
        return None


def _fmt(value: Any) -> Any:
    return repr(value) if isinstance(value, float) else value


async def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """RFC 4180 CSV with a header row; floats use their shortest round-trip repr."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows([_fmt(v) for v in row] for row in rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as fh:
        await fh.write(buffer.getvalue())
    return path


def render_table(title: str, header: Sequence[str], rows: Sequence[Sequence[Any]], digits: int = 4) -> str:
    cells = [[str(h) for h in header]]
    for row in rows:
        cells.append([f"{v:.{digits}f}" if isinstance(v, float) else str(v) for v in row])
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = [title]
    for index, row in enumerate(cells):
        first = row[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join([first, *rest]))
        if index == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def history_rows(train_loss: Sequence[float], val_loss: Sequence[Optional[float]]) -> list[tuple]:
    return [(epoch, t, "" if v is None else v) for epoch, (t, v) in enumerate(zip(train_loss, val_loss), start=1)]


async def run_limited(workers: int, func: Callable[..., T], jobs: Sequence[tuple]) -> list[T]:
    """Run blocking ``func(*job)`` in threads, at most ``workers`` at once, results in job order."""
    semaphore = asyncio.Semaphore(max(1, workers))

    async def _one(job: tuple) -> T:
        async with semaphore:
            return await asyncio.to_thread(func, *job)

    return await asyncio.gather(*(_one(job) for job in jobs))
