"""Result files: JSON through the DRF renderer, CSV per RFC 4180, both written atomically."""

import csv
import io
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Sequence, Union

from rest_framework.renderers import JSONRenderer

from nilmix.api.encoding import csv_rows, jsonable

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def atomic_write(path: PathLike, payload: bytes) -> Path:
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        dir=path.parent, prefix=f".{path.name}.", suffix=".tmp", delete=False
    )
    try:
        with handle:
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(handle.name, path)
    except BaseException:
        Path(handle.name).unlink(missing_ok=True)
        raise
    return path


def render_json(data: Any, mark_floats: bool = True) -> bytes:
    return JSONRenderer().render(jsonable(data, mark_floats), renderer_context={"indent": 2}) + b"\n"


def render_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> bytes:
    buffer = io.StringIO(newline="")
    # csv's defaults already follow RFC 4180: CRLF records, minimal double-quoting
    writer = csv.writer(buffer)
    writer.writerow(columns)
    writer.writerows(csv_rows(rows, columns))
    return buffer.getvalue().encode("utf-8")


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".config.json")


def write_json(data: Any, path: PathLike, mark_floats: bool = True) -> Path:
    written = atomic_write(path, render_json(data, mark_floats))
    logger.info("Wrote %s", written)
    return written


def write_csv(
    rows: Iterable[Mapping[str, Any]],
    columns: Sequence[str],
    path: PathLike,
    config: Dict[str, Any],
) -> Path:
    """The table plus a ``<path>.config.json`` sidecar holding the resolved config."""
    written = atomic_write(path, render_csv(rows, columns))
    atomic_write(sidecar_path(path), render_json(config, mark_floats=False))
    logger.info("Wrote %s and its config sidecar", written)
    return written
