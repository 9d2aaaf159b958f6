import json
from datetime import datetime
from functools import wraps
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence

from loguru import logger

from cgebd.utils.errors import DataError

SLOW_STEP_SECONDS = 30.0


def pipeline_step(func):
    """Decorator for pipeline steps with timing, error logging and re-raise."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = datetime.now()
        logger.debug(f"Starting {func.__name__}")
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            logger.error(f"Step {func.__name__} failed: {type(e).__name__}: {e}")
            raise

        duration = (datetime.now() - start_time).total_seconds()
        if duration > SLOW_STEP_SECONDS:
            logger.warning(f"Slow step: {func.__name__} took {duration:.2f}s")
        else:
            logger.debug(f"Finished {func.__name__} in {duration:.2f}s")
        return result

    return wrapper


def validate_paths(**paths: Optional[str]) -> None:
    """Check that every named input path exists."""

    missing = [
        f"{name}={value}" for name, value in paths.items() if not value or not Path(value).exists()
    ]

    if missing:
        logger.error(f"Missing required input paths: {', '.join(missing)}")
        raise DataError(f"Missing required input paths: {', '.join(missing)}")


def read_json(path: str | Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"File not found: {path}")
    except json.JSONDecodeError as e:
        raise DataError(f"Invalid JSON in {path}: {e}")


def write_json(path: str | Path, payload: Any) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_json_lines(path: str | Path) -> List[Dict[str, Any]]:
    """Read a JSON-lines file, skipping blank lines."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as e:
                    raise DataError(f"Invalid JSON on line {line_no} of {path}: {e}")
    except FileNotFoundError:
        raise DataError(f"File not found: {path}")
    return rows


def write_json_lines(path: str | Path, rows: Iterable[Dict[str, Any]]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row))
            fh.write("\n")


def batched(items: Sequence[Any], size: int) -> Iterator[Sequence[Any]]:
    """Yield consecutive slices of at most ``size`` items."""
    for start in range(0, len(items), size):
        yield items[start : start + size]
