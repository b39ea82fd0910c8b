"""
Summary JSON and time-series CSV artifacts.

Every artifact embeds the schema version and the full resolved run config.
Outputs carry no wall-clock data, so identical configs give identical files.
"""
import csv
import hashlib
import json
import logging
import math
import os
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)

META_PREFIX = "# "


def to_builtin(obj: Any) -> Any:
    """Convert models, numpy values and containers to plain JSON types."""
    if isinstance(obj, BaseModel):
        return to_builtin(obj.model_dump(mode="json"))
    if isinstance(obj, Mapping):
        return {str(k): to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_builtin(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        # non-finite values are kept as strings so the output stays valid JSON
        return value if math.isfinite(value) else repr(value)
    return obj


def canonical_json(obj: Any, indent: Optional[int] = 2) -> str:
    separators = None if indent else (",", ":")
    return json.dumps(to_builtin(obj), sort_keys=True, indent=indent, separators=separators, ensure_ascii=True)


def content_digest(obj: Any) -> str:
    """sha256 of the compact canonical JSON of obj."""
    return hashlib.sha256(canonical_json(obj, indent=None).encode("utf-8")).hexdigest()


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_summary(
    path: str, kind: str, config: BaseModel, body: Dict[str, Any], schema_version: str
) -> str:
    """
    Write a summary JSON with schema version, config and a digest of the rest.

    Args:
        path: Target file
        kind: Subcommand that produced the summary
        config: Resolved run config
        body: Report content
        schema_version: Schema version tag

    Returns:
        The digest recorded in the file
    """
    payload = {"schema_version": schema_version, "kind": kind, "config": config, **body}
    payload = to_builtin(payload)
    digest = content_digest(payload)
    payload["digest"] = digest
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(payload))
        f.write("\n")
    logger.info(f"Summary written to {path}")
    return digest


def read_summary(path: str) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def verify_digest(payload: Dict[str, Any]) -> bool:
    """Recompute the digest of a loaded summary."""
    body = {k: v for k, v in payload.items() if k != "digest"}
    return payload.get("digest") == content_digest(body)


def write_csv(
    path: str, columns: Dict[str, np.ndarray], config: BaseModel, schema_version: str
) -> str:
    """
    Write equal-length columns with repr-exact floats.

    The first lines are ``# schema_version=...`` and ``# config=<json>``.

    Raises:
        ValueError: If the columns differ in length
    """
    names = list(columns)
    lengths = {len(np.atleast_1d(columns[n])) for n in names}
    if len(lengths) > 1:
        raise ValueError(f"CSV columns differ in length: {sorted(lengths)}")
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(f"{META_PREFIX}schema_version={schema_version}\n")
        f.write(f"{META_PREFIX}config={canonical_json(config, indent=None)}\n")
        writer = csv.writer(f)
        writer.writerow(names)
        if names:
            for row in zip(*(np.atleast_1d(columns[n]) for n in names)):
                writer.writerow([repr(float(v)) for v in row])
    logger.info(f"CSV with {len(names)} columns written to {path}")
    return path


def read_csv(path: str) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a CSV written by write_csv.

    Returns:
        Tuple of (columns, meta) where meta holds schema_version and config

    Raises:
        ValueError: If the file has no header row
    """
    meta: Dict[str, Any] = {}
    body: List[str] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.startswith(META_PREFIX) and not body:
                key, _, value = line[len(META_PREFIX):].rstrip("\n").partition("=")
                meta[key] = json.loads(value) if key == "config" else value
            else:
                body.append(line)
    reader = csv.DictReader(body)
    if not reader.fieldnames:
        raise ValueError(f"{path} has no header row")
    values: Dict[str, List[float]] = {name: [] for name in reader.fieldnames}
    for row in reader:
        for name in reader.fieldnames:
            values[name].append(float(row[name]))
    return {name: np.array(v) for name, v in values.items()}, meta
