#!/usr/bin/env python3
"""
Trace discovery utilities

Selects trace files inside a directory with gitignore-style patterns, so an
experiment can point a trace workload at a folder ("traces/") instead of
listing every file. A `.traceignore` file in that folder excludes matches the
same way a .gitignore would.
"""

import logging
import os
from pathlib import Path
from typing import List, Optional, Sequence

import pathspec

logger = logging.getLogger(__name__)

DEFAULT_TRACE_PATTERNS = ["*.trace"]
IGNORE_FILE = ".traceignore"


def parse_pattern_file(pattern_path) -> List[str]:
    """
    Read patterns from a gitignore-style file, skipping blanks and comments.

    Raises:
        OSError: if the file cannot be read
    """
    patterns = []
    with open(pattern_path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            patterns.append(line)
    logger.debug(f"Parsed {len(patterns)} patterns from {pattern_path}")
    return patterns


def build_spec(patterns: Sequence[str]) -> pathspec.PathSpec:
    return pathspec.PathSpec.from_lines(pathspec.patterns.GitWildMatchPattern, patterns)


def discover_traces(directory, patterns: Optional[Sequence[str]] = None) -> List[Path]:
    """
    Find trace files below ``directory``.

    Args:
        directory: folder to search recursively
        patterns: gitignore-style include patterns (default: *.trace)

    Returns:
        Matching files sorted by their path relative to ``directory``.
    """
    root = Path(directory)
    if not root.is_dir():
        raise NotADirectoryError(f"Trace directory not found: {root}")

    include = build_spec(patterns or DEFAULT_TRACE_PATTERNS)
    ignore_path = root / IGNORE_FILE
    exclude = build_spec(parse_pattern_file(ignore_path)) if ignore_path.is_file() else None

    found = []
    for current, dirs, files in os.walk(root):
        dirs.sort()
        for name in sorted(files):
            if name == IGNORE_FILE:
                continue
            rel = os.path.relpath(os.path.join(current, name), root).replace("\\", "/")
            if not include.match_file(rel):
                continue
            if exclude is not None and exclude.match_file(rel):
                logger.debug(f"Skipping {rel} (matched {IGNORE_FILE})")
                continue
            found.append(rel)

    found.sort()
    logger.debug(f"Discovered {len(found)} trace files in {root}")
    return [root / rel for rel in found]
