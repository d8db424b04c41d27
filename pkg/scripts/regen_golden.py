"""Rewrite tests/golden/expected/ from the current CLI.

Run after an intentional output change, then review the diff.
"""

import io
import json
import os
import sys
from pathlib import Path

from nambu.cli import run_command

ROOT = Path(__file__).resolve().parents[1] / "tests" / "golden"


def run_entry(entry: dict) -> tuple[int, str]:
    out = io.StringIO()
    cwd = os.getcwd()
    os.chdir(ROOT / "inputs")
    try:
        code = run_command(entry["argv"], out=out)
    finally:
        os.chdir(cwd)
    return code, out.getvalue()


def main() -> int:
    manifest = json.loads((ROOT / "manifest.json").read_text())
    for entry in manifest:
        code, text = run_entry(entry)
        (ROOT / "expected" / f"{entry['name']}.out").write_text(f"exit={code}\n{text}")
        print(f"{entry['name']}: exit {code}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
