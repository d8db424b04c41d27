import io
import json
import os
from pathlib import Path

from nambu.cli import run_command

ROOT = Path(__file__).parent / "golden"


def manifest() -> list[dict]:
    return json.loads((ROOT / "manifest.json").read_text())


def run_entry(entry: dict) -> str:
    """Exit code and output in the same shape as the expected files."""
    out = io.StringIO()
    cwd = os.getcwd()
    os.chdir(ROOT / "inputs")
    try:
        code = run_command(entry["argv"], out=out)
    finally:
        os.chdir(cwd)
    return f"exit={code}\n{out.getvalue()}"


def expected(entry: dict) -> str:
    return (ROOT / "expected" / f"{entry['name']}.out").read_text()
