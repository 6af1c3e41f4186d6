import json
import logging
import os
import shutil
import tempfile
from contextlib import contextmanager
from typing import Iterable, List, Optional

import pandas as pd

logger = logging.getLogger(__name__)


@contextmanager
def staged_output(out_dir):
    """
    Collects a run's outputs in a staging directory next to `out_dir` and moves them into
    place only when the block finishes without an exception. On failure nothing is left behind.

    :param out_dir: final output directory
    :return: path of the staging directory
    """
    out_dir = os.path.abspath(out_dir)
    parent = os.path.dirname(out_dir)
    os.makedirs(parent, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=f".{os.path.basename(out_dir)}.partial-", dir=parent)
    try:
        yield staging
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    os.makedirs(out_dir, exist_ok=True)
    for entry in sorted(os.listdir(staging)):
        target = os.path.join(out_dir, entry)
        if os.path.isdir(target):
            shutil.rmtree(target)
        elif os.path.exists(target):
            os.remove(target)
        shutil.move(os.path.join(staging, entry), target)
    shutil.rmtree(staging, ignore_errors=True)


def write_json(data, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as outf:
        json.dump(data, outf, indent=4, ensure_ascii=False)
        outf.write("\n")


def write_text(text, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as outf:
        outf.write(text)


def write_csv(rows: Iterable[dict], outpath, columns: Optional[List[str]] = None):
    """
    Helper function to output a report table as a delimited file

    :param rows: one dict per table row
    :param outpath: file path for CSV output
    :param columns: column order, also used as the header of an empty table
    :return: nothing
    """
    os.makedirs(os.path.dirname(outpath) or ".", exist_ok=True)
    outdf = pd.DataFrame(list(rows), columns=columns)
    outdf.to_csv(outpath, index=False, float_format="%.4f")


def format_table(rows: List[dict], columns: List[str], title: str = "") -> str:
    """
    Plain-text rendering of a report table for the summary file
    """
    lines = [title] if title else []
    if not rows:
        lines.append("  (none)")
        return "\n".join(lines) + "\n"
    outdf = pd.DataFrame(rows, columns=columns)
    lines.append(outdf.to_string(index=False, na_rep="-", float_format=lambda v: f"{v:.2f}"))
    return "\n".join(lines) + "\n"


def safe_name(value: str) -> str:
    # model keys and record ids become path components
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in value)
