"""
Result records written by the probes.

A :class:`ProbeReport` carries the identifier of the inequality it probes,
whether the check passed, the worst observed ratio and its location, any
fitted constants and the provenance needed to reproduce the run (seed,
family hash, resolution). Reports serialize to JSON with sorted keys and to
CSV, so identical runs produce identical files up to the timestamp.
"""

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional

import numpy as np


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def jsonable(value: Any) -> Any:
    """
    Converts numpy scalars, fractions and non-finite floats into values the
    JSON encoder accepts. Non-finite floats become the strings ``"inf"``,
    ``"-inf"`` and ``"nan"``.
    """
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        value = float(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def family_hash(parts: Iterable[Any]) -> str:
    """
    Short SHA-256 digest identifying a family of cubes or functions.
    """
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            digest.update(np.ascontiguousarray(part).tobytes())
        else:
            digest.update(repr(part).encode("utf-8"))
    return digest.hexdigest()[:16]


@dataclass
class ProbeReport:
    """
    Outcome of one probe.

    Attributes
    ----------
    inequality : str
        Identifier of the inequality or property probed.
    passed : bool
        False as soon as one violation was recorded.
    violations : int
        Number of recorded violations.
    trials : int
        Number of recorded checks.
    worst_ratio : float
        Largest observed left-hand side over right-hand side.
    argmax : str, optional
        Label of the check attaining the worst ratio.
    fitted : dict
        Fitted or derived constants.
    verdict : str, optional
        Free-text conclusion of a multi-part experiment.
    seed : int, optional
        Seed of the random families used.
    family_hash : str, optional
        Digest of the families used.
    resolution : int, optional
        Resolution exponent :math:`m` of the lattice.
    conditional : bool
        True when the check depends on an estimated constant.
    provenance : dict
        Where the constants came from.
    rows : list of dict
        Per-check details.
    notes : list of str
        Human-readable remarks.
    timestamp : str
        UTC time of creation. The only field that varies between identical
        runs.
    """

    inequality: str
    passed: bool = True
    violations: int = 0
    trials: int = 0
    worst_ratio: float = float("nan")
    argmax: Optional[str] = None
    fitted: Dict[str, Any] = field(default_factory=dict)
    verdict: Optional[str] = None
    seed: Optional[int] = None
    family_hash: Optional[str] = None
    resolution: Optional[int] = None
    conditional: bool = False
    provenance: Dict[str, Any] = field(default_factory=dict)
    rows: List[Dict[str, Any]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    timestamp: str = field(default_factory=_now)

    def record(self, ok: bool, ratio: float, where: str, /, **row) -> None:
        """
        Records one check.

        Parameters
        ----------
        ok : bool
            Whether the inequality held.
        ratio : float
            Left-hand side over right-hand side.
        where : str
            Label of the check.
        **row
            Additional fields stored in :attr:`rows`.
        """
        self.trials += 1
        if not ok:
            self.violations += 1
            self.passed = False
        ratio = float(ratio)
        if math.isnan(self.worst_ratio) or (
            not math.isnan(ratio) and ratio > self.worst_ratio
        ):
            self.worst_ratio = ratio
            self.argmax = where
        if row:
            row = dict(row)
            row.setdefault("label", where)
            row.setdefault("ratio", ratio)
            row.setdefault("ok", bool(ok))
            self.rows.append(row)

    def fail(self, note: str) -> None:
        self.passed = False
        self.notes.append(note)

    def summary(self) -> str:
        if self.passed:
            status = "no violation found in {} trials".format(self.trials)
        else:
            status = "{} violation(s) in {} trials".format(self.violations, self.trials)
        line = "{} : {}".format(self.inequality, status)
        if not math.isnan(self.worst_ratio):
            line += ", worst ratio {:.6g}".format(self.worst_ratio)
            if self.argmax is not None:
                line += " at {}".format(self.argmax)
        if self.conditional:
            line += " (conditional on estimated constants)"
        if self.verdict:
            line += "\n  verdict : {}".format(self.verdict)
        for key in sorted(self.fitted):
            line += "\n  {} = {}".format(key, self.fitted[key])
        return line

    def to_dict(self) -> Dict[str, Any]:
        return jsonable(
            {
                "inequality": self.inequality,
                "passed": self.passed,
                "violations": self.violations,
                "trials": self.trials,
                "worst_ratio": self.worst_ratio,
                "argmax": self.argmax,
                "fitted": self.fitted,
                "verdict": self.verdict,
                "seed": self.seed,
                "family_hash": self.family_hash,
                "resolution": self.resolution,
                "conditional": self.conditional,
                "provenance": self.provenance,
                "rows": self.rows,
                "notes": self.notes,
                "timestamp": self.timestamp,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        """
        One line per row. Without rows, a single summary line is written.
        """
        buf = io.StringIO()
        rows = self.to_dict()["rows"] or [
            {
                "inequality": self.inequality,
                "passed": self.passed,
                "worst_ratio": jsonable(self.worst_ratio),
                "argmax": self.argmax,
            }
        ]
        keys = sorted({k for row in rows for k in row})
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in keys})
        return buf.getvalue()


def merge_reports(inequality: str, reports: Iterable[ProbeReport], **kwargs) -> ProbeReport:
    """
    Folds several reports of the same inequality into one, in the given
    order. Each merged report contributes one summary row.
    """
    out = ProbeReport(inequality, **kwargs)
    hashes = []
    for r in reports:
        out.trials += r.trials
        out.violations += r.violations
        out.passed = out.passed and r.passed
        if not math.isnan(r.worst_ratio) and (
            math.isnan(out.worst_ratio) or r.worst_ratio > out.worst_ratio
        ):
            out.worst_ratio = r.worst_ratio
            out.argmax = "{} ({})".format(r.argmax, r.inequality)
        out.notes.extend(r.notes)
        hashes.append(r.family_hash)
        out.rows.append(
            {"label": r.inequality, "trials": r.trials, "violations": r.violations,
             "ratio": r.worst_ratio, "ok": r.passed}
        )
    out.family_hash = family_hash(hashes)
    return out


def write_reports(reports: List[ProbeReport], out_dir: str, stem: str) -> List[str]:
    """
    Writes ``<stem>.json``, ``<stem>.csv`` and ``<stem>.txt`` into ``out_dir``.
    The CSV file holds the rows of every report, or one summary line for a
    report without rows.

    Returns
    -------
    list of str
        Paths of the written files.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, stem + ext) for ext in (".json", ".csv", ".txt")]

    with open(paths[0], "w") as fout:
        json.dump([r.to_dict() for r in reports], fout, sort_keys=True, indent=2)

    table = []
    for r in reports:
        d = r.to_dict()
        rows = d["rows"] or [
            {"passed": d["passed"], "worst_ratio": d["worst_ratio"], "argmax": d["argmax"]}
        ]
        table.extend(dict(row, inequality=r.inequality) for row in rows)
    keys = ["inequality"] + sorted({k for row in table for k in row} - {"inequality"})
    with open(paths[1], "w") as fout:
        writer = csv.DictWriter(fout, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for row in table:
            writer.writerow({k: row.get(k, "") for k in keys})

    with open(paths[2], "w") as fout:
        for r in reports:
            fout.write(r.summary() + "\n")

    return paths
