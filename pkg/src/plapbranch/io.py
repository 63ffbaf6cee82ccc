"""CSV/JSON serialization. Floats are written with 17 significant digits,
which round-trips IEEE doubles exactly."""
import csv
import json
import math
from pathlib import Path

from .branch import Branch, BranchPoint

BRANCH_COLUMNS = ("alpha", "lambda", "sup_norm", "G", "converged")


def fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return "%.17g" % v


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_json_safe(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_branch(branch, out_dir, extra=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(pt.alpha, pt.H_value, pt.sup_norm, pt.G_value, pt.converged)
            for pt in branch.points]
    write_csv(out / "branch.csv", BRANCH_COLUMNS, rows)
    meta = {
        "case_label": branch.case_label,
        "lambda_star": branch.lambda_star,
        "multiplicity_table": [{"lambda": lam, "count": n} for lam, n in branch.multiplicity_table],
        "points": len(branch.points),
        "converged_points": len(branch.good),
    }
    if extra:
        meta.update(extra)
    write_json(out / "branch.json", meta)
    return out / "branch.csv", out / "branch.json"


def read_branch(out_dir, spec=None, mesh=None):
    """Rebuild a Branch (without fields) from branch.csv and branch.json."""
    out = Path(out_dir)
    header, rows = read_csv(out / "branch.csv")
    if tuple(header) != BRANCH_COLUMNS:
        raise ValueError(f"unexpected branch.csv header {header}")
    points = tuple(
        BranchPoint(float(a), float(lam), float(s), float(G), converged=(c == "true"))
        for a, lam, s, G, c in rows)
    meta = json.loads((out / "branch.json").read_text())
    table = tuple((float(e["lambda"]), int(e["count"])) for e in meta["multiplicity_table"])
    return Branch(spec, mesh, points, meta["lambda_star"], meta["case_label"], table)
