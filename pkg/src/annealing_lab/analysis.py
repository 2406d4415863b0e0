"""Scaling fits and tidy plot-data export."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import MissingArtifactError
from .serialization import read_csv, read_json, write_csv


@dataclass(frozen=True)
class ScalingFit:
    """Straight-line fit of ``log y`` against ``log x``."""

    slope: float
    intercept: float
    r2: float
    stderr: float
    ci_low: float
    ci_high: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def fit_power_law(x, y, log_x: bool = True, confidence: float = 0.95) -> ScalingFit:
    """Least-squares exponent with a confidence interval on the slope.

    With ``log_x=False`` the fit is ``log y`` against ``x`` (exponential scaling).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least three points for a fit with an interval")
    X = np.log(x) if log_x else x
    r = stats.linregress(X, np.log(y))
    tq = stats.t.ppf(0.5 + confidence / 2, len(x) - 2)
    return ScalingFit(
        float(r.slope), float(r.intercept), float(r.rvalue**2), float(r.stderr),
        float(r.slope - tq * r.stderr), float(r.slope + tq * r.stderr),
    )


def emit_plotdata(run_dir: str | Path, out_dir: str | Path, meta: dict | None = None) -> list[Path]:
    """Collect run artifacts under ``run_dir`` into tidy CSV tables.

    Produces ``gap_curves.csv``, ``fidelity_vs_T.csv`` and
    ``scaling_fits.csv`` (only those with data). Raises if no recognized
    artifact is found.
    """
    run_dir, out_dir = Path(run_dir), Path(out_dir)
    if not run_dir.is_dir():
        raise MissingArtifactError(f"run directory {run_dir} does not exist")
    gaps, fids, fits = [], [], []
    out_resolved = out_dir.resolve()
    for f in sorted(run_dir.rglob("*")):
        if out_resolved in f.resolve().parents:
            continue
        if f.suffix == ".json":
            d = read_json(f)
            if not isinstance(d, dict):
                continue
            for sp_ in d.get("spectra", []):
                gaps.append(("chain", "beta", sp_["beta"], "gap", sp_["gap"], f.parent.name))
            for rec in d.get("fidelity_vs_T", []):
                fids.append((rec["family"], rec["T"], rec["fidelity"], f.parent.name))
            for fit in d.get("fits", []):
                fits.append((fit["family"], fit["slope"], fit["intercept"], fit["r2"], fit["ci_low"], fit["ci_high"]))
        elif f.suffix == ".csv" and f.name.startswith("profile_n"):
            _, rows = read_csv(f)
            fam = f.stem
            for r in rows:
                gaps.append((fam, "s", float(r["s"]), "gap10", float(r["gap10"]), f.parent.name))
                gaps.append((fam, "s", float(r["s"]), "gap21", float(r["gap21"]), f.parent.name))
    if not (gaps or fids or fits):
        raise MissingArtifactError(f"no run artifacts found under {run_dir}")
    meta = {**(meta or {}), "source": run_dir.resolve().name}
    written = []
    if gaps:
        written.append(write_csv(out_dir / "gap_curves.csv", ["family", "x_name", "x", "quantity", "value", "run"], gaps, meta))
    if fids:
        written.append(write_csv(out_dir / "fidelity_vs_T.csv", ["family", "T", "fidelity", "run"], fids, meta))
    if fits:
        written.append(write_csv(out_dir / "scaling_fits.csv", ["family", "slope", "intercept", "r2", "ci_low", "ci_high"], fits, meta))
    return written
