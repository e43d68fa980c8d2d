"""JSON and CSV encodings of bowforge objects.

Complex numbers are ``[re, im]`` pairs, matrices nested rows of pairs.
Output is canonical: sorted keys, shortest round-trip float repr and no
timestamps, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import re

import numpy as np

from .factor import FactorPair
from .ghmetric import PointConfig
from .matpoly import QuadMatPoly, SpectralCurve
from .nahm import BowConfig, BowReport, NahmTriple, PiecewiseNahmSolution, Trajectory


def _real(x) -> float:
    x = float(x)
    return 0.0 if x == 0 else x  # drop negative zero


def encode_complex(z) -> list:
    z = complex(z)
    return [_real(z.real), _real(z.imag)]


def decode_complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    re, im = v
    return complex(re, im)


def encode_array(a) -> list:
    """Nested lists with ``[re, im]`` leaves."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return encode_complex(a)
    return [encode_array(row) for row in a]


def _depth(v) -> int:
    d = 0
    while isinstance(v, list):
        if not v:
            break
        v = v[0]
        d += 1
    return d


def decode_array(v, ndim: int | None = None) -> np.ndarray:
    """Inverse of :func:`encode_array`.

    With ``ndim`` given, nesting one level deeper than ``ndim`` means
    ``[re, im]`` leaves and nesting of exactly ``ndim`` means real entries.
    Without it, leaves are taken to be pairs.
    """
    a = np.asarray(v, dtype=float)
    if ndim is not None and _depth(v) == ndim:
        return a.astype(complex)
    if a.shape[-1] != 2:
        raise ValueError("expected [re, im] pairs as innermost entries")
    return a[..., 0] + 1j * a[..., 1]


def encode_real(a) -> list:
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _real(a)
    return [encode_real(row) for row in a]


def encode_poly(P: QuadMatPoly) -> dict:
    return {"A0": encode_array(P.A0), "A1": encode_array(P.A1), "A2": encode_array(P.A2)}


def decode_poly(d: dict) -> QuadMatPoly:
    return QuadMatPoly(decode_array(d["A0"], 2), decode_array(d["A1"], 2), decode_array(d["A2"], 2))


def encode_pair(p: FactorPair) -> dict:
    return {"A": encode_array(p.A), "B": encode_array(p.B)}


def decode_pair(d: dict) -> FactorPair:
    return FactorPair(decode_array(d["A"], 2), decode_array(d["B"], 2))


def encode_curve(S: SpectralCurve) -> dict:
    return {"k": S.k, "p": [encode_array(c) for c in S.p]}


def decode_curve(d: dict) -> SpectralCurve:
    return SpectralCurve(int(d["k"]), tuple(decode_array(c, 1) for c in d["p"]))


def encode_config(c: BowConfig) -> dict:
    return {"k": c.k, "r": c.r, "mu": encode_real(c.mu), "cL": encode_real(c.cL), "cR": encode_real(c.cR)}


def decode_config(d: dict) -> BowConfig:
    return BowConfig(int(d["k"]), int(d["r"]), d["mu"], d.get("cL", [0, 0, 0]), d.get("cR", [0, 0, 0]))


def encode_triple(t: NahmTriple) -> dict:
    return {"T1": encode_array(t.T1), "T2": encode_array(t.T2), "T3": encode_array(t.T3)}


def decode_triple(d: dict) -> NahmTriple:
    return NahmTriple(decode_array(d["T1"], 2), decode_array(d["T2"], 2), decode_array(d["T3"], 2))


def encode_trajectory(tr: Trajectory) -> dict:
    return {"t": encode_real(tr.t), "samples": encode_array(tr.samples)}


def encode_solution(sol: PiecewiseNahmSolution) -> dict:
    return {
        "config": encode_config(sol.config),
        "intervals": [encode_trajectory(tr) for tr in sol.intervals],
        "pair": encode_pair(sol.pair),
        "I": encode_array(sol.I),
        "J": encode_array(sol.J),
    }


def encode_report(rep: BowReport) -> dict:
    return {k: encode_real(v) for k, v in sorted(rep.to_dict().items())}


def encode_point_config(pc: PointConfig) -> dict:
    return {
        "config": encode_config(pc.config),
        "y": encode_real(pc.y),
        "x": encode_real(pc.x),
        "a_minus": encode_real(pc.a_minus),
        "a_plus": encode_real(pc.a_plus),
    }


def provenance(version: str, seed, tol, mode: str) -> dict:
    return {"tool": "bowforge", "version": version, "mode": mode, "seed": seed, "tol": tol}


_NUMERIC_LIST = re.compile(r"\[\s*(-?[0-9][-+.eE0-9]*(?:,\s*-?[0-9][-+.eE0-9]*)*)\s*\]")


def dumps_json(obj) -> str:
    """Indented JSON with sorted keys; innermost numeric lists stay on one line."""
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False)
    text = _NUMERIC_LIST.sub(lambda m: "[" + ", ".join(v.strip() for v in m.group(1).split(",")) + "]", text)
    return text + "\n"


# --- CSV ---------------------------------------------------------------------------


def _csv_text(header: list, rows, meta: dict) -> str:
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}: {meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(_real(v)) for v in row])
    return buf.getvalue()


def trajectory_header(k: int) -> list:
    cols = ["t"]
    for name in ("T1", "T2", "T3"):
        for i in range(k):
            for j in range(k):
                cols += [f"{name}_{i}{j}_re", f"{name}_{i}{j}_im"]
    return cols


def trajectory_rows(tr: Trajectory):
    for t, X in zip(tr.t, tr.samples):
        flat = X.reshape(-1)
        yield [t, *np.column_stack([flat.real, flat.imag]).ravel()]


def trajectories_csv(trs, meta: dict) -> str:
    """Columns ``t`` then row-major ``re, im`` entries of ``T1, T2, T3``; intervals are concatenated."""
    k = trs[0].samples.shape[-1]
    rows = [row for tr in trs for row in trajectory_rows(tr)]
    return _csv_text(trajectory_header(k), rows, meta)


def metric_samples_csv(samples, meta: dict) -> str:
    """One row per sample: base points, flattened ``Phi``, eigenvalues of ``Phi``.

    ``samples`` is a sequence of :class:`GHMetricData`.
    """
    samples = list(samples)
    n = samples[0].Phi.shape[0]
    header = [f"X{p}_{c}" for p in range(n) for c in "xyz"]
    header += [f"Phi_{i}{j}" for i in range(n) for j in range(n)]
    header += [f"eig_{i}" for i in range(n)]
    rows = []
    for m in samples:
        rows.append([*m.points.base_points().ravel(), *m.Phi.ravel(), *np.linalg.eigvalsh(m.Phi)])
    return _csv_text(header, rows, meta)


def table_csv(header: list, rows, meta: dict) -> str:
    return _csv_text(header, rows, meta)


def read_csv_table(text: str) -> tuple:
    """Parse a CSV written here: skip ``#`` lines, return ``(header, float rows)``."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, np.array([[float(v) for v in row] for row in reader])


__all__ = [
    "decode_array",
    "decode_complex",
    "decode_config",
    "decode_curve",
    "decode_pair",
    "decode_poly",
    "decode_triple",
    "dumps_json",
    "encode_array",
    "encode_complex",
    "encode_config",
    "encode_curve",
    "encode_pair",
    "encode_point_config",
    "encode_poly",
    "encode_real",
    "encode_report",
    "encode_solution",
    "encode_trajectory",
    "encode_triple",
    "metric_samples_csv",
    "provenance",
    "read_csv_table",
    "table_csv",
    "trajectories_csv",
]
