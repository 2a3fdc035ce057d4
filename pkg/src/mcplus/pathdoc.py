"""JSON serialization of solution paths.

Floats are written with Python's shortest round-trip ``repr`` so that parsing
a document reproduces every turning point bit for bit. The infinite ``tau``
of a terminal ray (and its ``delta``) is written as ``null``.
"""
from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .errors import InputError
from .path import PathOptions, SolutionPath, TurningPoint
from .penalty import PenaltySpec

FORMAT = "mcplus-path/1"


def _num(x):
    x = float(x)
    return None if math.isinf(x) else x


def _inf(x):
    return math.inf if x is None else float(x)


def to_document(path: SolutionPath, n: int | None = None, scales=None, standardized: bool = False) -> dict:
    pen = path.penalty
    opts = path.options
    meta = {
        "format": FORMAT,
        "version": __version__,
        "n": n,
        "p": path.p,
        "penalty": pen.as_dict(),
        "gamma": _num(pen.gamma),
        "standardized": bool(standardized),
        "scales": None if scales is None else [float(s) for s in scales],
        "termination": path.termination,
        "message": path.message,
        "k_star": path.k_star,
        "tolerances": {
            "tol_knot": opts.tol_knot,
            "tol_kkt": opts.tol_kkt,
            "tol_fit": opts.tol_fit,
            "k_max": opts.k_max,
            "lambda_min": opts.lambda_min,
        },
        "z_tilde": [float(v) for v in path.z_tilde],
    }
    points = []
    for pt in path.points:
        A = np.flatnonzero(pt.eta)
        slope = pt.slope
        points.append(
            {
                "k": pt.k,
                "tau": _num(pt.tau),
                "lambda": pt.lam,
                "delta": _num(pt.delta),
                "xi": int(pt.xi),
                "hit_index": None if pt.hit_index is None else int(pt.hit_index),
                "active": [
                    [int(j), float(pt.b[j]), int(pt.eta[j]), None if slope is None else float(slope[j])] for j in A
                ],
            }
        )
    return {"metadata": meta, "points": points}


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def serialize(path: SolutionPath, **meta) -> str:
    return dumps(to_document(path, **meta))


def from_document(doc: dict) -> SolutionPath:
    try:
        meta = doc["metadata"]
        if meta.get("format") != FORMAT:
            raise InputError(f"unsupported path document format {meta.get('format')!r}")
        p = int(meta["p"])
        pd = meta["penalty"]
        penalty = PenaltySpec(pd["knots"], pd["u"], pd["v"], kind=pd["kind"])
        tol = meta["tolerances"]
        opts = PathOptions(
            k_max=tol["k_max"],
            tol_knot=tol["tol_knot"],
            tol_kkt=tol["tol_kkt"],
            tol_fit=tol["tol_fit"],
            lambda_min=tol["lambda_min"],
        )
        points = []
        for rec in doc["points"]:
            b = np.zeros(p)
            eta = np.zeros(p, dtype=int)
            slope = None if rec["k"] == 0 else np.zeros(p)
            for j, bj, ej, sj in rec["active"]:
                b[j] = bj
                eta[j] = ej
                if slope is not None:
                    slope[j] = sj
            points.append(
                TurningPoint(
                    int(rec["k"]),
                    _inf(rec["tau"]),
                    b,
                    eta,
                    slope,
                    int(rec["xi"]),
                    _inf(rec["delta"]),
                    rec["hit_index"],
                )
            )
        z = np.array(meta["z_tilde"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed path document: {exc}") from exc
    return SolutionPath(points, z, penalty, meta["termination"], message=meta.get("message", ""), options=opts)


def parse(text: str) -> SolutionPath:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"path document is not valid JSON: {exc}") from exc
    return from_document(doc)


def metadata(text: str) -> dict:
    return json.loads(text)["metadata"]
