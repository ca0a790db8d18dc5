"""TSP instances and readers for TSPLIB and plain coordinate CSV files."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DomainError, ParseError


@dataclass(frozen=True)
class TspInstance:
    """Symmetric TSP given by a full cost matrix, optionally with coordinates."""

    costs: np.ndarray
    coords: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        C = np.asarray(self.costs, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise DomainError("cost matrix must be square")
        if C.shape[0] < 3:
            raise DomainError("a TSP instance needs at least 3 nodes")
        if not np.all(np.isfinite(C)) or np.any(C < 0):
            raise DomainError("costs must be finite and non-negative")
        if not np.array_equal(C, C.T):
            raise DomainError("cost matrix must be symmetric")
        if np.any(np.diag(C) != 0):
            raise DomainError("cost matrix must have a zero diagonal")
        C = C.copy()
        C.setflags(write=False)
        object.__setattr__(self, "costs", C)
        if self.coords is not None:
            P = np.array(self.coords, dtype=float)
            if P.shape != (C.shape[0], 2):
                raise DomainError("coordinates must be an n x 2 array")
            P.setflags(write=False)
            object.__setattr__(self, "coords", P)

    @property
    def n(self) -> int:
        return self.costs.shape[0]

    @classmethod
    def from_coords(cls, coords, rounded: bool = False, name: str = "") -> "TspInstance":
        P = np.asarray(coords, dtype=float)
        if P.ndim != 2 or P.shape[1] != 2:
            raise DomainError("coordinates must be an n x 2 array")
        diff = P[:, None, :] - P[None, :, :]
        D = np.sqrt(np.sum(diff * diff, axis=2))
        if rounded:
            # TSPLIB nint: floor(d + 0.5)
            D = np.floor(D + 0.5)
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
        return cls(D, P, name)


_KEYWORD_SECTIONS = ("NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION", "DISPLAY_DATA_SECTION")


def _numbers(tokens, lineno, path):
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected numbers, got {' '.join(tokens)!r}", lineno, path) from None


def _explicit_matrix(values, n, fmt, lineno, path):
    v = np.asarray(values, dtype=float)
    C = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    il = np.tril_indices(n, -1)
    if fmt == "FULL_MATRIX":
        need = n * n
        if v.size != need:
            raise ParseError(f"FULL_MATRIX needs {need} weights, found {v.size}", lineno, path)
        C = v.reshape(n, n)
    elif fmt == "UPPER_ROW":
        if v.size != n * (n - 1) // 2:
            raise ParseError("wrong number of UPPER_ROW weights", lineno, path)
        C[iu] = v
        C = C + C.T
    elif fmt == "LOWER_ROW":
        if v.size != n * (n - 1) // 2:
            raise ParseError("wrong number of LOWER_ROW weights", lineno, path)
        C[il] = v
        C = C + C.T
    elif fmt in ("LOWER_DIAG_ROW", "UPPER_DIAG_ROW"):
        if v.size != n * (n + 1) // 2:
            raise ParseError(f"wrong number of {fmt} weights", lineno, path)
        idx = np.tril_indices(n) if fmt == "LOWER_DIAG_ROW" else np.triu_indices(n)
        C[idx] = v
        C = C + C.T - np.diag(np.diag(C))
    else:
        raise ParseError(f"unsupported EDGE_WEIGHT_FORMAT {fmt}", lineno, path)
    return C


def parse_tsplib(text: str, path=None) -> TspInstance:
    """Parse a TSPLIB file (EUC_2D, GEO-free coordinate types, or EXPLICIT)."""
    spec: dict[str, tuple[str, int]] = {}
    section = None
    coords: dict[int, tuple[float, float]] = {}
    weights: list[float] = []
    weight_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        head = line.split(":", 1)[0].strip().upper()
        if head in _KEYWORD_SECTIONS:
            section = head
            weight_line = weight_line or lineno
            continue
        if ":" in line and not line[0].isdigit() and head.replace("_", "").isalpha():
            key, val = line.split(":", 1)
            spec[key.strip().upper()] = (val.strip(), lineno)
            section = None
            continue
        tokens = line.split()
        if section == "NODE_COORD_SECTION":
            nums = _numbers(tokens, lineno, path)
            if len(nums) != 3:
                raise ParseError("coordinate lines need 'index x y'", lineno, path)
            idx = int(nums[0])
            if idx in coords:
                raise ParseError(f"duplicate node index {idx}", lineno, path)
            coords[idx] = (nums[1], nums[2])
        elif section == "EDGE_WEIGHT_SECTION":
            weights.extend(_numbers(tokens, lineno, path))
        elif section == "DISPLAY_DATA_SECTION":
            continue
        else:
            raise ParseError(f"unrecognized line {line!r}", lineno, path)

    if "DIMENSION" not in spec:
        raise ParseError("missing DIMENSION", None, path)
    dim_txt, dim_line = spec["DIMENSION"]
    try:
        n = int(dim_txt)
    except ValueError:
        raise ParseError(f"bad DIMENSION {dim_txt!r}", dim_line, path) from None
    if "TYPE" in spec and spec["TYPE"][0].upper() not in ("TSP", "STSP"):
        raise ParseError(f"unsupported TYPE {spec['TYPE'][0]}", spec["TYPE"][1], path)
    ewt, ewt_line = spec.get("EDGE_WEIGHT_TYPE", ("EUC_2D", None))
    ewt = ewt.upper()
    name = spec.get("NAME", ("", None))[0]
    try:
        if ewt == "EXPLICIT":
            fmt = spec.get("EDGE_WEIGHT_FORMAT", ("FULL_MATRIX", None))[0].upper()
            C = _explicit_matrix(weights, n, fmt, weight_line, path)
            P = None
            if len(coords) == n:
                P = np.array([coords[k] for k in sorted(coords)])
            return TspInstance(C, P, name)
        if ewt not in ("EUC_2D", "CEIL_2D"):
            raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {ewt}", ewt_line, path)
        if len(coords) != n:
            raise ParseError(f"DIMENSION is {n} but {len(coords)} coordinates were given",
                             dim_line, path)
        P = np.array([coords[k] for k in sorted(coords)])
        if ewt == "CEIL_2D":
            inst = TspInstance.from_coords(P, name=name)
            return TspInstance(np.ceil(inst.costs), P, name)
        return TspInstance.from_coords(P, rounded=True, name=name)
    except DomainError as exc:
        raise ParseError(str(exc), None, path) from None


def parse_coord_csv(text: str, path=None) -> TspInstance:
    """Coordinates as CSV rows ``x,y`` or ``id,x,y``; a header row is optional.

    Distances are unrounded Euclidean.
    """
    rows = []
    for lineno, rec in enumerate(csv.reader(text.splitlines()), start=1):
        if not rec or all(not c.strip() for c in rec):
            continue
        try:
            vals = [float(c) for c in rec]
        except ValueError:
            if lineno == 1:
                continue  # header
            raise ParseError(f"non-numeric row {','.join(rec)!r}", lineno, path) from None
        if len(vals) == 3:
            vals = vals[1:]
        if len(vals) != 2:
            raise ParseError("expected 2 or 3 columns", lineno, path)
        rows.append(vals)
    try:
        return TspInstance.from_coords(np.array(rows).reshape(-1, 2), name=Path(str(path)).stem
                                       if path else "")
    except DomainError as exc:
        raise ParseError(str(exc), None, path) from None


def read_instance(path) -> TspInstance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise ParseError("file is not UTF-8 text", None, path) from None
    if path.suffix.lower() == ".csv":
        return parse_coord_csv(text, path)
    inst = parse_tsplib(text, path)
    if not inst.name:
        inst = TspInstance(inst.costs, inst.coords, path.stem)
    return inst
