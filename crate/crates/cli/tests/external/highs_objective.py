#!/usr/bin/env python3
"""Prints the optimal objective of an MPS file solved with HiGHS via scipy.

Reads the whitespace-separated MPS that `phasebal` writes (N/L/G/E rows,
MARKER integer blocks, RHS, and UP/LO/FX/MI/PL/BV bounds). Exits 1 when no
optimum is found.
"""

import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix


def read_mps(path):
    senses, rows, cols, kinds = {}, {}, {}, []
    obj_row, entries, rhs, lo, hi = None, [], {}, {}, {}
    section, integer = None, False
    with open(path) as f:
        for line in f:
            tok = line.split()
            if not tok or line.startswith("*"):
                continue
            if not line[0].isspace():
                section = tok[0]
                continue
            if section == "ROWS":
                if tok[0] == "N":
                    obj_row = obj_row or tok[1]
                else:
                    rows[tok[1]] = len(rows)
                    senses[tok[1]] = tok[0]
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    integer = tok[2] == "'INTORG'"
                    continue
                if tok[0] not in cols:
                    cols[tok[0]] = len(cols)
                    kinds.append(1 if integer else 0)
                for name, val in zip(tok[1::2], tok[2::2]):
                    entries.append((name, cols[tok[0]], float(val)))
            elif section == "RHS":
                for name, val in zip(tok[1::2], tok[2::2]):
                    rhs[name] = float(val)
            elif section == "BOUNDS":
                kind, col = tok[0], cols[tok[2]]
                val = float(tok[3]) if len(tok) > 3 else None
                if kind == "BV":
                    lo[col], hi[col] = 0.0, 1.0
                elif kind == "UP":
                    hi[col] = val
                elif kind == "LO":
                    lo[col] = val
                elif kind == "FX":
                    lo[col], hi[col] = val, val
                elif kind == "MI":
                    lo[col] = -np.inf
                elif kind == "PL":
                    hi[col] = np.inf
                else:
                    raise ValueError(f"unsupported bound {kind}")
            elif section == "RANGES":
                raise ValueError("RANGES not supported")

    n, m = len(cols), len(rows)
    c = np.zeros(n)
    ri, ci, vi = [], [], []
    for name, j, val in entries:
        if name == obj_row:
            c[j] += val
        else:
            ri.append(rows[name])
            ci.append(j)
            vi.append(val)
    a = coo_matrix((vi, (ri, ci)), shape=(m, n)).tocsr()
    b = np.array([rhs.get(r, 0.0) for r in rows])
    s = [senses[r] for r in rows]
    lb = np.where([x != "L" for x in s], b, -np.inf)
    ub = np.where([x != "G" for x in s], b, np.inf)
    lower = np.array([lo.get(j, 0.0) for j in range(n)])
    upper = np.array([hi.get(j, np.inf) for j in range(n)])
    return c, a, lb, ub, lower, upper, np.array(kinds)


def main():
    c, a, lb, ub, lower, upper, kinds = read_mps(sys.argv[1])
    constraints = [LinearConstraint(a, lb, ub)] if a.shape[0] else []
    res = milp(c, constraints=constraints, integrality=kinds, bounds=Bounds(lower, upper),
               options={"mip_rel_gap": 0.0})
    if res.status != 0:
        print(res.message, file=sys.stderr)
        sys.exit(1)
    print(repr(float(res.fun)))


if __name__ == "__main__":
    main()
