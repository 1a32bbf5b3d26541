#!/usr/bin/env python3
"""Solve SDPA sparse (.dat-s) files with cvxpy and print the optimal values.

Each file is solved in the SDPA dual form

    max  F0 . Y   s.t.  Fi . Y = ci,  Y >= 0  (block diagonal).

A "*free_pairs n" comment marks the last 2n LP entries as split free
variables; they are merged back into free variables unless --raw is given.

Output: one JSON object per file on stdout, e.g.
    {"file": "step_0.dat-s", "status": "optimal", "objective": -1.234}
"""

import argparse
import json
import sys

import cvxpy as cp
import numpy as np


def read_sdpa(path):
    free_pairs = 0
    body = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line[0] in '"*':
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "free_pairs":
                    free_pairs = int(parts[1])
                continue
            for ch in ",(){}":
                line = line.replace(ch, " ")
            if line.strip():
                body.append(line.split())
    m = int(body[0][0])
    nb = int(body[1][0])
    blocks = [int(float(t)) for t in body[2][:nb]]
    c = np.array([float(t) for t in body[3][:m]])
    entries = [(int(t[0]), int(t[1]), int(t[2]), int(t[3]), float(t[4])) for t in body[4:]]
    return m, blocks, c, entries, free_pairs


def build(path, raw):
    m, blocks, c, entries, free_pairs = read_sdpa(path)
    if raw:
        free_pairs = 0
    vars_ = []
    cons = []
    for b in blocks:
        if b > 0:
            Y = cp.Variable((b, b), symmetric=True)
            cons.append(Y >> 0)
            vars_.append(("psd", Y))
        else:
            n = -b
            nonneg = n - 2 * free_pairs
            y = cp.Variable(nonneg) if nonneg > 0 else None
            z = cp.Variable(free_pairs) if free_pairs > 0 else None
            if y is not None:
                cons.append(y >= 0)
            vars_.append(("lp", (nonneg, y, z)))

    # Sparse coefficient lists per matrix number.
    terms = [[] for _ in range(m + 1)]
    for mat, blk, i, j, v in entries:
        kind, var = vars_[blk - 1]
        if kind == "psd":
            i, j = min(i, j) - 1, max(i, j) - 1
            coef = v if i == j else 2.0 * v
            terms[mat].append(coef * var[i, j])
        else:
            nonneg, y, z = var
            k = i - 1
            if k < nonneg:
                terms[mat].append(v * y[k])
            else:
                q = k - nonneg
                if q % 2 == 1:
                    continue
                terms[mat].append(v * z[q // 2])

    def total(ts):
        return cp.sum(cp.hstack(ts)) if ts else 0.0

    for i in range(1, m + 1):
        cons.append(total(terms[i]) == c[i - 1])
    return cp.Problem(cp.Maximize(total(terms[0])), cons)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("files", nargs="+")
    ap.add_argument("--solver", default="CLARABEL")
    ap.add_argument("--raw", action="store_true", help="keep split free variables as LP pairs")
    args = ap.parse_args(argv)
    rc = 0
    for path in args.files:
        prob = build(path, args.raw)
        try:
            if args.solver.upper() == "CLARABEL":
                prob.solve(solver=args.solver, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
            else:
                prob.solve(solver=args.solver)
        except cp.error.SolverError as e:
            print(json.dumps({"file": path, "status": "solver_error", "message": str(e)}))
            rc = 1
            continue
        out = {"file": path, "status": prob.status}
        if prob.value is not None and np.isfinite(prob.value):
            out["objective"] = float(prob.value)
        else:
            rc = 1
        print(json.dumps(out))
    return rc


if __name__ == "__main__":
    sys.exit(main())
