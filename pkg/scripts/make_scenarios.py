"""Regenerate the bundled scenario files.

The two-slit golden number is computed here by brute force with scipy's
matrix exponential, independently of the library, and frozen into the file.
"""
import itertools
import json
from pathlib import Path

import numpy as np
from scipy.linalg import expm

OUT = Path(__file__).resolve().parents[1] / "src" / "decohist" / "scenarios"


def cpx(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in m]
    return [cpx(r) for r in m]


def basis_partition(labels):
    return {"cells": [{"label": lab, "basis": [i]} for i, lab in enumerate(labels)]}


def twoslit():
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0, -1.0])
    h = (np.pi / 4) * sy + 0.3 * sz
    psi = np.array([1, 0], dtype=complex)
    u = expm(-1j * h)
    proj = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    disc = 0.0
    for b in range(2):
        coarse = np.linalg.norm(proj[b] @ u @ u @ psi) ** 2
        fine = sum(np.linalg.norm(proj[b] @ u @ proj[a] @ u @ psi) ** 2 for a in range(2))
        disc = max(disc, abs(coarse - fine))
    return {
        "name": "twoslit",
        "description": "Two-path toy: which-slit cells at t=1, screen cells at t=2. "
                       "Forgetting the slit breaks additivity through interference.",
        "dims": [2],
        "hamiltonian": cpx(h),
        "initial_state": cpx(psi),
        "times": [1.0, 2.0],
        "partitions": [basis_partition(["slit_A", "slit_B"]), basis_partition(["screen_0", "screen_1"])],
        "coarse_grainings": [{"name": "ignore_slit", "grouping": [[0, 0], None]}],
        "golden": {"sum_rule_max_discrepancy": float(disc)},
    }


def interferometer():
    sx = np.array([[0, 1], [1, 0]])
    return {
        "name": "interferometer_recombine",
        "description": "Beam splitter, two arms at t=1, recombined at t=2: every photon exits one port, "
                       "so the later cell has two live predecessors.",
        "dims": [2],
        "hamiltonian": cpx((np.pi / 4) * sx),
        "initial_state": cpx([1, 0]),
        "times": [1.0, 2.0],
        "partitions": [basis_partition(["arm_upper", "arm_lower"]), basis_partition(["port_0", "port_1"])],
    }


def repeated():
    outcomes = ["".join(p) for p in itertools.product("+-", repeat=3)]
    by_count = [s.count("-") for s in outcomes]  # supercell k holds M = 3 - k
    first = [0 if s[0] == "+" else 1 for s in outcomes]
    return {
        "name": "repeated_N",
        "description": "Three spin copies, each measured by its own two-state pointer; records sampled at t=1 and t=3.",
        "dims": [2, 2, 2, 2, 2, 2],
        "model": {"kind": "repeated", "c2": 0.7, "N": 3, "pointer_dim": 2, "times": [1.0, 3.0]},
        "coarse_grainings": [
            {"name": "count_plus_both", "grouping": [by_count, by_count]},
            {"name": "count_plus_late", "grouping": [[0] * 8, by_count]},
            {"name": "first_copy_early", "grouping": [first, None]},
            {"name": "trivial_early", "grouping": [[0] * 8, None]},
        ],
    }


def spin_vn():
    return {
        "name": "spin_vn",
        "description": "Single spin-1/2 with |c|^2 = 0.7 measured by a two-state pointer.",
        "dims": [2, 2],
        "model": {"kind": "von_neumann", "c2": 0.7, "pointer_dim": 2, "times": [1.0]},
        "coarse_grainings": [{"name": "trivial", "grouping": [[0, 0]]}],
        "nogo": {"c2_pair": [0.4, 0.6], "trials": 200},
    }


def alice():
    return {
        "name": "alice_semantics",
        "description": "Spin measurement with |c|^2 = 0.7; the pointer reading is recorded at t=1 and t=3.",
        "dims": [2, 2],
        "model": {"kind": "von_neumann", "c2": 0.7, "pointer_dim": 2, "times": [1.0, 3.0]},
        "predicates": [
            {"name": "reads +", "kind": "occasion", "labels": ["+"]},
            {"name": "reads -", "kind": "occasion", "labels": ["-"]},
            {"name": "reads + at the final check", "kind": "occasion", "labels": ["+"], "times": [1]},
            {"name": "spin-up world", "kind": "eternal", "labels": ["+"]},
            {"name": "always", "kind": "eternal", "value": True},
            {"name": "never", "kind": "occasion", "value": False},
        ],
        "utterance_times": [0.5, 1.0, 2.0, 3.0, 4.0],
    }


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for sc in (spin_vn(), repeated(), twoslit(), interferometer(), alice()):
        (OUT / f"{sc['name']}.json").write_text(json.dumps({"schema_version": 1, **sc}, indent=2) + "\n")
        print(sc["name"], sc.get("golden", ""))
