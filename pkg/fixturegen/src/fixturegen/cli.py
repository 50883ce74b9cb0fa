"""Command line entry point: generate_fixtures <specs.json> <outdir>.

The spec file holds a list of systems:
    {"name": "lih_2.60", "basis": "sto-3g", "units": "angstrom",
     "atoms": [["Li", 0, 0, 0], ["H", 0, 0, 2.6]]}
Each system yields <name>.fcidump plus <name>.json with the HF energy and the
geometry actually used (bohr).

Optional fields keep potential-energy scans on one SCF branch:
    "guess_from": name of an earlier system whose converged density seeds SCF;
    "scan_steps": number of intermediate geometries walked between the guess
    system and this one (each an unnamed warm-started SCF).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .fcidump import format_fcidump
from .scf import BOHR_PER_ANGSTROM, ScfError, mo_integrals, run_rhf


def generate_one(spec: dict, outdir: Path, registry: dict | None = None) -> dict:
    name = spec["name"]
    basis = spec["basis"]
    units = spec.get("units", "bohr").lower()
    scale = {"bohr": 1.0, "angstrom": BOHR_PER_ANGSTROM}.get(units)
    if scale is None:
        raise ValueError(f"{name}: unknown units {units!r}")
    if spec.get("charge", 0) != 0:
        raise ValueError(f"{name}: only neutral systems are supported")
    atoms = [(sym, scale * np.array([x, y, z], float)) for sym, x, y, z in spec["atoms"]]

    d0 = None
    guess = spec.get("guess_from")
    if guess is not None:
        if registry is None or guess not in registry:
            raise ValueError(f"{name}: guess_from system {guess!r} not generated yet")
        g_atoms, d0 = registry[guess]
        if [a[0] for a in g_atoms] != [a[0] for a in atoms]:
            raise ValueError(f"{name}: guess_from geometry has different atoms")
        for k in range(1, int(spec.get("scan_steps", 0)) + 1):
            frac = k / (int(spec["scan_steps"]) + 1)
            mid = [
                (sym, (1.0 - frac) * gx + frac * tx)
                for (sym, gx), (_, tx) in zip(g_atoms, atoms)
            ]
            d0 = run_rhf(mid, basis, d_init=d0).density

    res = run_rhf(atoms, basis, d_init=d0)
    if registry is not None:
        registry[name] = (atoms, res.density)
    h_mo, g_mo = mo_integrals(res)
    text = format_fcidump(h_mo, g_mo, res.e_nuc, res.n_elec, ms2=0)
    (outdir / f"{name}.fcidump").write_text(text)

    sidecar = {
        "name": name,
        "basis": basis,
        "geometry_bohr": [
            [sym, float(xyz[0]), float(xyz[1]), float(xyz[2])] for sym, xyz in atoms
        ],
        "n_orb": int(h_mo.shape[0]),
        "n_elec": int(res.n_elec),
        "ms2": 0,
        "hf_energy": res.e_hf,
        "e_nuc": res.e_nuc,
        "scf_iterations": res.iterations,
    }
    (outdir / f"{name}.json").write_text(json.dumps(sidecar, indent=1) + "\n")
    return sidecar


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="generate_fixtures")
    ap.add_argument("specs", help="JSON file listing the systems to generate")
    ap.add_argument("outdir", help="directory receiving .fcidump/.json pairs")
    ap.add_argument("--only", help="comma-separated subset of system names", default=None)
    args = ap.parse_args(argv)

    specs = json.loads(Path(args.specs).read_text())
    if args.only:
        by_name = {s["name"]: s for s in specs}
        chosen = set(args.only.split(","))
        missing = chosen - set(by_name)
        if missing:
            print(f"unknown system names: {sorted(missing)}", file=sys.stderr)
            return 2
        # pull in warm-start ancestors so chains stay intact under subsetting
        frontier = list(chosen)
        while frontier:
            g = by_name[frontier.pop()].get("guess_from")
            if g and g not in chosen:
                chosen.add(g)
                frontier.append(g)
        specs = [s for s in specs if s["name"] in chosen]
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    status = 0
    registry: dict = {}
    for spec in specs:
        try:
            sc = generate_one(spec, outdir, registry)
            print(f"{spec['name']}: E_HF = {sc['hf_energy']:.10f}  ({sc['scf_iterations']} it)")
        except (ScfError, ValueError, KeyError) as exc:
            print(f"{spec.get('name', '?')}: FAILED: {exc}", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
