"""Write the synthetic input files used by the CLI examples.

    python3 scripts/make_fixtures.py [outdir]   (default: data/)
"""
import json
import sys
from pathlib import Path

from lcfrisk import calibration as cal
from lcfrisk import fixtures as fx
from lcfrisk.mesh_io import mesh_to_dict
from lcfrisk.strain_life import material_to_dict


def dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1) + "\n")
    print("wrote", path)


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dump(out / "bracket_mesh.json", mesh_to_dict(fx.notched_bracket()))
    dump(out / "cube_mesh.json", mesh_to_dict(fx.unit_cube()))
    dump(out / "two_tet10_mesh.json", mesh_to_dict(fx.two_tet10()))
    dump(out / "material.json", material_to_dict(fx.demo_material()))

    truth = fx.study_material()
    profiles = fx.study_profiles()
    ds = cal.synthetic_dataset(truth, profiles, fx.study_design(), seed=0, T=fx.STUDY_T)
    (out / "dataset.csv").write_text(ds.to_csv())
    (out / "profiles.json").write_text(cal.profiles_to_json(profiles))
    dump(out / "study_truth.json", material_to_dict(truth))
    dump(out / "study_start.json", material_to_dict(truth.with_theta(fx.STUDY_THETA0)))


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "data"))
