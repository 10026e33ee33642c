#!/usr/bin/env python3
"""
Verify the full CLI flow on a phantom stack:
1. phantom -> writes volumes, ground truths and anomaly masks
2. decompose -> low-rank / sparse outputs and a run report
3. metrics -> Dice, Jaccard and ASD of two anomaly masks
4. Report schema and sparse-support Dice > 80%
"""
import json
import sys
import tempfile
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

import main as cli  # noqa: E402
from tools.validator import VolumeValidator  # noqa: E402

N_VOLUMES = 6


def verify_full_flow(work_dir: Path) -> bool:
    phantom_dir = work_dir / "phantom"
    output_dir = work_dir / "outputs"
    inputs = [str(phantom_dir / f"phantom_{i:02d}.mhd") for i in range(N_VOLUMES)]
    masks = [str(phantom_dir / f"mask_{i:02d}.mhd") for i in range(N_VOLUMES)]

    print(f"\n🚀 Starting full flow verification in {work_dir}")

    print("\n🏃 Step 1: Generating phantom stack...")
    if cli.main(["phantom", "--volumes", str(N_VOLUMES), "-o", str(phantom_dir)]) != 0:
        print("❌ Phantom generation failed")
        return False
    print("✅ Phantom written")

    print("\n🏃 Step 2: Decomposing...")
    code = cli.main(["decompose", "--input", *inputs, "--truth-masks", *masks, "-o", str(output_dir)])
    if code != 0:
        print(f"❌ Decomposition exited with code {code}")
        return False
    print("✅ Decomposition completed")

    print("\n🏃 Step 3: Scoring two anomaly masks...")
    metrics_report = work_dir / "metrics_report.json"
    if cli.main(["metrics", "--a", masks[0], "--b", masks[1], "--report", str(metrics_report)]) != 0:
        print("❌ Metrics command failed")
        return False
    print("✅ Metrics computed")

    print("\n📂 Checking outputs...")
    all_ok = True
    for path in inputs:
        stem = Path(path).stem
        for suffix in ("lowrank", "sparse"):
            name = f"{stem}.{suffix}.mhd"
            if (output_dir / name).exists():
                print(f"  ✅ Found {name}")
            else:
                print(f"  ❌ Missing {name}")
                all_ok = False

    validator = VolumeValidator()
    for report_path in (output_dir / "decompose_report.json", metrics_report):
        with open(report_path, 'r') as f:
            report = json.load(f)
        is_valid, errors = validator.validate_report(report)
        if is_valid:
            print(f"  ✅ Report schema valid: {report_path.name}")
        else:
            print(f"  ❌ Report schema invalid: {report_path.name}")
            print(f"     Errors: {errors}")
            all_ok = False

    with open(output_dir / "decompose_report.json", 'r') as f:
        dice = json.load(f)["metrics"].get("mean_support_dice", 0.0)
    if dice > 80.0:
        print(f"  ✅ Sparse support Dice {dice:.2f}% > 80%")
    else:
        print(f"  ❌ Sparse support Dice {dice:.2f}% <= 80%")
        all_ok = False

    return all_ok


if __name__ == "__main__":
    with tempfile.TemporaryDirectory(prefix="slicelrtd_") as tmp:
        ok = verify_full_flow(Path(tmp))
    print("\n✅ Full flow verified!" if ok else "\n❌ Full flow verification failed")
    sys.exit(0 if ok else 1)
