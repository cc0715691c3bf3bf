#!/usr/bin/env python3
"""Download the benchmark datasets into data/ and record their checksums.

Usage: tools/fetch_datasets.py [--data-dir data] [name ...]
"""
import argparse
import hashlib
import io
import json
import pathlib
import sys
import urllib.request
import zipfile


def fetch(url):
    with urllib.request.urlopen(url, timeout=60) as r:
        return r.read()


def concrete_csv(raw):
    import pandas as pd  # xls decoding needs xlrd

    frame = pd.read_excel(io.BytesIO(raw))
    return frame.to_csv(index=False).encode()


def naval_txt(raw):
    with zipfile.ZipFile(io.BytesIO(raw)) as z:
        member = next(n for n in z.namelist() if n.endswith("data.txt"))
        return z.read(member)


CONVERT = {"concrete": concrete_csv, "naval": naval_txt}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-dir", default=str(pathlib.Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("names", nargs="*")
    args = ap.parse_args()

    data_dir = pathlib.Path(args.data_dir)
    manifest_path = data_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text())
    failed = []
    for entry in manifest["datasets"]:
        name = entry["name"]
        if args.names and name not in args.names:
            continue
        target = data_dir / entry["file"]
        if not target.exists():
            try:
                raw = fetch(entry["url"])
                target.write_bytes(CONVERT.get(name, lambda b: b)(raw))
            except Exception as e:  # noqa: BLE001
                print(f"{name}: download failed: {e}", file=sys.stderr)
                failed.append(name)
                continue
        digest = hashlib.sha256(target.read_bytes()).hexdigest()
        if entry.get("sha256") and entry["sha256"] != digest:
            print(f"{name}: checksum changed ({entry['sha256']} -> {digest})", file=sys.stderr)
            failed.append(name)
            continue
        entry["sha256"] = digest
        print(f"{name}: {target} sha256 {digest}")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
