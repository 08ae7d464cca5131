import argparse
import os


def parser(description, out="out"):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=out, help="output directory")
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.0027)
    return p


def write(out_dir, name, text):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(f"wrote {path}")
