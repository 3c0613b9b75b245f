#!/usr/bin/env python3
"""Prepare MovieLens-100K in the TSV layout `diffgt ingest` reads.

GroupLens is the canonical source; when it is unreachable the copy bundled
with the RecBole wheel is used instead. Output (default: data/ml-100k/):

    ratings.tsv   user_id \t item_id \t rating \t timestamp
    items.tsv     item_id \t genre1|genre2|...
    users.tsv     user_id \t age:<bucket>|gender:<g>|occupation:<o>
"""

import argparse
import io
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def age_bucket(age):
    for edge in (18, 25, 35, 45, 50, 56):
        if age < edge:
            return f"<{edge}"
    return "56+"


def from_grouplens():
    with urllib.request.urlopen(GROUPLENS, timeout=20) as resp:
        z = zipfile.ZipFile(io.BytesIO(resp.read()))
    ratings = [l.split("\t") for l in z.read("ml-100k/u.data").decode().splitlines()]
    items = []
    for line in z.read("ml-100k/u.item").decode("latin-1").splitlines():
        cols = line.split("|")
        flags = cols[5:]
        items.append((cols[0], [g for g, f in zip(GENRES, flags) if f == "1"]))
    users = []
    for line in z.read("ml-100k/u.user").decode().splitlines():
        uid, age, gender, occ, _ = line.split("|")
        users.append((uid, int(age), gender, occ))
    return ratings, items, users


def from_recbole():
    tmp = tempfile.mkdtemp()
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "recbole==1.2.1", "-d", tmp],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    wheel = next(os.path.join(tmp, f) for f in os.listdir(tmp) if f.endswith(".whl"))
    z = zipfile.ZipFile(wheel)
    base = "recbole/dataset_example/ml-100k/ml-100k"

    def table(ext):
        lines = z.read(f"{base}.{ext}").decode("latin-1").splitlines()
        return [l.split("\t") for l in lines[1:] if l.strip()]

    ratings = table("inter")
    items = [(row[0], row[3].split()) for row in table("item")]
    users = [(row[0], int(row[1]), row[2], row[3]) for row in table("user")]
    return ratings, items, users


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "ml-100k"))
    args = parser.parse_args()
    try:
        ratings, items, users = from_grouplens()
    except Exception as err:  # noqa: BLE001
        print(f"grouplens unavailable ({err}); falling back to the RecBole copy", file=sys.stderr)
        ratings, items, users = from_recbole()

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "ratings.tsv"), "w") as f:
        for row in ratings:
            f.write("\t".join(c.strip() for c in row[:4]) + "\n")
    with open(os.path.join(args.out, "items.tsv"), "w") as f:
        for item, genres in items:
            f.write(f"{item}\t{'|'.join(genres)}\n")
    with open(os.path.join(args.out, "users.tsv"), "w") as f:
        for uid, age, gender, occ in users:
            f.write(f"{uid}\tage:{age_bucket(age)}|gender:{gender}|occupation:{occ}\n")
    print(f"wrote {len(ratings)} ratings, {len(items)} items, {len(users)} users to {args.out}")


if __name__ == "__main__":
    main()
