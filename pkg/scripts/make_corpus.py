"""Regenerate the bundled MiniLang corpus under corpus/ (deterministic)."""
import argparse
import random
from pathlib import Path

from galla.minilang.generate import random_program


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "corpus"))
    ap.add_argument("-n", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-statements", type=int, default=8)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    for i in range(args.n):
        (out / f"u{i:05d}.mini").write_text(random_program(rng, max_statements=args.max_statements), encoding="utf-8")
    print(f"wrote {args.n} programs to {out}")


if __name__ == "__main__":
    main()
