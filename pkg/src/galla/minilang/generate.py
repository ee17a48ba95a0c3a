"""Seeded random MiniLang program generator (corpus builder and fuzzer).

    python3 -m galla.minilang.generate --out corpus --count 3000 --seed 0
"""
from __future__ import annotations

import argparse
import random
from pathlib import Path

FUNC_NAMES = [
    "add", "scale", "step", "combine", "clamp", "count", "accumulate", "mix", "diff",
    "walk", "fold", "check", "pick", "blend", "span", "shift", "reduce", "probe",
]
VAR_NAMES = ["a", "b", "c", "n", "m", "x", "y", "z", "s", "t", "k", "acc", "total", "res", "tmp", "val"]
LOOP_VARS = ["i", "j"]
BUILTINS = ["abs", "max", "min"]
ARITH = ["+", "-", "*", "/"]


class _Gen:
    def __init__(self, rng: random.Random, max_statements: int):
        self.rng = rng
        self.budget = max_statements
        self.defined: list[str] = []
        self.helpers: list[tuple[str, int]] = []

    def literal(self) -> str:
        if self.rng.random() < 0.08:
            return self.rng.choice(["True", "False"])
        return str(self.rng.randint(0, 9))

    def atom(self, allow_undefined: bool = True) -> str:
        r = self.rng.random()
        if self.defined and r < 0.7:
            return self.rng.choice(self.defined)
        if allow_undefined and r < 0.72:
            return self.rng.choice(["N", "LIMIT"])
        return self.literal()

    def expr(self, depth: int = 0) -> str:
        r = self.rng.random()
        if depth >= 2 or r < 0.35:
            return self.atom()
        if r < 0.8:
            left = self.expr(depth + 1)
            right = self.expr(depth + 1)
            op = self.rng.choice(ARITH)
            if depth > 0 and self.rng.random() < 0.5:
                return f"({left} {op} {right})"
            if self.rng.random() < 0.3:
                return f"{left}{op}{right}"
            return f"{left} {op} {right}"
        if r < 0.86:
            return f"-{self.atom()}"
        if self.helpers and r < 0.93:
            name, arity = self.rng.choice(self.helpers)
            return f"{name}({', '.join(self.expr(depth + 1) for _ in range(arity))})"
        fn = self.rng.choice(BUILTINS)
        if fn == "abs":
            return f"abs({self.expr(depth + 1)})"
        return f"{fn}({self.expr(depth + 1)}, {self.expr(depth + 1)})"

    def condition(self) -> str:
        left = self.rng.choice(self.defined) if self.defined else self.atom()
        op = self.rng.choice(["<", "<", "=="])
        cond = f"{left} {op} {self.expr(1)}"
        r = self.rng.random()
        if r < 0.1:
            return f"not {cond}"
        if r < 0.2 and self.defined:
            other = self.rng.choice(self.defined)
            return f"{cond} {self.rng.choice(['and', 'or'])} {other} < {self.literal()}"
        return cond

    def assign(self, target: str | None = None) -> str:
        if target is None:
            if self.defined and self.rng.random() < 0.45:
                target = self.rng.choice(self.defined)
            else:
                fresh = [v for v in VAR_NAMES if v not in self.defined]
                target = self.rng.choice(fresh or VAR_NAMES)
        value = self.expr()
        if target not in self.defined:
            self.defined.append(target)
        return f"{target} = {value}"

    def update(self) -> str:
        """Loop-carried update ``v = v op e``."""
        v = self.rng.choice(self.defined)
        return f"{v} = {v} {self.rng.choice(['+', '-', '*'])} {self.expr(1)}"

    def block(self, indent: int, max_len: int, in_function: bool, in_loop: bool = False) -> list[str]:
        lines: list[str] = []
        n = self.rng.randint(1, max(1, max_len))
        for _ in range(n):
            if self.budget <= 0:
                break
            lines.extend(self.statement(indent, in_function, in_loop))
        if not lines:
            lines.append(" " * indent + self.assign())
            self.budget -= 1
        return lines

    def statement(self, indent: int, in_function: bool, in_loop: bool) -> list[str]:
        pad = " " * indent
        self.budget -= 1
        r = self.rng.random()
        nested_ok = indent < 12 and self.budget >= 2 and self.defined
        if nested_ok and r < 0.14:
            v = self.rng.choice(self.defined)
            header = f"while {v} < {self.expr(1)}:"
            saved = list(self.defined)
            body = [self.update()]
            self.budget -= 1
            if self.budget > 0 and self.rng.random() < 0.5:
                body_lines = [pad + "    " + body[0]] + self.block(indent + 4, 2, in_function, True)
            else:
                body_lines = [pad + "    " + body[0]]
            self.defined = saved
            if len(body_lines) == 1 and self.rng.random() < 0.4:
                return [pad + header + " " + body_lines[0].strip()]
            return [pad + header] + body_lines
        if nested_ok and r < 0.26:
            loop_var = self.rng.choice(LOOP_VARS)
            bound = self.expr(1) if self.rng.random() < 0.7 else f"{self.literal()}, {self.atom()}"
            header = f"for {loop_var} in range({bound}):"
            saved = list(self.defined)
            self.defined.append(loop_var)
            acc = self.rng.choice(saved)
            first = f"{acc} = {acc} + {loop_var}" if self.rng.random() < 0.6 else self.update()
            self.budget -= 1
            body_lines = [pad + "    " + first]
            if self.budget > 0 and self.rng.random() < 0.4:
                body_lines += self.block(indent + 4, 2, in_function, True)
            self.defined = saved
            if len(body_lines) == 1 and self.rng.random() < 0.3:
                return [pad + header + " " + first]
            return [pad + header] + body_lines
        if nested_ok and r < 0.42:
            header = f"if {self.condition()}:"
            saved = list(self.defined)
            then = self.block(indent + 4, 2, in_function, in_loop)
            self.defined = saved + [v for v in self.defined if v not in saved]
            lines = [pad + header] + then
            if self.budget > 0 and self.rng.random() < 0.45:
                other = self.block(indent + 4, 2, in_function, in_loop)
                lines += [pad + "else:"] + other
            self.defined = saved + [v for v in self.defined if v not in saved]
            return lines
        if in_function and self.defined and r < 0.47 and indent > 4:
            return [pad + f"return {self.expr(1)}"]
        if self.defined and r < 0.5:
            return [pad + f"print({self.rng.choice(self.defined)})"]
        return [pad + self.assign()]

    def function(self, name: str) -> list[str]:
        arity = self.rng.randint(1, 3)
        params = self.rng.sample(["a", "b", "c", "n", "x", "y"], arity)
        self.defined = list(params)
        lines = [f"def {name}({', '.join(params)}):"]
        self.budget -= 1
        body = self.block(4, 6, in_function=True)
        lines += body
        self.budget -= 1
        lines.append(f"    return {self.expr(1)}")
        self.helpers.append((name, arity))
        return lines


def random_program(rng: random.Random, max_statements: int = 12) -> str:
    """A syntactically valid MiniLang program with at most ``max_statements`` statements."""
    gen = _Gen(rng, max_statements - 1)
    lines = gen.function(rng.choice(FUNC_NAMES))
    if gen.budget > 0 and rng.random() < 0.35:
        name, arity = gen.helpers[-1]
        gen.defined = []
        args = ", ".join(gen.literal() for _ in range(arity))
        lines.append(f"r = {name}({args})")
        gen.budget -= 1
        if gen.budget > 0 and rng.random() < 0.5:
            lines.append("print(r)")
    return "\n".join(lines) + "\n"


def random_straight_line(rng: random.Random, max_statements: int = 8) -> str:
    gen = _Gen(rng, max_statements)
    gen.defined = ["a", "b"]
    lines = ["def f(a, b):"]
    for _ in range(rng.randint(1, max_statements - 2)):
        lines.append("    " + gen.assign())
    lines.append(f"    return {gen.expr(1)}")
    return "\n".join(lines) + "\n"


def write_corpus(out: Path, count: int, seed: int, max_statements: int = 12) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)
    paths = []
    for i in range(count):
        path = out / f"prog_{i:05d}.mini"
        path.write_text(random_program(rng, max_statements), encoding="utf-8")
        paths.append(path)
    return paths


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="generate a random MiniLang corpus")
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--count", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-statements", type=int, default=12)
    args = ap.parse_args(argv)
    write_corpus(args.out, args.count, args.seed, args.max_statements)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
