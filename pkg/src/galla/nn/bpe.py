"""Byte-level byte-pair encoding.

Text is split into chunks (identifier runs, digit runs, punctuation runs and
whitespace), each chunk is UTF-8 encoded and merges never cross chunk
boundaries. Every byte has its own id, so any string can be encoded.
"""
from __future__ import annotations

import re
from collections import Counter, defaultdict
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

CHUNK_RE = re.compile(r" ?[A-Za-z_][A-Za-z_0-9]*| ?[0-9]+| ?[^\sA-Za-z_0-9]+|\n| +(?=\S)| +|\s")
EOT = "<|eot|>"


class BPE:
    def __init__(self, merges: Sequence[tuple[int, int]], specials: Sequence[str] = ()):
        self.merges = [tuple(m) for m in merges]
        self.specials = list(specials)
        self.pieces: list[bytes] = [bytes([b]) for b in range(256)]
        self.ranks: dict[tuple[int, int], int] = {}
        for i, (a, b) in enumerate(self.merges):
            self.ranks[(a, b)] = 256 + i
            self.pieces.append(self.pieces[a] + self.pieces[b])
        self.special_ids = {s: 256 + len(self.merges) + k for k, s in enumerate(self.specials)}
        self._encode_chunk = lru_cache(maxsize=65536)(self._encode_chunk_uncached)

    @property
    def vocab_size(self) -> int:
        return 256 + len(self.merges) + len(self.specials)

    @property
    def eot_id(self) -> int:
        return self.special_ids[EOT]

    def _encode_chunk_uncached(self, chunk: str) -> tuple[int, ...]:
        ids = list(chunk.encode("utf-8"))
        ranks = self.ranks
        while len(ids) > 1:
            best = None
            best_rank = None
            for pair in zip(ids, ids[1:]):
                r = ranks.get(pair)
                if r is not None and (best_rank is None or r < best_rank):
                    best, best_rank = pair, r
            if best is None:
                break
            out = []
            i = 0
            while i < len(ids):
                if i + 1 < len(ids) and ids[i] == best[0] and ids[i + 1] == best[1]:
                    out.append(best_rank)
                    i += 2
                else:
                    out.append(ids[i])
                    i += 1
            ids = out
        return tuple(ids)

    def encode(self, text: str) -> list[int]:
        out: list[int] = []
        for chunk in CHUNK_RE.findall(text):
            out.extend(self._encode_chunk(chunk))
        return out

    def decode(self, ids: Iterable[int]) -> str:
        n_pieces = len(self.pieces)
        raw = b"".join(self.pieces[i] for i in ids if 0 <= i < n_pieces)
        return raw.decode("utf-8", errors="replace")

    # -- persistence ---------------------------------------------------------
    def save(self, path: str | Path) -> None:
        """Vocabulary table sorted by id: ``id<TAB>hex bytes<TAB>left<TAB>right``.

        Base bytes have left = right = -1; special tokens store their literal
        text as hex with left = right = -2.
        """
        lines = ["# galla bpe vocabulary v1"]
        for i, piece in enumerate(self.pieces):
            left, right = (-1, -1) if i < 256 else self.merges[i - 256]
            lines.append(f"{i}\t{piece.hex()}\t{left}\t{right}")
        for s, i in self.special_ids.items():
            lines.append(f"{i}\t{s.encode('utf-8').hex()}\t-2\t-2")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BPE":
        merges, specials = [], []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            idx, hexed, left, right = line.split("\t")
            left, right = int(left), int(right)
            if left == -2:
                specials.append(bytes.fromhex(hexed).decode("utf-8"))
            elif left >= 0:
                merges.append((left, right))
        return cls(merges, specials)


def train_bpe(texts: Iterable[str], vocab_size: int, specials: Sequence[str] = (EOT,)) -> BPE:
    """Learn merges until the vocabulary (bytes + merges + specials) reaches ``vocab_size``.

    Ties between equally frequent pairs go to the smallest pair of ids, so
    training is deterministic.
    """
    n_merges = vocab_size - 256 - len(specials)
    if n_merges < 0:
        raise ValueError("vocab_size too small for the byte alphabet")
    counts: Counter[str] = Counter()
    for t in texts:
        counts.update(CHUNK_RE.findall(t))
    words = [list(c.encode("utf-8")) for c in counts]
    freqs = list(counts.values())
    pair_counts: Counter[tuple[int, int]] = Counter()
    where: dict[tuple[int, int], set[int]] = defaultdict(set)
    for wi, w in enumerate(words):
        for pair in zip(w, w[1:]):
            pair_counts[pair] += freqs[wi]
            where[pair].add(wi)
    merges: list[tuple[int, int]] = []
    for k in range(n_merges):
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        if pair_counts[best] <= 1:
            break
        new_id = 256 + k
        merges.append(best)
        for wi in list(where.pop(best, ())):
            w = words[wi]
            f = freqs[wi]
            for pair in zip(w, w[1:]):
                pair_counts[pair] -= f
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
            out = []
            i = 0
            while i < len(w):
                if i + 1 < len(w) and w[i] == best[0] and w[i + 1] == best[1]:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(w[i])
                    i += 1
            words[wi] = out
            for pair in zip(out, out[1:]):
                pair_counts[pair] += f
                where[pair].add(wi)
        pair_counts.pop(best, None)
    return BPE(merges, specials)
