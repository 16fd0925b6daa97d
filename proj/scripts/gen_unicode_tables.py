#!/usr/bin/env python3
"""Generate src/unicode_tables.inc from the Python unicodedata module.

Emits three sorted tables used by the NFC normalizer:
  - combining classes (nonzero only)
  - one-level canonical decompositions (Hangul handled algorithmically)
  - primary composites (composition-exclusion filtered)
"""
import sys
import unicodedata

MAX_CP = 0x2FA20
HANGUL_S_BASE, HANGUL_S_COUNT = 0xAC00, 11172


def is_hangul_syllable(cp):
    return HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT


def main(out_path):
    ccc = []
    decomp = []
    compose = []
    for cp in range(0x80, MAX_CP):
        try:
            ch = chr(cp)
        except ValueError:
            continue
        k = unicodedata.combining(ch)
        if k:
            ccc.append((cp, k))
        if is_hangul_syllable(cp):
            continue
        d = unicodedata.decomposition(ch)
        if not d or d.startswith("<"):
            continue  # none, or compatibility decomposition
        parts = [int(p, 16) for p in d.split()]
        if len(parts) == 1:
            decomp.append((cp, parts[0], 0))
        elif len(parts) == 2:
            decomp.append((cp, parts[0], parts[1]))
            # primary composite iff NFC recombines it
            if unicodedata.normalize("NFC", chr(parts[0]) + chr(parts[1])) == ch:
                compose.append((parts[0], parts[1], cp))
        else:
            raise AssertionError(f"canonical decomposition of len {len(parts)}")

    compose.sort()
    with open(out_path, "w") as f:
        f.write("// Generated by scripts/gen_unicode_tables.py -- do not edit.\n")
        f.write(f"// unicodedata version {unicodedata.unidata_version}\n\n")
        f.write("static const CombiningClassEntry kCombiningClass[] = {\n")
        for cp, k in ccc:
            f.write(f"  {{0x{cp:05X}, {k}}},\n")
        f.write("};\n\n")
        f.write("static const DecompEntry kDecomp[] = {\n")
        for cp, a, b in decomp:
            f.write(f"  {{0x{cp:05X}, 0x{a:05X}, 0x{b:05X}}},\n")
        f.write("};\n\n")
        f.write("static const ComposeEntry kCompose[] = {\n")
        for a, b, c in compose:
            f.write(f"  {{0x{a:05X}, 0x{b:05X}, 0x{c:05X}}},\n")
        f.write("};\n")
    print(f"{len(ccc)} ccc, {len(decomp)} decomp, {len(compose)} compose")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/unicode_tables.inc")
