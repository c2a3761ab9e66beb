#!/usr/bin/env python3
"""Writes include/eulbo/sobol_table.hpp from scipy's Joe-Kuo direction numbers."""
import pathlib
import sys

import numpy as np
import scipy.stats

DIMS = 1024

src = pathlib.Path(scipy.stats.__file__).parent / "_sobol_direction_numbers.npz"
data = np.load(src)
poly = data["poly"][:DIMS]
vinit = data["vinit"][:DIMS]

out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "include/eulbo/sobol_table.hpp")
lines = [
    "#pragma once",
    "",
    "// Generated by tools/gen_sobol_table.py (Joe-Kuo new-joe-kuo-6.21201 direction numbers).",
    "",
    "#include <cstdint>",
    "",
    "namespace eulbo::detail {",
    "",
    f"inline constexpr int kSobolDims = {DIMS};",
    f"inline constexpr int kSobolInitWidth = {vinit.shape[1]};",
    "",
    "inline constexpr std::uint32_t kSobolPoly[kSobolDims] = {",
]
for i in range(0, DIMS, 16):
    lines.append("    " + ", ".join(str(int(p)) for p in poly[i:i + 16]) + ",")
lines += ["};", "", "inline constexpr std::uint32_t kSobolInit[kSobolDims][kSobolInitWidth] = {"]
for row in vinit:
    lines.append("    {" + ", ".join(str(int(v)) for v in row) + "},")
lines += ["};", "", "}  // namespace eulbo::detail", ""]
out.write_text("\n".join(lines))
