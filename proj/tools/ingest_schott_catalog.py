#!/usr/bin/env python3
"""Convert the SCHOTT optical glass datasheet into the plain-text catalog.

Usage:
    ingest_schott_catalog.py SCHOTT.xls N-SK10.yml > data/glass/schott.cat

SCHOTT.xls is the vendor spreadsheet (shipped e.g. inside the `opticalglass`
PyPI package). The YAML file is the refractiveindex.info record of N-SK10 taken
from the SCHOTT Zemax catalog 2017-01-20b; it is used for the legacy SK10
entry, which has the same n_d / V_d as N-SK10.

Heat-treated and special-transmission variants (HT, HTi, HTultra) share the
optical constants of their base glass and are dropped so that nearest-glass
lookups have no exact ties.
"""

import re
import sys

import xlrd
import yaml

VARIANT = re.compile(r"(HT|HTi|HTultra)$")


def schott_rows(path):
    sheet = xlrd.open_workbook(path).sheet_by_index(0)
    header = [sheet.cell_value(3, c) for c in range(sheet.ncols)]
    col = {name: header.index(name) for name in ("Glass", "nd", "vd", "B1", "B2", "B3", "C1", "C2", "C3")}
    for r in range(4, sheet.nrows):
        name = sheet.cell_value(r, col["Glass"])
        if not name or VARIANT.search(name):
            continue
        values = [sheet.cell_value(r, col[k]) for k in ("nd", "vd", "B1", "B2", "B3", "C1", "C2", "C3")]
        if not all(isinstance(v, float) for v in values):
            continue
        yield name, values


def refractiveindex_row(path, name):
    doc = yaml.safe_load(open(path))
    coeffs = [float(v) for v in doc["DATA"][0]["coefficients"].split()]
    # formula 2: 1 + sum B_i l^2 / (l^2 - C_i); coefficient list is 0, B1, C1, B2, C2, B3, C3
    b = coeffs[1::2]
    c = coeffs[2::2]
    specs = doc["SPECS"]
    return name, [float(specs["nd"]), float(specs["Vd"]), *b, *c]


def main():
    rows = list(schott_rows(sys.argv[1]))
    rows.append(refractiveindex_row(sys.argv[2], "SK10"))
    rows.sort(key=lambda r: r[0])
    print("# SCHOTT optical glass catalog")
    print("# columns: name n_d V_d B1 B2 B3 C1 C2 C3")
    print("# Sellmeier: n^2 = 1 + sum_i B_i l^2 / (l^2 - C_i), l in micrometres, C_i in um^2")
    print("# generated by tools/ingest_schott_catalog.py from the SCHOTT datasheet")
    print("# SK10: legacy designation, constants of N-SK10 (SCHOTT Zemax catalog 2017-01-20b)")
    for name, v in rows:
        print(f"{name:<10} {v[0]:.5f} {v[1]:.2f} " + " ".join(f"{x:.9g}" for x in v[2:]))


if __name__ == "__main__":
    main()
